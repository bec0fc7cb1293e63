"""Loading, aligning and deriving the daily feature series.

Every series lives in its own ``date,value`` CSV file. A JSON manifest maps
series names to files and optionally declares the derived moving-average
column. Dates are plain UTC calendar days held as ``datetime64[D]``.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import tempfile
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DecodeError, FetchError, InsufficientDataError, ParseError, ValidationError

logger = logging.getLogger(__name__)

PRICE_SERIES = ("Close", "Open", "High", "Low")
OHLCV_SERIES = ("Close", "Open", "High", "Low", "Volume")

# Series whose values must be non-negative.
NON_NEGATIVE = frozenset(
    {"Volume", "Trans_Volume", "Trade_Volume", "Hash_Rate", "Trans_Fees", "Google_Trend", "Fear_Greed"}
)

RAW_SERIES = (
    "Close",
    "Low",
    "High",
    "Open",
    "Trans_Volume",
    "Volume",
    "Hash_Rate",
    "Trans_Fees",
    "XAU_USD",
    "Trade_Volume",
    "Google_Trend",
    "Fear_Greed",
)
MOVING_AVG_NAME = "Moving_Avg_30"
MOVING_AVG_WINDOW = 30
ALL_SERIES = RAW_SERIES + (MOVING_AVG_NAME,)

DATA_ROOT_ENV = "BTCFORECAST_DATA"


def _as_days(dates) -> np.ndarray:
    return np.asarray(dates, dtype="datetime64[D]")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RawSeries:
    """One named daily series with strictly increasing dates."""

    name: str
    dates: np.ndarray
    values: np.ndarray
    digest: str | None = None

    def __post_init__(self):
        dates = _as_days(self.dates)
        values = np.asarray(self.values, dtype=np.float64)
        if dates.ndim != 1 or values.shape != dates.shape:
            raise ValidationError(f"{self.name}: dates and values must be 1-D of equal length")
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise ValidationError(f"{self.name}: dates must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"{self.name}: non-finite value")
        if self.name in NON_NEGATIVE and np.any(values < 0):
            raise ValidationError(f"{self.name}: negative value in a non-negative series")
        object.__setattr__(self, "dates", _frozen(dates))
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self):
        return self.dates.size

    @property
    def points(self) -> list[tuple[_dt.date, float]]:
        return [(d.item(), float(v)) for d, v in zip(self.dates, self.values)]


@dataclass(frozen=True, eq=False)
class AlignedDataset:
    """Date-indexed table; every column has one value per date."""

    dates: np.ndarray
    columns: dict[str, np.ndarray]
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        dates = _as_days(self.dates)
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise ValidationError("dataset dates must be strictly increasing")
        cols = {}
        for name, col in self.columns.items():
            col = np.asarray(col, dtype=np.float64)
            if col.shape != dates.shape:
                raise ValidationError(f"column {name!r} has length {col.size}, expected {dates.size}")
            cols[name] = _frozen(col)
        object.__setattr__(self, "dates", _frozen(dates))
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "provenance", dict(self.provenance))

    def __len__(self):
        return self.dates.size

    @property
    def num_rows(self) -> int:
        return self.dates.size

    @property
    def feature_names(self) -> list[str]:
        return list(self.columns)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise ValidationError(f"unknown feature {name!r}") from None

    def matrix(self, names=None) -> np.ndarray:
        """Row-major ``(rows, features)`` array of the named columns."""
        names = self.feature_names if names is None else list(names)
        if not names:
            return np.empty((self.num_rows, 0))
        return np.column_stack([self[n] for n in names])

    def select(self, names) -> AlignedDataset:
        names = list(names)
        if len(set(names)) != len(names):
            raise ValidationError("duplicate feature names in selection")
        return AlignedDataset(self.dates, {n: self[n] for n in names}, self.provenance)

    def rows(self, start: int, stop: int) -> AlignedDataset:
        return AlignedDataset(
            self.dates[start:stop], {n: c[start:stop] for n, c in self.columns.items()}, self.provenance
        )

    def between(self, start=None, end=None) -> AlignedDataset:
        """Rows with ``start <= date <= end`` (either bound optional)."""
        mask = np.ones(self.num_rows, dtype=bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            mask &= self.dates <= np.datetime64(end, "D")
        return AlignedDataset(self.dates[mask], {n: c[mask] for n, c in self.columns.items()}, self.provenance)

    def with_columns(self, new: dict[str, np.ndarray]) -> AlignedDataset:
        cols = dict(self.columns)
        cols.update(new)
        return AlignedDataset(self.dates, cols, self.provenance)

    def to_series(self) -> list[RawSeries]:
        return [RawSeries(n, self.dates, c, self.provenance.get(n)) for n, c in self.columns.items()]

    def equals(self, other: AlignedDataset) -> bool:
        """Same dates and same column mapping (column order ignored)."""
        if not np.array_equal(self.dates, other.dates):
            return False
        if set(self.columns) != set(other.columns):
            return False
        return all(np.array_equal(self.columns[n], other.columns[n]) for n in self.columns)


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_series_csv(path, name: str) -> RawSeries:
    """Parse a ``date,value`` CSV into a :class:`RawSeries`.

    Rows may appear in any order; the result is sorted by date.
    """
    path = Path(path)
    dates, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "value"]:
            raise ParseError("expected header 'date,value'", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line=lineno)
            try:
                day = _dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise ParseError(f"bad date {row[0]!r}", line=lineno) from None
            try:
                value = float(row[1])
            except ValueError:
                raise ParseError(f"bad value {row[1]!r}", line=lineno) from None
            if not math.isfinite(value):
                raise ValidationError(f"{path.name} line {lineno}: non-finite value {row[1]!r}")
            dates.append(day)
            values.append(value)

    dates = np.array(dates, dtype="datetime64[D]")
    values = np.array(values, dtype=np.float64)
    order = np.argsort(dates, kind="stable")
    dates, values = dates[order], values[order]
    dup = np.flatnonzero(dates[1:] == dates[:-1])
    if dup.size:
        raise ValidationError(f"{path.name}: duplicate date {dates[dup[0]]}")
    return RawSeries(name, dates, values, _file_digest(path))


def write_series_csv(series: RawSeries, path, fmt: str = "{!r}") -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("date,value\n")
        for d, v in zip(series.dates, series.values):
            fh.write(f"{d},{fmt.format(float(v))}\n")


def write_dataset_csv(dataset: AlignedDataset, path) -> None:
    """Wide CSV: ``date`` followed by one column per feature."""
    names = dataset.feature_names
    table = dataset.matrix(names)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(["date"] + names) + "\n")
        for d, row in zip(dataset.dates, table):
            fh.write(",".join([str(d)] + [repr(float(v)) for v in row]) + "\n")


def align(series_list) -> AlignedDataset:
    """Restrict all series to their common dates."""
    series_list = list(series_list)
    if not series_list:
        raise ValidationError("align needs at least one series")
    names = [s.name for s in series_list]
    if len(set(names)) != len(names):
        raise ValidationError(f"duplicate series names: {names}")
    common = series_list[0].dates
    for s in series_list[1:]:
        common = np.intersect1d(common, s.dates, assume_unique=True)
    columns = {}
    for s in series_list:
        idx = np.searchsorted(s.dates, common)
        columns[s.name] = s.values[idx]
    provenance = {s.name: s.digest for s in series_list if s.digest is not None}
    return AlignedDataset(common, columns, provenance)


def moving_average(values, window: int) -> np.ndarray:
    """Trailing simple moving average; output has ``len(values) - window + 1`` points."""
    values = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise ValidationError("window must be >= 1")
    if values.size < window:
        raise InsufficientDataError(f"need at least {window} values, got {values.size}")
    if window == 1:
        return values.copy()
    view = np.lib.stride_tricks.sliding_window_view(values, window)
    # Rounding in the sum can push a mean one ulp past its window's extremes.
    return np.clip(view.mean(axis=1), view.min(axis=1), view.max(axis=1))


def add_moving_average(
    dataset: AlignedDataset,
    source: str = "Close",
    window: int = MOVING_AVG_WINDOW,
    name: str = MOVING_AVG_NAME,
) -> AlignedDataset:
    """Append a trailing moving average of ``source`` and re-align.

    The first ``window - 1`` rows have no average and are dropped.
    """
    ma = moving_average(dataset[source], window)
    ma_series = RawSeries(name, dataset.dates[window - 1 :], ma)
    out = align(dataset.to_series() + [ma_series])
    out.provenance.update(dataset.provenance)
    return out


@dataclass(frozen=True)
class Manifest:
    root: Path
    series: dict[str, str]
    moving_average: dict | None = None


def read_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path.name}: invalid JSON ({exc.msg})", line=exc.lineno) from None
    if not isinstance(doc.get("series"), dict) or not doc["series"]:
        raise ValidationError(f"{path.name}: 'series' must map names to CSV paths")
    return Manifest(path.parent, dict(doc["series"]), doc.get("moving_average"))


def load_manifest(path) -> AlignedDataset:
    """Load every series named in a manifest and build the aligned table."""
    manifest = read_manifest(path)
    series = [load_series_csv(manifest.root / rel, name) for name, rel in manifest.series.items()]
    dataset = align(series)
    if manifest.moving_average:
        ma = manifest.moving_average
        dataset = add_moving_average(
            dataset,
            source=ma.get("source", "Close"),
            window=int(ma.get("window", MOVING_AVG_WINDOW)),
            name=ma.get("name", MOVING_AVG_NAME),
        )
    return dataset


def default_manifest_path() -> Path:
    """Manifest under ``$BTCFORECAST_DATA`` if set, else the bundled snapshot."""
    root = os.environ.get(DATA_ROOT_ENV)
    if root:
        return Path(root) / "manifest.json"
    from .fixture import fixture_manifest_path

    return fixture_manifest_path()


# --- exchange OHLC ---------------------------------------------------------


def _http_get_json(url: str, timeout: float):
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            body = resp.read()
    except (urllib.error.URLError, OSError) as exc:
        raise FetchError(f"GET {url} failed: {exc}") from exc
    try:
        return json.loads(body)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DecodeError(f"response from {url} is not JSON") from exc


def parse_ohlc_payload(payload, pair: str | None = None) -> list[RawSeries]:
    """Decode an exchange OHLC payload into Close/Open/High/Low/Volume.

    Expected layout::

        {"error": [], "result": {"<PAIR>": [[time, open, high, low, close,
                                             vwap, volume, count], ...],
                                 "last": ...}}

    Candles violating ``High >= max(Open, Close)`` or
    ``Low <= min(Open, Close)`` are kept but logged.
    """
    if not isinstance(payload, dict):
        raise DecodeError("payload must be a JSON object")
    if payload.get("error"):
        raise DecodeError(f"endpoint reported errors: {payload['error']}")
    result = payload.get("result")
    if not isinstance(result, dict):
        raise DecodeError("payload has no 'result' object")
    keys = [k for k in result if k != "last"]
    if pair is not None and pair in result:
        key = pair
    elif len(keys) == 1:
        key = keys[0]
    else:
        raise DecodeError(f"cannot pick pair from result keys {keys}")
    candles = result[key]
    if not isinstance(candles, list):
        raise DecodeError("candle list missing")

    rows = []
    for i, c in enumerate(candles):
        if not isinstance(c, list) or len(c) < 7:
            raise DecodeError(f"candle {i} has wrong shape")
        try:
            ts = int(c[0])
            o, h, lo, cl, vol = (float(c[j]) for j in (1, 2, 3, 4, 6))
        except (TypeError, ValueError):
            raise DecodeError(f"candle {i} has non-numeric fields") from None
        day = np.datetime64(_dt.datetime.fromtimestamp(ts, _dt.timezone.utc).date(), "D")
        if h < max(o, cl) or lo > min(o, cl) or h < lo:
            logger.warning("data quality: candle %s has inconsistent OHLC (O=%s H=%s L=%s C=%s)", day, o, h, lo, cl)
        rows.append((day, cl, o, h, lo, vol))
    rows.sort(key=lambda r: r[0])
    dates = np.array([r[0] for r in rows], dtype="datetime64[D]")
    return [RawSeries(name, dates, [r[j + 1] for r in rows]) for j, name in enumerate(OHLCV_SERIES)]


def fetch_ohlc(
    endpoint: str,
    pair: str,
    interval: int = 1440,
    out_dir=None,
    timeout: float = 30.0,
    retries: int = 2,
) -> list[RawSeries]:
    """Download daily candles and optionally snapshot them as CSV files.

    Files are written only after the whole payload has been decoded, through
    a temporary directory, so a failed fetch leaves ``out_dir`` untouched.
    """
    query = urllib.parse.urlencode({"pair": pair, "interval": interval})
    url = f"{endpoint}{'&' if '?' in endpoint else '?'}{query}"
    for attempt in range(retries + 1):
        try:
            payload = _http_get_json(url, timeout)
            break
        except FetchError:
            if attempt == retries:
                raise
            logger.info("retrying %s (%d/%d)", url, attempt + 1, retries)
    series = parse_ohlc_payload(payload, pair)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with tempfile.TemporaryDirectory(dir=out_dir) as tmp:
            staged = []
            for s in series:
                p = Path(tmp) / f"{s.name}.csv"
                write_series_csv(s, p)
                staged.append(p)
            for p in staged:
                os.replace(p, out_dir / p.name)
    return series
