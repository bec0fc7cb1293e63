"""Min-max scaling, sliding windows and the date-ordered train/test split."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_ingest import AlignedDataset
from .errors import InsufficientDataError, ParseError, ValidationError


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature ``(min, max)`` pairs."""

    bounds: dict[str, tuple[float, float]]

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            if not hi >= lo:
                raise ValidationError(f"{name}: max < min")

    @property
    def feature_names(self) -> list[str]:
        return list(self.bounds)

    def _get(self, feature):
        try:
            return self.bounds[feature]
        except KeyError:
            raise ValidationError(f"scaler has no feature {feature!r}") from None

    def scale(self, feature: str, values) -> np.ndarray:
        lo, hi = self._get(feature)
        values = np.asarray(values, dtype=np.float64)
        if hi == lo:
            return np.zeros_like(values)
        return (values - lo) / (hi - lo)


def fit_scaler(train: AlignedDataset) -> ScalerParams:
    if train.num_rows == 0:
        raise ValidationError("cannot fit a scaler on an empty dataset")
    return ScalerParams({n: (float(c.min()), float(c.max())) for n, c in train.columns.items()})


def transform(params: ScalerParams, data: AlignedDataset) -> AlignedDataset:
    """Map each column to ``(v - min) / (max - min)``.

    Values outside the fitted range land outside ``[0, 1]`` and are kept
    as they are. Constant features map to 0.
    """
    return AlignedDataset(
        data.dates, {n: params.scale(n, c) for n, c in data.columns.items()}, data.provenance
    )


def inverse_transform(params: ScalerParams, feature: str, values) -> np.ndarray:
    lo, hi = params._get(feature)
    values = np.asarray(values, dtype=np.float64)
    if hi == lo:
        return np.full_like(values, lo)
    return values * (hi - lo) + lo


@dataclass(frozen=True, eq=False)
class WindowedSet:
    """Sliding windows with one-step-ahead targets.

    ``inputs[i]`` holds rows ``[i, i + window_len)`` of the input features
    and ``targets[i]`` is the target feature at row ``i + window_len``.
    """

    inputs: np.ndarray
    targets: np.ndarray
    target_dates: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 3:
            raise ValidationError("inputs must be (windows, steps, features)")
        if self.targets.shape != (self.inputs.shape[0],) or self.target_dates.shape != self.targets.shape:
            raise ValidationError("targets/target_dates must have one entry per window")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def window_len(self) -> int:
        return self.inputs.shape[1]

    @property
    def num_features(self) -> int:
        return self.inputs.shape[2]

    def subset(self, index) -> WindowedSet:
        return WindowedSet(self.inputs[index], self.targets[index], self.target_dates[index])

    def save(self, path) -> None:
        write_windows(self, path)


def make_windows(
    data: AlignedDataset,
    window_len: int,
    target_feature: str = "Close",
    input_features=None,
) -> WindowedSet:
    """Stack every ``window_len``-row slice of the (scaled) table.

    ``input_features`` defaults to all columns; the target column does not
    have to be one of the inputs.
    """
    if window_len < 1:
        raise ValidationError("window_len must be >= 1")
    target = data[target_feature]
    names = data.feature_names if input_features is None else list(input_features)
    n = data.num_rows
    if n <= window_len:
        raise InsufficientDataError(f"{n} rows cannot form a window of {window_len} plus a target")
    table = data.matrix(names)
    inputs = np.lib.stride_tricks.sliding_window_view(table, window_len, axis=0)[: n - window_len]
    # sliding_window_view puts the window axis last: (windows, features, steps).
    inputs = np.ascontiguousarray(inputs.transpose(0, 2, 1))
    return WindowedSet(inputs, target[window_len:].copy(), data.dates[window_len:].copy())


def make_tabular(data: AlignedDataset, target_feature: str = "Close", input_features=None, horizon: int = 1):
    """Unwindowed rows for tree models: features at day t, target at day t+horizon.

    ``horizon=0`` gives a same-day table for feature ranking; the target
    column is then left out of the default inputs. Returns
    ``(features, targets, target_dates)``.
    """
    if horizon < 0:
        raise ValidationError("horizon must be >= 0")
    target = data[target_feature]
    if input_features is not None:
        names = list(input_features)
    elif horizon == 0:
        names = [f for f in data.feature_names if f != target_feature]
    else:
        names = data.feature_names
    n = data.num_rows
    if n <= horizon:
        raise InsufficientDataError(f"need more than {horizon} rows")
    return data.matrix(names)[: n - horizon], target[horizon:].copy(), data.dates[horizon:].copy()


@dataclass(frozen=True)
class SplitSpec:
    """Hold out the last ``test_days`` rows.

    If ``train_end`` is given the table is first cut so that exactly
    ``test_days`` rows follow ``train_end``.
    """

    test_days: int = 90
    train_end: object = None

    def __post_init__(self):
        if self.test_days < 1:
            raise ValidationError("test_days must be positive")


def split(data: AlignedDataset, spec: SplitSpec) -> tuple[AlignedDataset, AlignedDataset]:
    n = data.num_rows
    if spec.train_end is not None:
        n_train = int(np.searchsorted(data.dates, np.datetime64(spec.train_end, "D"), side="right"))
        if n_train == 0:
            raise ValidationError("train_end precedes the first row")
        if n_train + spec.test_days > n:
            raise ValidationError("not enough rows after train_end for the test segment")
        data = data.rows(0, n_train + spec.test_days)
        n = data.num_rows
    if spec.test_days >= n:
        raise ValidationError(f"test_days={spec.test_days} leaves no training rows out of {n}")
    cut = n - spec.test_days
    return data.rows(0, cut), data.rows(cut, n)


# --- flat binary cache -------------------------------------------------------

_MAGIC = b"BTCWIN01"
_HEADER = struct.Struct("<8sQQQ")


def write_windows(ws: WindowedSet, path) -> None:
    """Row-major float64 layout behind a ``(n, steps, features)`` header."""
    n, w, f = ws.inputs.shape
    days = ws.target_dates.astype("datetime64[D]").astype(np.int64)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, n, w, f))
        fh.write(np.ascontiguousarray(ws.inputs, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ws.targets, dtype="<f8").tobytes())
        fh.write(days.astype("<i8").tobytes())


def read_windows(path) -> WindowedSet:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError("truncated window file")
    magic, n, w, f = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ParseError("not a window cache file")
    expected = _HEADER.size + 8 * (n * w * f + 2 * n)
    if len(raw) != expected:
        raise ParseError(f"window file has {len(raw)} bytes, expected {expected}")
    off = _HEADER.size
    inputs = np.frombuffer(raw, "<f8", n * w * f, off).reshape(n, w, f).astype(np.float64)
    off += 8 * n * w * f
    targets = np.frombuffer(raw, "<f8", n, off).astype(np.float64)
    off += 8 * n
    dates = np.frombuffer(raw, "<i8", n, off).astype("datetime64[D]")
    return WindowedSet(inputs, targets, dates)
