"""Experiment grid, run orchestration, run directories and reports.

A run goes: date cut, split, scaler fit, optional mode decomposition,
windowing, one training per requested model, rolling forecast, optional
averaging with the persistence forecast, metrics. Everything a run
produces lands in ``<runs>/<digest>/``.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import json
import logging
import math
import os
import shutil
import tempfile
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .data_ingest import ALL_SERIES, AlignedDataset
from .errors import TrainingError, ValidationError
from .evaluation import (
    ENSEMBLE_MODES,
    ForecastTrace,
    MetricsReport,
    baseline_trace,
    ensemble_with_baseline,
    metrics,
    roi_report,
    rolling_forecast,
    write_trace_csv,
)
from .gbt import GbtConfig, feature_importance, gbt_train, save_booster
from .neural import ARCHITECTURES, NetworkSpec, save_checkpoint, train, write_loss_csv
from .preprocess import SplitSpec, fit_scaler, inverse_transform, make_tabular, make_windows, split, transform
from .vmd import VmdConfig, decompose, decompose_causal

logger = logging.getLogger(__name__)

MODELS = ARCHITECTURES + ("GBT", "Baseline")
PAPER_MODELS = ("Baseline",) + ARCHITECTURES + ("GBT",)
BASELINE = "Baseline"
SCALER_FITS = ("train", "full")
MODE_PREFIX = "M"
GBT_HOLDOUT_FRACTION = 0.1


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: inputs, models, date range and options.

    ``epochs`` overrides the per-network default when set. ``scaler_fit``
    chooses whether min-max bounds come from the training segment only or
    from the whole selected range. ``causal_vmd`` recomputes the modes for
    each test day from data up to that day.
    """

    id: int
    name: str
    feature_set: tuple
    models: tuple = PAPER_MODELS
    date_range: tuple = (None, None)
    ensemble: bool = False
    vmd: VmdConfig | None = None
    window_len: int = 25
    test_days: int = 90
    epochs: int | None = None
    scaler_fit: str = "train"
    causal_vmd: bool = False
    ensemble_mode: str = "price"
    reference: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "feature_set", tuple(self.feature_set))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "date_range", tuple(self.date_range))
        if not self.feature_set:
            raise ValidationError("feature_set must not be empty")
        if len(set(self.feature_set)) != len(self.feature_set):
            raise ValidationError("feature_set has duplicates")
        unknown = [m for m in self.models if m not in MODELS]
        if unknown or not self.models:
            raise ValidationError(f"unknown models {unknown}; pick from {MODELS}")
        if BASELINE not in self.models:
            object.__setattr__(self, "models", (BASELINE,) + self.models)
        if len(self.date_range) != 2:
            raise ValidationError("date_range must be (start, end)")
        if self.scaler_fit not in SCALER_FITS:
            raise ValidationError(f"scaler_fit must be one of {SCALER_FITS}")
        if self.ensemble_mode not in ENSEMBLE_MODES:
            raise ValidationError(f"ensemble_mode must be one of {ENSEMBLE_MODES}")
        if self.window_len < 1 or self.test_days < 2:
            raise ValidationError("window_len must be >= 1 and test_days >= 2")
        if self.epochs is not None and self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        modes = [f for f in self.feature_set if _is_mode(f)]
        if modes and self.vmd is None:
            raise ValidationError(f"features {modes} need a vmd config")
        if self.vmd is not None:
            bad = [f for f in modes if int(f[1:]) >= self.vmd.K]
            if bad:
                raise ValidationError(f"mode features {bad} exceed K={self.vmd.K}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vmd"] = asdict(self.vmd) if self.vmd is not None else None
        d["feature_set"] = list(self.feature_set)
        d["models"] = list(self.models)
        d["date_range"] = [None if v is None else str(v) for v in self.date_range]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentSpec:
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown experiment fields {sorted(extra)}")
        if d.get("vmd") is not None:
            d["vmd"] = VmdConfig(**d["vmd"])
        for key in ("feature_set", "models", "date_range"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None

    def canonical(self) -> str:
        d = self.to_dict()
        d.pop("reference")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


def _is_mode(name: str) -> bool:
    return name.startswith(MODE_PREFIX) and name[1:].isdigit()


def mode_names(K: int = 11) -> tuple:
    return tuple(f"{MODE_PREFIX}{k}" for k in range(K))


def _builtin() -> dict[int, ExperimentSpec]:
    all13 = ALL_SERIES
    modes = mode_names(11)
    vmd = VmdConfig(K=11, alpha=5000.0)
    specs = [
        ExperimentSpec(1, "Close, Open, High, Low and Volume", ("Close", "Open", "High", "Low", "Volume")),
        ExperimentSpec(2, "All series", all13),
        ExperimentSpec(3, "Open, High and Low", ("Open", "High", "Low")),
        ExperimentSpec(4, "High and Low", ("High", "Low")),
        ExperimentSpec(5, "Low", ("Low",)),
        ExperimentSpec(6, "Open and Low", ("Open", "Low")),
        ExperimentSpec(7, "All series plus 11 modes", all13 + modes, vmd=vmd),
        ExperimentSpec(8, "11 modes only", modes, vmd=vmd),
        ExperimentSpec(
            9,
            "Open, High and Low, averaged with the baseline",
            ("Open", "High", "Low"),
            ensemble=True,
            reference={"GRU+Baseline": 0.7645, "Baseline": 0.4831},
        ),
        ExperimentSpec(
            10,
            "All series plus 11 modes up to 2021-01-01, averaged with the baseline",
            all13 + modes,
            date_range=(None, "2021-01-01"),
            ensemble=True,
            vmd=vmd,
            reference={"GRU+Baseline": 0.7865, "Baseline": 0.5281},
        ),
    ]
    return {s.id: s for s in specs}


BUILTIN_EXPERIMENTS = _builtin()


def builtin_experiment(exp_id: int) -> ExperimentSpec:
    try:
        return BUILTIN_EXPERIMENTS[int(exp_id)]
    except (KeyError, ValueError):
        raise ValidationError(f"no built-in experiment {exp_id!r}; choose 1..10") from None


def load_spec(path) -> ExperimentSpec:
    """Custom experiment from a JSON file with the same fields as :class:`ExperimentSpec`."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return ExperimentSpec.from_dict(doc)


# --- records --------------------------------------------------------------------


@dataclass
class ModelResult:
    status: str  # "ok" or "failed"
    metrics: MetricsReport | None = None
    roi_mean: float | None = None
    error: str = ""
    artifacts: dict = field(default_factory=dict)


@dataclass
class RunRecord:
    spec: ExperimentSpec
    seed: int
    digest: str
    results: dict  # label -> ModelResult, in run order
    results_digest: str = ""
    data_start: str = ""
    data_end: str = ""
    n_train: int = 0
    n_test: int = 0
    wall_clock: float = 0.0
    run_dir: str = ""
    code_version: str = __version__

    @property
    def failed(self) -> list[str]:
        return [k for k, r in self.results.items() if r.status != "ok"]

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "seed": self.seed,
            "digest": self.digest,
            "results_digest": self.results_digest,
            "code_version": self.code_version,
            "data_start": self.data_start,
            "data_end": self.data_end,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "wall_clock": self.wall_clock,
            "run_dir": self.run_dir,
            "results": {
                k: {
                    "status": r.status,
                    "metrics": asdict(r.metrics) if r.metrics else None,
                    "roi_mean": r.roi_mean,
                    "error": r.error,
                    "artifacts": r.artifacts,
                }
                for k, r in self.results.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> RunRecord:
        results = {
            k: ModelResult(
                v["status"],
                MetricsReport(**v["metrics"]) if v["metrics"] else None,
                v.get("roi_mean"),
                v.get("error", ""),
                v.get("artifacts", {}),
            )
            for k, v in d["results"].items()
        }
        return cls(
            ExperimentSpec.from_dict(d["spec"]),
            d["seed"],
            d["digest"],
            results,
            d.get("results_digest", ""),
            d.get("data_start", ""),
            d.get("data_end", ""),
            d.get("n_train", 0),
            d.get("n_test", 0),
            d.get("wall_clock", 0.0),
            d.get("run_dir", ""),
            d.get("code_version", ""),
        )


def run_digest(spec: ExperimentSpec, seed: int, code_version: str = __version__) -> str:
    payload = f"{spec.canonical()}|seed={int(seed)}|version={code_version}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_record(path) -> RunRecord:
    path = Path(path)
    if path.is_dir():
        path = path / "record.json"
    return RunRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))


def load_records(runs_dir) -> list[RunRecord]:
    """Every ``record.json`` one level under ``runs_dir``, sorted by (experiment, seed)."""
    runs_dir = Path(runs_dir)
    if not runs_dir.is_dir():
        raise ValidationError(f"{runs_dir} is not a directory")
    records = [load_record(p) for p in sorted(runs_dir.glob("*/record.json"))]
    records.sort(key=lambda r: (r.spec.id, r.seed, r.digest))
    return records


# --- the pipeline ---------------------------------------------------------------


@dataclass
class _Prepared:
    raw: AlignedDataset  # selected range, raw values, modes added
    scaled: AlignedDataset
    scaler: object
    n_train: int
    inputs: list


def _prepare(spec: ExperimentSpec, dataset: AlignedDataset) -> _Prepared:
    start, end = spec.date_range
    data = dataset.between(start, end)
    if data.num_rows == 0:
        raise ValidationError(f"no rows in date range {spec.date_range}")
    if start is not None and np.datetime64(start, "D") < dataset.dates[0]:
        raise ValidationError(f"start {start} precedes the data ({dataset.dates[0]})")
    if end is not None and np.datetime64(end, "D") > dataset.dates[-1]:
        raise ValidationError(f"end {end} is after the data ({dataset.dates[-1]})")
    missing = [f for f in spec.feature_set if not _is_mode(f) and f not in data.columns]
    if missing:
        raise ValidationError(f"features not in dataset: {missing}")
    if "Close" not in data.columns:
        raise ValidationError("the dataset has no Close column to forecast")

    train_part, _ = split(data, SplitSpec(spec.test_days))
    n_train = train_part.num_rows
    if n_train <= spec.window_len:
        raise ValidationError(f"{n_train} training rows cannot fill a {spec.window_len}-day window")

    if spec.vmd is not None and any(_is_mode(f) for f in spec.feature_set):
        close = data["Close"]
        if spec.causal_vmd:
            modes = decompose_causal(close, n_train, spec.vmd)
        else:
            modes = decompose(close, spec.vmd).modes
        data = data.with_columns(dict(zip(mode_names(spec.vmd.K), modes)))

    columns = list(dict.fromkeys(list(spec.feature_set) + ["Close"]))
    data = data.select(columns)
    fit_on = data.rows(0, n_train) if spec.scaler_fit == "train" else data
    scaler = fit_scaler(fit_on)
    return _Prepared(data, transform(scaler, data), scaler, n_train, list(spec.feature_set))


def _train_network(arch, spec, prep, seed, train_ws, test_ws, out_dir):
    kwargs = {"seed": int(seed)}
    if spec.epochs is not None:
        kwargs["epochs"] = spec.epochs
    net_spec = NetworkSpec(arch, **kwargs)
    model = train(net_spec, train_ws)
    ckpt = out_dir / "checkpoints" / f"{arch}.npz"
    save_checkpoint(model, ckpt)
    write_loss_csv(model, out_dir / "checkpoints" / f"{arch}.loss.csv")
    trace = rolling_forecast(model, test_ws, arch)
    return trace, {"checkpoint": f"checkpoints/{arch}.npz", "loss": f"checkpoints/{arch}.loss.csv"}


def _train_gbt(spec, prep, seed, out_dir):
    # Trees see raw values; predictions are scaled afterwards for scoring.
    X, y, dates = make_tabular(prep.raw, "Close", prep.inputs, horizon=1)
    n_fit = prep.n_train - 1  # rows whose next-day target is still in training
    n_hold = max(1, int(round(GBT_HOLDOUT_FRACTION * n_fit)))
    cfg = GbtConfig(seed=int(seed))
    booster = gbt_train(
        cfg,
        X[: n_fit - n_hold],
        y[: n_fit - n_hold],
        valid=(X[n_fit - n_hold : n_fit], y[n_fit - n_hold : n_fit]),
        feature_names=prep.inputs,
    )
    save_booster(booster, out_dir / "checkpoints" / "GBT.txt")
    feature_importance(booster).write_csv(out_dir / "checkpoints" / "GBT.importance.csv")
    pred = booster.predict(X[n_fit:])
    trace = ForecastTrace(
        dates[n_fit:],
        prep.scaled["Close"][prep.n_train :],
        prep.scaler.scale("Close", pred),
        "GBT",
    )
    return trace, {"checkpoint": "checkpoints/GBT.txt", "importance": "checkpoints/GBT.importance.csv"}


def rank_features(dataset: AlignedDataset, target: str = "Close", features=None, config: GbtConfig | None = None):
    """Rank the other series by how much they explain ``target`` on the same day.

    A booster is fit on the whole table, with the last rows held out for
    early stopping exactly as in a forecasting run. Returns the booster's
    :class:`FeatureImportance`.
    """
    X, y, _ = make_tabular(dataset, target, features, horizon=0)
    names = list(features) if features is not None else [f for f in dataset.feature_names if f != target]
    n_hold = max(1, int(round(GBT_HOLDOUT_FRACTION * len(y))))
    booster = gbt_train(
        config or GbtConfig(),
        X[:-n_hold],
        y[:-n_hold],
        valid=(X[-n_hold:], y[-n_hold:]),
        feature_names=names,
    )
    return feature_importance(booster)


def _hash_results(results: dict, traces: dict) -> str:
    h = hashlib.sha256()
    for label in results:
        r = results[label]
        h.update(label.encode())
        h.update(r.status.encode())
        if r.metrics is not None:
            h.update(repr(asdict(r.metrics)).encode())
        if label in traces:
            h.update(traces[label].predicted.tobytes())
    return h.hexdigest()


def run_experiment(
    spec: ExperimentSpec,
    dataset: AlignedDataset,
    seed: int = 42,
    runs_dir="runs",
    progress=None,
) -> RunRecord:
    """Run every model of ``spec`` and persist the results.

    A model whose training fails is recorded as failed and the run carries
    on. Output is staged in a private temporary directory and moved into
    ``<runs_dir>/<digest>`` at the end. If that directory already exists it
    is left untouched (same digest, same content).
    """
    t0 = time.perf_counter()
    seed = int(seed)
    digest = run_digest(spec, seed)
    runs_dir = Path(runs_dir)
    runs_dir.mkdir(parents=True, exist_ok=True)
    prep = _prepare(spec, dataset)
    stage = Path(tempfile.mkdtemp(prefix=f".{digest[:12]}-", dir=runs_dir))
    try:
        for sub in ("traces", "checkpoints"):
            (stage / sub).mkdir()
        (stage / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")

        windows = make_windows(prep.scaled, spec.window_len, "Close", prep.inputs)
        first_test = prep.raw.dates[prep.n_train]
        is_test = windows.target_dates >= first_test
        train_ws = windows.subset(np.nonzero(~is_test)[0])
        test_ws = windows.subset(np.nonzero(is_test)[0])

        close_scaled = prep.scaled["Close"]
        base = baseline_trace(prep.raw.dates[prep.n_train - 1 :], close_scaled[prep.n_train - 1 :])
        prev_and_test = close_scaled[prep.n_train - 1 :]

        def to_price(v):
            return inverse_transform(prep.scaler, "Close", v)

        results: dict[str, ModelResult] = {}
        traces: dict[str, ForecastTrace] = {}

        def record(label, trace, artifacts):
            path = f"traces/{label}.csv"
            write_trace_csv(trace, stage / path)
            write_trace_csv(trace.mapped(to_price), stage / f"traces/{label}.price.csv")
            artifacts = dict(artifacts, trace=path, price_trace=f"traces/{label}.price.csv")
            roi_mean = roi_report(trace).mean if trace.roi is not None else None
            results[label] = ModelResult("ok", metrics(trace), roi_mean, "", artifacts)
            traces[label] = trace

        for model in spec.models:
            if progress is not None:
                progress(model)
            try:
                if model == BASELINE:
                    trace, artifacts = base, {}
                elif model == "GBT":
                    trace, artifacts = _train_gbt(spec, prep, seed, stage)
                else:
                    trace, artifacts = _train_network(model, spec, prep, seed, train_ws, test_ws, stage)
            except (TrainingError, FloatingPointError) as exc:
                logger.warning("%s failed: %s", model, exc)
                results[model] = ModelResult("failed", error=str(exc))
                if spec.ensemble and model != BASELINE:
                    results[f"{model}+Baseline"] = ModelResult("failed", error=str(exc))
                continue
            record(model, trace, artifacts)
            if spec.ensemble and model != BASELINE:
                ens = ensemble_with_baseline(trace, prev_and_test, spec.ensemble_mode, to_price=to_price)
                record(ens.model, ens, {})

        rec = RunRecord(
            spec=spec,
            seed=seed,
            digest=digest,
            results=results,
            results_digest=_hash_results(results, traces),
            data_start=str(prep.raw.dates[0]),
            data_end=str(prep.raw.dates[-1]),
            n_train=prep.n_train,
            n_test=prep.raw.num_rows - prep.n_train,
        )
        final = runs_dir / digest
        rec.run_dir = str(final)
        rec.wall_clock = time.perf_counter() - t0
        (stage / "record.json").write_text(json.dumps(rec.to_dict(), indent=2) + "\n")
        (stage / "report.txt").write_text(emit_report([rec], "table"))
        try:
            os.replace(stage, final)
        except OSError:
            if not final.is_dir():
                raise
            logger.info("run %s already on disk; keeping the existing directory", digest[:12])
    finally:
        if stage.exists():
            shutil.rmtree(stage, ignore_errors=True)
    return rec


def _run_one(args):
    spec, dataset, seed, runs_dir = args
    return run_experiment(spec, dataset, seed, runs_dir)


def run_seeds(spec, dataset, seeds, runs_dir="runs", workers=None) -> list[RunRecord]:
    """Independent runs for several seeds, in parallel worker processes.

    Results do not depend on ``workers``; each run is single-threaded and
    writes only to its own directory.
    """
    seeds = [int(s) for s in seeds]
    workers = workers or min(len(seeds), os.cpu_count() or 1)
    jobs = [(spec, dataset, s, runs_dir) for s in seeds]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


# --- comparison and reports -----------------------------------------------------


def compare_to_baseline(record: RunRecord) -> dict[str, float]:
    """Relative DA change of every model against the baseline, in percent."""
    base = record.results.get(BASELINE)
    if base is None or base.metrics is None:
        raise ValidationError("record has no baseline result")
    da0 = base.metrics.da
    out = {}
    for label, r in record.results.items():
        if label == BASELINE or r.metrics is None:
            continue
        out[label] = (r.metrics.da - da0) / da0 * 100.0 if da0 > 0 else math.nan
    if not out:
        raise ValidationError("record has no model besides the baseline")
    return out


_COLUMNS = ("MAE", "MSE", "RMSE", "DA")


def _best_flags(record: RunRecord) -> dict[str, set]:
    ok = {k: r.metrics for k, r in record.results.items() if r.metrics is not None}
    flags = {}
    for col in _COLUMNS:
        vals = {k: m.as_row()[col] for k, m in ok.items()}
        if not vals:
            flags[col] = set()
            continue
        target = max(vals.values()) if col == "DA" else min(vals.values())
        flags[col] = {k for k, v in vals.items() if v == target}
    return flags


def _table(record: RunRecord) -> str:
    flags = _best_flags(record)
    width = max([len("Model")] + [len(k) for k in record.results]) + 2
    lines = [
        f"Experiment {record.spec.id}: {record.spec.name}",
        f"seed {record.seed}, data {record.data_start}..{record.data_end}, "
        f"{record.n_train} train / {record.n_test} test rows, digest {record.digest[:12]}",
        "Model".ljust(width) + "".join(c.rjust(13) for c in _COLUMNS),
    ]
    for label, r in record.results.items():
        if r.metrics is None:
            lines.append(label.ljust(width) + "FAILED".rjust(13))
            continue
        row = r.metrics.as_row()
        cells = [f"{row[c]:.6f}{'*' if label in flags[c] else ' '}".rjust(13) for c in _COLUMNS]
        lines.append(label.ljust(width) + "".join(cells))
    lines.append("* best in column")
    if BASELINE in record.results and len(record.results) > 1:
        try:
            gains = compare_to_baseline(record)
        except ValidationError:
            gains = {}
        for label, pct in gains.items():
            lines.append(f"  DA vs Baseline, {label}: {pct:+.2f}%")
    for label, da in record.spec.reference.items():
        if label != BASELINE and BASELINE in record.spec.reference:
            base = record.spec.reference[BASELINE]
            pct = (da - base) / base * 100.0
            lines.append(
                f"  published reference: {label} DA {da:.4f} vs Baseline {base:.4f} ({pct:+.2f}% computed)"
            )
    return "\n".join(lines)


_CSV_FIELDS = (
    "experiment",
    "seed",
    "digest",
    "model",
    "status",
    "mae",
    "mse",
    "rmse",
    "da",
    "n",
    "roi_mean",
    "best",
)


def emit_report(records, fmt: str = "table", path=None) -> str:
    """Tables with one row per model and MAE/MSE/RMSE/DA columns.

    ``fmt`` is ``"table"`` (plain text, best value per column starred) or
    ``"csv"``. Written to ``path`` when given; the text is returned either way.
    """
    records = list(records)
    if not records:
        raise ValidationError("no records to report")
    if fmt == "table":
        text = "\n\n".join(_table(r) for r in records) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_CSV_FIELDS)
        for rec in records:
            flags = _best_flags(rec)
            for label, r in rec.results.items():
                best = ";".join(c for c in _COLUMNS if label in flags[c])
                if r.metrics is None:
                    w.writerow([rec.spec.id, rec.seed, rec.digest, label, "FAILED", "", "", "", "", "", "", ""])
                    continue
                m = r.metrics
                w.writerow(
                    [
                        rec.spec.id,
                        rec.seed,
                        rec.digest,
                        label,
                        "ok",
                        repr(m.mae),
                        repr(m.mse),
                        repr(m.rmse),
                        repr(m.da),
                        m.n,
                        "" if r.roi_mean is None else repr(r.roi_mean),
                        best,
                    ]
                )
        text = buf.getvalue()
    else:
        raise ValidationError("format must be 'table' or 'csv'")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_report_csv(path_or_text) -> dict[tuple, dict[str, MetricsReport | None]]:
    """Parse a CSV report into ``{(experiment, seed, digest): {model: MetricsReport or None}}``."""
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text(encoding="utf-8")
    out: dict = {}
    for row in csv.DictReader(io.StringIO(text)):
        key = (int(row["experiment"]), int(row["seed"]), row["digest"])
        if row["status"] == "FAILED":
            m = None
        else:
            m = MetricsReport(float(row["mae"]), float(row["mse"]), float(row["rmse"]), float(row["da"]), int(row["n"]))
        out.setdefault(key, {})[row["model"]] = m
    return out


def with_overrides(spec: ExperimentSpec, models=None, epochs=None) -> ExperimentSpec:
    changes = {}
    if models is not None:
        changes["models"] = tuple(models)
    if epochs is not None:
        changes["epochs"] = int(epochs)
    return replace(spec, **changes) if changes else spec
