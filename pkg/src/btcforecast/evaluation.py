"""Backtesting traces, error and direction metrics, ROI and baseline ensembling."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .preprocess import WindowedSet

ENSEMBLE_MODES = ("price", "log_return")


@dataclass(frozen=True, eq=False)
class ForecastTrace:
    """Actual and predicted values aligned on target dates."""

    dates: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray
    model: str
    roi: np.ndarray | None = None

    def __post_init__(self):
        d = np.asarray(self.dates, dtype="datetime64[D]")
        x = np.asarray(self.actual, dtype=np.float64)
        y = np.asarray(self.predicted, dtype=np.float64)
        if x.ndim != 1 or x.shape != y.shape or d.shape != x.shape:
            raise ValidationError("dates, actual and predicted must be equal-length vectors")
        if x.size < 2:
            raise ValidationError("a trace needs at least two points")
        if np.any(d[1:] <= d[:-1]):
            raise ValidationError("trace dates must be strictly increasing")
        if self.roi is not None and np.shape(self.roi) != x.shape:
            raise ValidationError("roi must have one entry per point")
        object.__setattr__(self, "dates", d)
        object.__setattr__(self, "actual", x)
        object.__setattr__(self, "predicted", y)
        if self.roi is not None:
            object.__setattr__(self, "roi", np.asarray(self.roi, dtype=np.float64))

    def __len__(self):
        return self.actual.size

    def mapped(self, fn, model: str | None = None) -> ForecastTrace:
        """Same trace with ``fn`` applied to both value vectors."""
        return ForecastTrace(self.dates, fn(self.actual), fn(self.predicted), model or self.model, self.roi)


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    mse: float
    rmse: float
    da: float
    n: int

    def as_row(self) -> dict:
        return {"MAE": self.mae, "MSE": self.mse, "RMSE": self.rmse, "DA": self.da}


@dataclass(frozen=True, eq=False)
class RoiReport:
    per_step: np.ndarray
    mean: float
    ivi: str = "baseline prediction (actual at t-1)"
    fvi: str = "ensemble prediction at t"


def baseline_forecast(actual) -> np.ndarray:
    """Persistence forecast: the value at t-1 predicts t, for t = 2..n."""
    x = np.asarray(actual, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("baseline needs a vector of at least two values")
    return x[:-1].copy()


def baseline_trace(dates, actual, model: str = "Baseline") -> ForecastTrace:
    """Trace for the persistence forecast over ``actual[1:]``."""
    x = np.asarray(actual, dtype=np.float64)
    return ForecastTrace(np.asarray(dates)[1:], x[1:], baseline_forecast(x), model)


def rolling_forecast(model, test: WindowedSet, label: str | None = None) -> ForecastTrace:
    """One prediction per test window.

    The windows already hold observed history only, so every step can be
    predicted in one batch. ``model`` needs a ``predict(inputs)`` method or
    must itself be callable.
    """
    if len(test) == 0:
        raise ValidationError("empty test set")
    predict = getattr(model, "predict", model)
    pred = np.asarray(predict(test.inputs), dtype=np.float64).reshape(-1)
    if pred.size != len(test):
        raise ValidationError(f"model returned {pred.size} predictions for {len(test)} windows")
    if label is None:
        spec = getattr(model, "spec", None)
        label = getattr(spec, "architecture", type(model).__name__)
    return ForecastTrace(test.target_dates, test.targets, pred, label)


def directional_hits(actual, predicted) -> np.ndarray:
    """Boolean hit per step t = 2..n; a zero product (a flat move) counts as a hit."""
    x = np.asarray(actual, dtype=np.float64)
    y = np.asarray(predicted, dtype=np.float64)
    return np.diff(x) * np.diff(y) >= 0.0


def metrics(trace: ForecastTrace) -> MetricsReport:
    x, y = trace.actual, trace.predicted
    n = x.size
    if n < 2:
        raise ValidationError("directional accuracy needs at least two points")
    err = y - x
    mse = float(np.mean(err * err))
    return MetricsReport(
        mae=float(np.mean(np.abs(err))),
        mse=mse,
        rmse=float(np.sqrt(mse)),
        da=float(np.mean(directional_hits(x, y))),
        n=n,
    )


def roi(fvi: float, ivi: float) -> float:
    """Percentage return from an initial value ``ivi`` to a final value ``fvi``."""
    if not ivi > 0:
        raise ValidationError("initial value must be positive")
    return (fvi - ivi) / ivi * 100.0


def _roi_vector(fvi, ivi):
    out = np.full(np.shape(fvi), np.nan)
    ok = ivi > 0
    out[ok] = (fvi[ok] - ivi[ok]) / ivi[ok] * 100.0
    return out


def ensemble_with_baseline(
    trace: ForecastTrace,
    actual,
    mode: str = "price",
    to_price=None,
) -> ForecastTrace:
    """Average a model's predictions with the persistence forecast.

    ``actual`` holds the observed values from the day before the first
    trace date through the last, so ``actual[1:]`` must equal
    ``trace.actual``. ``mode='price'`` takes the arithmetic mean of the two
    predictions; ``'log_return'`` averages log returns over the previous
    close, which is the geometric mean. Per-step ROI uses the previous
    actual as initial value and the ensemble prediction as final value,
    after mapping both through ``to_price`` when given. Steps with a
    non-positive initial value get NaN.
    """
    if mode not in ENSEMBLE_MODES:
        raise ValidationError(f"mode must be one of {ENSEMBLE_MODES}")
    a = np.asarray(actual, dtype=np.float64)
    if a.shape != (len(trace) + 1,) or not np.array_equal(a[1:], trace.actual):
        raise ValidationError("actual must be the trace's actual values preceded by the previous day")
    prev = a[:-1]
    if mode == "price":
        ens = (trace.predicted + prev) / 2.0
    else:
        if np.any(prev <= 0) or np.any(trace.predicted <= 0):
            raise ValidationError("log-return averaging needs positive values")
        ens = np.sqrt(trace.predicted * prev)
    if to_price is None:
        ivi, fvi = prev, ens
    else:
        ivi, fvi = to_price(prev), to_price(ens)
    return ForecastTrace(trace.dates, trace.actual, ens, f"{trace.model}+Baseline", _roi_vector(fvi, ivi))


def roi_report(trace: ForecastTrace) -> RoiReport:
    if trace.roi is None:
        raise ValidationError("trace carries no ROI")
    steps = trace.roi
    mean = float(np.nanmean(steps)) if np.any(np.isfinite(steps)) else float("nan")
    return RoiReport(steps.copy(), mean)


def write_trace_csv(trace: ForecastTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["date", "actual", "predicted", "model"]
        if trace.roi is not None:
            header.append("roi")
        w.writerow(header)
        for i in range(len(trace)):
            row = [str(trace.dates[i]), repr(float(trace.actual[i])), repr(float(trace.predicted[i])), trace.model]
            if trace.roi is not None:
                row.append(repr(float(trace.roi[i])))
            w.writerow(row)


def read_trace_csv(path) -> ForecastTrace:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty trace file")
    roi_col = [float(r["roi"]) for r in rows] if "roi" in rows[0] else None
    return ForecastTrace(
        np.array([r["date"] for r in rows], dtype="datetime64[D]"),
        np.array([float(r["actual"]) for r in rows]),
        np.array([float(r["predicted"]) for r in rows]),
        rows[0]["model"],
        roi_col,
    )
