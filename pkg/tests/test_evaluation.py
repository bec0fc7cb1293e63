import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from oracles import naive_metrics

from btcforecast.errors import ValidationError
from btcforecast.evaluation import (
    ForecastTrace,
    baseline_forecast,
    baseline_trace,
    directional_hits,
    ensemble_with_baseline,
    metrics,
    read_trace_csv,
    roi,
    roi_report,
    rolling_forecast,
    write_trace_csv,
)
from btcforecast.preprocess import WindowedSet


def trace(actual, predicted, model="M"):
    n = len(actual)
    return ForecastTrace(np.datetime64("2022-01-01") + np.arange(n), actual, predicted, model)


def test_baseline_examples():
    assert baseline_forecast([5, 7, 9]).tolist() == [5.0, 7.0]
    m = metrics(baseline_trace(np.datetime64("2022-01-01") + np.arange(4), [3.0] * 4))
    assert (m.mse, m.da) == (0.0, 1.0)
    m = metrics(baseline_trace(np.datetime64("2022-01-01") + np.arange(4), [1.0, 2.0, 1.0, 2.0]))
    assert m.da == 0.0
    with pytest.raises(ValidationError):
        baseline_forecast([1.0])


def test_metric_examples():
    m = metrics(trace([0.2, 0.5, 0.9], [0.2, 0.5, 0.9]))
    assert (m.mae, m.mse, m.rmse, m.da) == (0.0, 0.0, 0.0, 1.0)
    m = metrics(trace([0.0, 0.0], [1.0, 1.0]))
    assert (m.mae, m.mse, m.rmse, m.da) == (1.0, 1.0, 1.0, 1.0)
    m = metrics(trace([1.0, 2.0, 1.0], [1.0, 1.5, 2.0]))
    assert m.da == 0.5
    assert m.mae == pytest.approx(0.5)
    assert m.mse == pytest.approx(1.25 / 3)
    assert m.rmse == pytest.approx(math.sqrt(1.25 / 3))
    assert m.n == 3


def test_short_trace_rejected():
    with pytest.raises(ValidationError):
        trace([1.0], [1.0])
    with pytest.raises(ValidationError):
        ForecastTrace(np.array(["2022-01-02", "2022-01-01"], dtype="datetime64[D]"), [1, 2], [1, 2], "M")


def test_metrics_match_naive_oracle():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        x, y = rng.normal(size=n), rng.normal(size=n)
        if rng.random() < 0.2:  # exercise flat moves
            x = np.round(x)
            y = np.round(y)
        got = metrics(trace(x, y))
        want = naive_metrics(x.tolist(), y.tolist())
        for g, w in zip((got.mae, got.mse, got.rmse, got.da), want):
            assert abs(g - w) <= 1e-12 * max(1.0, abs(w))


# Magnitudes below 1e-150 would underflow once squared.
finite = st.floats(-1e3, 1e3, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-150)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 30).flatmap(lambda n: st.tuples(*[hnp.arrays(float, n, elements=finite)] * 2)))
def test_metric_invariants(pair):
    x, y = pair
    m = metrics(trace(x, y))
    assert m.mae <= m.rmse * (1 + 1e-12) + 1e-300
    assert m.rmse == math.sqrt(m.mse)
    assert 0.0 <= m.da <= 1.0
    t = trace(x, y).mapped(lambda v: 2.0 * v)  # exact in floating point
    assert metrics(t).da == m.da


def test_da_invariant_under_exp():
    # A strictly increasing map applied to both series keeps every sign product.
    rng = np.random.default_rng(5)
    for _ in range(200):
        x, y = rng.normal(size=20), rng.normal(size=20)
        assert np.array_equal(directional_hits(np.exp(x), np.exp(y)), directional_hits(x, y))


def test_roi_examples():
    assert roi(150, 100) == 50.0
    assert roi(100, 100) == 0.0
    assert roi(90, 100) == -10.0
    with pytest.raises(ValidationError):
        roi(10, 0)


def test_ensemble_examples():
    actual = np.array([1.0, 2.0, 4.0, 3.0])
    base = trace(actual[1:], actual[:-1])
    ens = ensemble_with_baseline(base, actual)
    assert np.array_equal(ens.predicted, actual[:-1])
    assert ens.model == "M+Baseline"

    perfect = ensemble_with_baseline(trace(actual[1:], actual[1:]), actual)
    assert perfect.predicted.tolist() == [1.5, 3.0, 3.5]
    assert perfect.roi.tolist() == [50.0, 50.0, -12.5]
    assert roi_report(perfect).mean == pytest.approx(87.5 / 3)

    with pytest.raises(ValidationError):
        ensemble_with_baseline(base, actual[1:])
    with pytest.raises(ValidationError):
        ensemble_with_baseline(base, actual + 1)


def test_ensemble_five_point_da():
    actual = np.array([1.0, 3.0, 2.0, 2.5, 4.0, 3.5])
    model = np.array([2.0, 2.5, 3.0, 3.0, 3.0])
    ens = ensemble_with_baseline(trace(actual[1:], model), actual)
    # ensemble = [1.5, 2.75, 2.5, 2.75, 3.5]; actual moves -, +, +, -; ensemble moves +, -, +, +
    assert ens.predicted.tolist() == [1.5, 2.75, 2.5, 2.75, 3.5]
    assert metrics(ens).da == 0.25


def test_ensemble_roi_in_price_space():
    actual = np.array([0.5, 0.6, 0.4])
    ens = ensemble_with_baseline(trace(actual[1:], [0.7, 0.4]), actual, to_price=lambda v: 100.0 * v + 50.0)
    prev_price = 100.0 * actual[:-1] + 50.0
    ens_price = 100.0 * ens.predicted + 50.0
    assert np.allclose(ens.roi, (ens_price - prev_price) / prev_price * 100.0)
    zero = ensemble_with_baseline(trace([0.2, 0.3], [0.2, 0.3]), [0.0, 0.2, 0.3])
    assert math.isnan(zero.roi[0]) and zero.roi[1] > 0


def test_log_return_ensemble_is_geometric_mean():
    actual = np.array([1.0, 4.0, 2.0])
    ens = ensemble_with_baseline(trace(actual[1:], [4.0, 8.0]), actual, mode="log_return")
    assert ens.predicted.tolist() == [2.0, 4.0 * math.sqrt(2.0)]
    with pytest.raises(ValidationError):
        ensemble_with_baseline(trace(actual[1:], [4.0, 8.0]), actual, mode="median")


class _Spec:
    architecture = "GRU"


class _Model:
    spec = _Spec()

    def __init__(self, fn):
        self.fn = fn

    def predict(self, inputs):
        return self.fn(inputs)


def test_rolling_forecast():
    n = 90
    series = np.linspace(0, 1, n + 5)
    ws = WindowedSet(
        np.stack([series[i : i + 5] for i in range(n)])[:, :, None],
        series[5:],
        np.datetime64("2022-08-09") + np.arange(n),
    )
    oracle = rolling_forecast(_Model(lambda x: series[5:].copy()), ws)
    assert len(oracle) == 90 and oracle.model == "GRU"
    assert metrics(oracle).da == 1.0 and metrics(oracle).mse == 0.0
    const = rolling_forecast(lambda x: np.full(x.shape[0], 0.3), ws, "Const")
    assert np.all(const.predicted == 0.3) and const.model == "Const"
    with pytest.raises(ValidationError):
        rolling_forecast(lambda x: np.zeros(3), ws, "Bad")


def test_trace_csv_round_trip(tmp_path):
    actual = np.array([0.1, 0.2, 0.4])
    ens = ensemble_with_baseline(trace(actual[1:], [0.3, 0.3], "GRU"), actual)
    write_trace_csv(ens, tmp_path / "t.csv")
    back = read_trace_csv(tmp_path / "t.csv")
    assert back.model == "GRU+Baseline"
    assert np.array_equal(back.predicted, ens.predicted)
    assert np.array_equal(back.roi, ens.roi)
    assert np.array_equal(back.dates, ens.dates)
