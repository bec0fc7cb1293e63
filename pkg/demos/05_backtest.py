"""Score forecasts: the persistence baseline, metrics, averaging and ROI."""

import numpy as np

from btcforecast.data_ingest import default_manifest_path, load_manifest
from btcforecast.evaluation import (
    ForecastTrace,
    baseline_trace,
    ensemble_with_baseline,
    metrics,
    roi_report,
)

ds = load_manifest(default_manifest_path())
close = ds["Close"][-91:]  # the day before the test window, then 90 test days
dates = ds.dates[-91:]

base = baseline_trace(dates, close)
print("persistence baseline:", metrics(base))

# A deliberately noisy forecaster: tomorrow's true close plus 3% noise.
rng = np.random.default_rng(0)
noisy = ForecastTrace(base.dates, base.actual, base.actual * (1 + 0.03 * rng.normal(size=90)), "Noisy")
print("noisy forecaster:    ", metrics(noisy))

# Averaging with the baseline halves the noise and keeps its direction signal.
ens = ensemble_with_baseline(noisy, close)
print("noisy + baseline:    ", metrics(ens))
print(f"mean one-day ROI of the averaged forecast: {roi_report(ens).mean:+.3f}%")
