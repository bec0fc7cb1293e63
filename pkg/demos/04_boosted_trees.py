"""Gradient-boosted trees: feature ranking and a next-day forecast."""

import numpy as np

from btcforecast.data_ingest import default_manifest_path, load_manifest
from btcforecast.experiments import rank_features
from btcforecast.gbt import GbtConfig, gbt_train
from btcforecast.preprocess import make_tabular

ds = load_manifest(default_manifest_path())

# Which series explain the same day's close? Ranked by total split gain.
imp = rank_features(ds)
for name, i in zip(imp.ranked_names()[:6], imp.rank[:6]):
    print(f"  {name:<14} gain {imp.gain[i]:12.4g}  splits {imp.count[i]}")

# Next-day forecast from today's Open/High/Low, holding out the last 90 days.
X, y, dates = make_tabular(ds, "Close", ["Open", "High", "Low"], horizon=1)
fit, hold = slice(0, -180), slice(-180, -90)
booster = gbt_train(GbtConfig(), X[fit], y[fit], valid=(X[hold], y[hold]))
pred = booster.predict(X[-90:])
print(f"\n{len(booster.trees)} trees kept after early stopping")
print(f"mean absolute error over the last 90 days: {np.mean(np.abs(pred - y[-90:])):.2f} USD")
