"""Train a small recurrent network on scaled windows of the close price.

A full run uses 90 hidden units and 500 epochs; this keeps things short.
"""

import numpy as np

from btcforecast.data_ingest import default_manifest_path, load_manifest
from btcforecast.evaluation import metrics, rolling_forecast
from btcforecast.neural import NetworkSpec, grad_check, train
from btcforecast.preprocess import SplitSpec, fit_scaler, make_windows, split, transform

ds = load_manifest(default_manifest_path())
train_part, _ = split(ds, SplitSpec(test_days=90))
scaled = transform(fit_scaler(train_part), ds)  # bounds from training rows only

windows = make_windows(scaled, 25, "Close", ["Open", "High", "Low"])
is_test = windows.target_dates >= ds.dates[train_part.num_rows]
train_ws = windows.subset(np.nonzero(~is_test)[0])
test_ws = windows.subset(np.nonzero(is_test)[0])
print(f"{len(train_ws)} training windows, {len(test_ws)} test windows")

# Backpropagation through time agrees with finite differences.
tiny = train_ws.subset(np.arange(3))
print("GRU gradient check, worst relative error:", f"{grad_check(NetworkSpec('GRU', hidden=3), tiny):.1e}")

spec = NetworkSpec("LSTM", hidden=16, epochs=5)
model = train(spec, train_ws, progress=lambda e, loss: print(f"  epoch {e}: mse {loss:.5f}"))
m = metrics(rolling_forecast(model, test_ws))
print(f"LSTM on the 90 test days: RMSE {m.rmse:.4f}, DA {m.da:.3f}")
