"""Load the bundled daily snapshot and look at the aligned table.

The snapshot ships with the package. Point BTCFORECAST_DATA at a directory
holding your own manifest.json to use real data instead.
"""

from btcforecast.data_ingest import default_manifest_path, load_manifest, moving_average

ds = load_manifest(default_manifest_path())
print(f"{ds.num_rows} aligned days from {ds.dates[0]} to {ds.dates[-1]}")
print("series:", ", ".join(ds.feature_names))

# The 30-day moving average is derived from Close during loading, which is
# why the table starts 29 days after the raw series do.
close = ds["Close"]
print("last close", close[-1], "| 30-day mean of the last month", moving_average(close[-30:], 30)[0])
print("stored Moving_Avg_30 on the last day", ds["Moving_Avg_30"][-1])
