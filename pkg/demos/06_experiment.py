"""Run a built-in experiment end to end and print its report.

Epochs are cut to 3 so this finishes in about a minute; drop the override
for the full 500-epoch run. Results land in ./runs/<digest>/.
"""

from btcforecast.data_ingest import default_manifest_path, load_manifest
from btcforecast.experiments import builtin_experiment, compare_to_baseline, emit_report, run_experiment, with_overrides

ds = load_manifest(default_manifest_path())
spec = with_overrides(builtin_experiment(9), models=["GRU", "GBT"], epochs=3)
record = run_experiment(spec, ds, seed=42, runs_dir="runs", progress=lambda m: print("training", m))
print(emit_report([record]))
print({k: round(v, 2) for k, v in compare_to_baseline(record).items()})
print("artifacts in", record.run_dir)
