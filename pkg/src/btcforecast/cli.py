"""Command-line entry point: ``btcforecast <command> ...``.

Exit codes: 0 success, 1 a requested model failed to train, 2 invalid
input or arguments, 3 network or payload failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .data_ingest import DATA_ROOT_ENV, default_manifest_path, fetch_ohlc, load_manifest, write_dataset_csv
from .errors import DecodeError, FetchError, ValidationError
from .experiments import builtin_experiment, emit_report, load_records, load_spec, run_experiment, with_overrides
from .preprocess import SplitSpec, split
from .vmd import VmdConfig, decompose, decompose_causal, plot_modes, write_modes_csv

EXIT_OK = 0
EXIT_MODEL_FAILED = 1
EXIT_INVALID = 2
EXIT_FETCH = 3

log = logging.getLogger("btcforecast")


def _manifest(args) -> Path:
    return Path(args.manifest) if args.manifest else default_manifest_path()


def cmd_ingest(args) -> int:
    ds = load_manifest(_manifest(args))
    print(f"{ds.num_rows} rows, {ds.dates[0]} .. {ds.dates[-1]}")
    for name in ds.feature_names:
        col = ds[name]
        print(f"  {name:<16} min {col.min():.6g}  max {col.max():.6g}")
    if args.out:
        write_dataset_csv(ds, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_fetch(args) -> int:
    out_dir = args.out_dir or os.environ.get(DATA_ROOT_ENV) or "."
    series = fetch_ohlc(args.endpoint, args.pair, interval=args.interval, out_dir=out_dir, timeout=args.timeout)
    days = series[0].dates
    print(f"{len(days)} candles {days[0]} .. {days[-1]} -> {out_dir}")
    return EXIT_OK


def cmd_decompose(args) -> int:
    ds = load_manifest(_manifest(args))
    close = ds[args.series]
    cfg = VmdConfig(K=args.k, alpha=args.alpha, tau=args.tau, max_iter=args.max_iter)
    if args.causal:
        train, _ = split(ds, SplitSpec(args.test_days))
        modes = decompose_causal(close, train.num_rows, cfg)
        print(f"causal decomposition: {train.num_rows} training rows, {args.test_days} rolled days")
        result = None
    else:
        result = decompose(close, cfg)
        modes = result.modes
        state = "converged" if result.converged else "hit max_iter"
        print(f"{result.iterations} iterations ({state}), residual {result.final_residual:.3g}")
        print("center frequencies (cycles/day): " + " ".join(f"{w:.5f}" for w in result.omegas))
    write_modes_csv(args.out, ds.dates, modes)
    print(f"wrote {args.out}")
    if args.plot:
        if result is None:
            raise ValidationError("--plot needs a non-causal decomposition")
        plot_modes(args.plot, ds.dates, result, signal=close)
        print(f"wrote {args.plot}")
    return EXIT_OK


def cmd_run(args) -> int:
    spec = load_spec(args.spec) if args.spec else builtin_experiment(args.experiment)
    models = [m.strip() for m in args.models.split(",")] if args.models else None
    spec = with_overrides(spec, models=models, epochs=args.epochs)
    ds = load_manifest(_manifest(args))
    rec = run_experiment(spec, ds, args.seed, args.runs_dir, progress=lambda m: log.info("training %s", m))
    print(emit_report([rec], "table"), end="")
    print(f"run directory: {rec.run_dir}")
    return EXIT_MODEL_FAILED if rec.failed else EXIT_OK


def cmd_report(args) -> int:
    records = load_records(args.runs)
    if not records:
        raise ValidationError(f"no runs under {args.runs}")
    text = emit_report(records, args.format, args.out)
    if not args.out:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="btcforecast", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def with_manifest(sp):
        sp.add_argument(
            "--manifest",
            help=f"dataset manifest (default: ${DATA_ROOT_ENV}/manifest.json, else the bundled snapshot)",
        )

    sp = sub.add_parser("ingest", help="load and align the series named in a manifest")
    with_manifest(sp)
    sp.add_argument("--out", help="write the aligned table as CSV")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("fetch", help="download daily OHLC candles into CSV snapshots")
    sp.add_argument("--endpoint", required=True, help="OHLC endpoint URL")
    sp.add_argument("--pair", required=True, help="pair code, e.g. XBTUSD")
    sp.add_argument("--interval", type=int, default=1440, help="candle length in minutes")
    sp.add_argument("--out-dir", help=f"snapshot directory (default: ${DATA_ROOT_ENV} or .)")
    sp.add_argument("--timeout", type=float, default=30.0)
    sp.set_defaults(func=cmd_fetch)

    sp = sub.add_parser("decompose", help="split the close series into band-limited modes")
    with_manifest(sp)
    sp.add_argument("--k", type=int, default=11, help="number of modes")
    sp.add_argument("--alpha", type=float, default=5000.0, help="bandwidth penalty")
    sp.add_argument("--tau", type=float, default=0.0, help="dual ascent step")
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--series", default="Close")
    sp.add_argument("--causal", action="store_true", help="recompute modes per test day from past data only")
    sp.add_argument("--test-days", type=int, default=90)
    sp.add_argument("--out", default="modes.csv")
    sp.add_argument("--plot", help="also save a PNG of the modes (needs matplotlib)")
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("run", help="run a built-in or custom experiment")
    with_manifest(sp)
    which = sp.add_mutually_exclusive_group(required=True)
    which.add_argument("--experiment", type=int, choices=range(1, 11), metavar="{1..10}")
    which.add_argument("--spec", help="JSON experiment file")
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--models", help="comma-separated subset, e.g. GRU,GBT")
    sp.add_argument("--epochs", type=int, help="override the network epoch count")
    sp.add_argument("--runs-dir", default="runs")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("report", help="tabulate stored runs")
    sp.add_argument("--runs", default="runs", help="directory holding run directories")
    sp.add_argument("--format", choices=("csv", "table"), default="table")
    sp.add_argument("--out", help="write to a file instead of stdout")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (FetchError, DecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FETCH
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
