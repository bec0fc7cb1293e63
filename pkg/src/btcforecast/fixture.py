"""Synthetic daily snapshot shaped like the published feature table.

The real snapshot (exchange candles, on-chain statistics, search interest,
sentiment index, gold price) is third-party data and is not redistributed.
This module generates a stand-in with the same names, the same per-series
sample counts and the same date structure:

* exchange series (Close/Open/High/Low/Volume): 4379 consecutive days;
* the seven auxiliary series: 3812 days, all inside the exchange range;
* aligned table: 3812 rows, 3783 once the 30-day moving average is added;
* last day 2022-11-06, so a 90-day test split covers 2022-08-09..2022-11-06.

Prices follow a fat-tailed GARCH(1,1) log random walk bent through a few
historical price levels (a piecewise-linear log drift). Candles are built
the usual way: open is the previous close with a 0.1% jitter, high and low
wrap the open/close with a volatility-scaled excursion. Every
auxiliary series is a causal function of the price path plus its own
noise. Nothing here is tuned to make any model look good: apart from the
slow anchor drift and volatility clustering, the close is unpredictable
from its past.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .data_ingest import RAW_SERIES, RawSeries, write_series_csv

SEED = 20221106
END_DATE = np.datetime64("2022-11-06")
EXCHANGE_DAYS = 4379
AUX_DAYS = 3812

# Rough historical levels (date, USD) used as bridge points for the walk.
_ANCHORS = [
    ("2010-11-11", 0.30),
    ("2011-06-08", 25.0),
    ("2011-11-18", 2.5),
    ("2013-04-09", 200.0),
    ("2013-07-05", 70.0),
    ("2013-12-04", 1100.0),
    ("2015-01-14", 180.0),
    ("2017-12-16", 19000.0),
    ("2018-12-15", 3300.0),
    ("2019-06-26", 12000.0),
    ("2020-03-12", 5000.0),
    ("2021-04-13", 63000.0),
    ("2021-07-20", 30000.0),
    ("2021-11-09", 67000.0),
    ("2022-06-18", 19000.0),
    ("2022-08-14", 24300.0),
    ("2022-11-06", 20900.0),
]

_FORMATS = {
    "Close": "{:.6f}",
    "Open": "{:.6f}",
    "High": "{:.6f}",
    "Low": "{:.6f}",
    "Volume": "{:.4f}",
    "Trans_Volume": "{:.2f}",
    "Trade_Volume": "{:.2f}",
    "Hash_Rate": "{:.4f}",
    "Trans_Fees": "{:.6f}",
    "XAU_USD": "{:.2f}",
    "Google_Trend": "{:.0f}",
    "Fear_Greed": "{:.0f}",
}


def fixture_dir() -> Path:
    return Path(resources.files("btcforecast") / "data" / "paper_fixture")


def fixture_manifest_path() -> Path:
    return fixture_dir() / "manifest.json"


def _garch_returns(rng, n, mu=0.0, omega=2.5e-5, a=0.10, b=0.88, dof=4.0):
    var = omega / (1 - a - b)
    shocks = rng.standard_t(dof, size=n) / np.sqrt(dof / (dof - 2))
    r = np.empty(n)
    sig = np.empty(n)
    eps_prev = 0.0
    for t in range(n):
        var = omega + a * eps_prev**2 + b * var
        sig[t] = np.sqrt(var)
        eps_prev = sig[t] * shocks[t]
        r[t] = mu + eps_prev
    return r, sig


def _ema(x, span):
    alpha = 2.0 / (span + 1.0)
    out = np.empty_like(x)
    acc = x[0]
    for i, v in enumerate(x):
        acc = alpha * v + (1 - alpha) * acc
        out[i] = acc
    return out


def generate_series(seed: int = SEED) -> list[RawSeries]:
    """Build the twelve raw series (moving average is derived at load time)."""
    rng = np.random.default_rng(seed)
    n = EXCHANGE_DAYS
    dates = END_DATE - np.arange(n - 1, -1, -1).astype("timedelta64[D]")

    r, sig = _garch_returns(rng, n)
    logp = np.log(_ANCHORS[0][1]) + np.cumsum(r)
    # Bend the walk through a handful of historical price levels.
    idx = np.array([(np.datetime64(d) - dates[0]).astype(int) for d, _ in _ANCHORS])
    idx = np.clip(idx, 0, n - 1)
    target = np.log([p for _, p in _ANCHORS])
    logp += np.interp(np.arange(n), idx, target - logp[idx])
    close = np.exp(logp)
    ret = np.diff(logp, prepend=logp[0])

    open_ = np.empty(n)
    open_[0] = close[0]
    open_[1:] = close[:-1] * np.exp(rng.normal(0.0, 0.001, n - 1))
    body_hi = np.maximum(open_, close)
    body_lo = np.minimum(open_, close)
    high = body_hi * np.exp(np.abs(rng.normal(0.0, 0.6, n)) * sig)
    low = body_lo * np.exp(-np.abs(rng.normal(0.0, 0.6, n)) * sig)

    activity = np.abs(ret) / sig
    t = np.arange(n) / n
    volume = np.exp(8.0 + 0.35 * activity + rng.normal(0.0, 0.35, n) - 1.5 * t)

    aux = slice(n - AUX_DAYS, n)
    m = AUX_DAYS
    ta = np.linspace(0.0, 1.0, m)
    px = close[aux]

    onchain_btc = np.exp(12.0 + 0.6 * ta + 0.2 * activity[aux] + rng.normal(0.0, 0.25, m))
    trans_volume = px * onchain_btc
    trade_volume = px * volume[aux] * np.exp(0.8 + rng.normal(0.0, 0.3, m))
    hash_rate = np.exp(np.log(5e3) + 11.5 * ta + np.cumsum(rng.normal(0.0, 0.01, m)) + rng.normal(0.0, 0.04, m))
    fee_btc = np.exp(-9.0 + 0.5 * activity[aux] + rng.normal(0.0, 0.4, m))
    trans_fees = px * fee_btc
    xau = 1560.0 * np.exp(np.cumsum(rng.normal(0.00005, 0.009, m)))

    interest = _ema(np.log(px), 20) + 0.8 * _ema(activity[aux], 7) + rng.normal(0.0, 0.08, m)
    interest = np.exp(interest - interest.max())
    google = np.rint(100.0 * interest)

    mom = np.convolve(ret, np.ones(14), mode="full")[: n][aux]
    fg = 100.0 / (1.0 + np.exp(-mom / (np.sqrt(14.0) * np.median(sig)))) + rng.normal(0.0, 6.0, m)
    fear_greed = np.clip(np.rint(fg), 0.0, 100.0)

    exch = {"Close": close, "Open": open_, "High": high, "Low": low, "Volume": volume}
    auxd = {
        "Trans_Volume": trans_volume,
        "Hash_Rate": hash_rate,
        "Trans_Fees": trans_fees,
        "XAU_USD": xau,
        "Trade_Volume": trade_volume,
        "Google_Trend": google,
        "Fear_Greed": fear_greed,
    }
    out = []
    for name in RAW_SERIES:
        if name in exch:
            out.append(RawSeries(name, dates, exch[name]))
        else:
            out.append(RawSeries(name, dates[aux], auxd[name]))
    return out


def write_fixture(out_dir, seed: int = SEED) -> Path:
    """Write the CSV snapshot plus ``manifest.json``; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for s in generate_series(seed):
        fname = f"{s.name}.csv"
        write_series_csv(s, out_dir / fname, _FORMATS[s.name])
        files[s.name] = fname
    manifest = {
        "description": "synthetic snapshot, see btcforecast.fixture",
        "seed": seed,
        "series": files,
        "moving_average": {"name": "Moving_Avg_30", "source": "Close", "window": 30},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


if __name__ == "__main__":  # pragma: no cover
    print(write_fixture(fixture_dir()))
