import filecmp
import http.server
import json
import logging
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btcforecast import fixture
from btcforecast.data_ingest import (
    ALL_SERIES,
    DATA_ROOT_ENV,
    RAW_SERIES,
    AlignedDataset,
    RawSeries,
    add_moving_average,
    align,
    default_manifest_path,
    fetch_ohlc,
    load_manifest,
    load_series_csv,
    moving_average,
    parse_ohlc_payload,
    write_dataset_csv,
    write_series_csv,
)
from btcforecast.errors import DecodeError, FetchError, InsufficientDataError, ParseError, ValidationError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# --- CSV loading ----------------------------------------------------------------


def test_load_sorts_rows_and_records_digest(tmp_path):
    p = write(tmp_path / "c.csv", "date,value\n2020-01-03,3\n2020-01-01,1\n2020-01-02,2.5\n")
    s = load_series_csv(p, "Close")
    assert [str(d) for d in s.dates] == ["2020-01-01", "2020-01-02", "2020-01-03"]
    assert s.values.tolist() == [1.0, 2.5, 3.0]
    assert len(s.digest) == 64


def test_bad_header_is_line_one(tmp_path):
    p = write(tmp_path / "c.csv", "day,value\n2020-01-01,1\n")
    with pytest.raises(ParseError) as info:
        load_series_csv(p, "Close")
    assert info.value.line == 1


@pytest.mark.parametrize(
    "body, line",
    [
        ("2020-01-01,1\n2020-13-01,2\n", 3),
        ("2020-01-01,1\n2020-01-02,abc\n", 3),
        ("2020-01-01,1,2\n", 2),
    ],
)
def test_parse_errors_carry_line_numbers(tmp_path, body, line):
    p = write(tmp_path / "c.csv", "date,value\n" + body)
    with pytest.raises(ParseError) as info:
        load_series_csv(p, "Close")
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_duplicate_dates_rejected(tmp_path):
    p = write(tmp_path / "c.csv", "date,value\n2020-01-01,1\n2020-01-01,2\n")
    with pytest.raises(ValidationError, match="duplicate"):
        load_series_csv(p, "Close")


def test_non_finite_value_rejected(tmp_path):
    p = write(tmp_path / "c.csv", "date,value\n2020-01-01,nan\n")
    with pytest.raises(ValidationError):
        load_series_csv(p, "Close")


def test_negative_volume_rejected():
    with pytest.raises(ValidationError, match="negative"):
        RawSeries("Volume", ["2020-01-01"], [-1.0])
    RawSeries("XAU_USD", ["2020-01-01"], [-1.0])  # sign unrestricted


def test_series_arrays_are_read_only():
    s = RawSeries("Close", ["2020-01-01", "2020-01-02"], [1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 5.0


def test_series_csv_round_trip(tmp_path):
    s = RawSeries("Close", ["2021-05-01", "2021-05-02"], [0.1 + 0.2, 1e-300])
    write_series_csv(s, tmp_path / "s.csv")
    back = load_series_csv(tmp_path / "s.csv", "Close")
    assert np.array_equal(back.values, s.values)
    assert np.array_equal(back.dates, s.dates)


# --- alignment and the moving average ---------------------------------------------


def test_align_keeps_common_dates():
    a = RawSeries("Close", ["2020-01-01", "2020-01-02", "2020-01-04"], [1, 2, 4])
    b = RawSeries("Volume", ["2020-01-02", "2020-01-03", "2020-01-04"], [20, 30, 40])
    ds = align([a, b])
    assert [str(d) for d in ds.dates] == ["2020-01-02", "2020-01-04"]
    assert ds["Close"].tolist() == [2, 4]
    assert ds["Volume"].tolist() == [20, 40]


def test_align_rejects_duplicate_names():
    a = RawSeries("Close", ["2020-01-01"], [1])
    with pytest.raises(ValidationError):
        align([a, a])


def test_unknown_column_is_validation_error():
    ds = AlignedDataset(np.array(["2020-01-01"], dtype="datetime64[D]"), {"Close": [1.0]})
    with pytest.raises(ValidationError):
        ds["Open"]


def test_moving_average_values():
    assert moving_average([1, 2, 3, 4, 5], 3).tolist() == [2.0, 3.0, 4.0]
    with pytest.raises(InsufficientDataError):
        moving_average([1, 2], 3)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60),
    st.integers(1, 10),
)
def test_moving_average_stays_within_window_range(values, window):
    if len(values) < window:
        return
    ma = moving_average(values, window)
    v = np.asarray(values)
    for i, m in enumerate(ma):
        assert v[i : i + window].min() <= m <= v[i : i + window].max()


def test_add_moving_average_drops_warmup_rows():
    days = np.datetime64("2020-01-01") + np.arange(40)
    ds = AlignedDataset(days, {"Close": np.arange(40.0)})
    out = add_moving_average(ds, window=30)
    assert out.num_rows == 11
    assert out.dates[0] == days[29]
    assert out["Moving_Avg_30"][0] == pytest.approx(14.5)


# --- bundled snapshot -------------------------------------------------------------


def test_fixture_shape(fixture_dataset):
    ds = fixture_dataset
    assert ds.feature_names == list(ALL_SERIES)
    assert ds.num_rows == 3783
    assert str(ds.dates[-1]) == "2022-11-06"
    raw = align(load_series_csv(fixture.fixture_dir() / f"{n}.csv", n) for n in RAW_SERIES)
    assert raw.num_rows == 3812


def test_fixture_candles_are_consistent(fixture_dataset):
    ds = fixture_dataset
    assert np.all(ds["High"] >= np.maximum(ds["Open"], ds["Close"]) * (1 - 1e-9))
    assert np.all(ds["Low"] <= np.minimum(ds["Open"], ds["Close"]) * (1 + 1e-9))


def test_fixture_regenerates_byte_for_byte(tmp_path):
    fixture.write_fixture(tmp_path)
    for name in RAW_SERIES:
        assert filecmp.cmp(tmp_path / f"{name}.csv", fixture.fixture_dir() / f"{name}.csv", shallow=False), name


def test_default_manifest_honours_env(monkeypatch, tmp_path):
    monkeypatch.delenv(DATA_ROOT_ENV, raising=False)
    assert default_manifest_path() == fixture.fixture_manifest_path()
    monkeypatch.setenv(DATA_ROOT_ENV, str(tmp_path))
    assert default_manifest_path() == tmp_path / "manifest.json"


def test_dataset_csv_has_header_and_rows(tmp_path, fixture_dataset):
    small = fixture_dataset.rows(0, 3)
    write_dataset_csv(small, tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == ",".join(["date"] + list(ALL_SERIES))
    assert len(lines) == 4


def test_manifest_loading(tmp_path):
    write(tmp_path / "a.csv", "date,value\n" + "".join(f"2020-01-{d:02d},{d}\n" for d in range(1, 11)))
    write(tmp_path / "m.json", json.dumps({"series": {"Close": "a.csv"}, "moving_average": {"window": 3}}))
    ds = load_manifest(tmp_path / "m.json")
    assert ds.num_rows == 8
    assert ds["Moving_Avg_30"][0] == pytest.approx(2.0)


# --- exchange payloads ------------------------------------------------------------


def payload(candles, error=()):
    return {"error": list(error), "result": {"XXBTZUSD": candles, "last": 0}}


CANDLES = [
    [1609545600, "29300.0", "33300.0", "28000.0", "32200.0", "30000.0", "9000.5", 100],
    [1609459200, "28990.0", "29600.0", "28700.0", "29300.0", "29100.0", "4000.25", 50],
]


def test_parse_payload_orders_by_day():
    series = {s.name: s for s in parse_ohlc_payload(payload(CANDLES), "XXBTZUSD")}
    assert sorted(series) == ["Close", "High", "Low", "Open", "Volume"]
    assert [str(d) for d in series["Close"].dates] == ["2021-01-01", "2021-01-02"]
    assert series["Close"].values.tolist() == [29300.0, 32200.0]
    assert series["Volume"].values.tolist() == [4000.25, 9000.5]


def test_parse_payload_reports_errors():
    with pytest.raises(DecodeError):
        parse_ohlc_payload(payload([], error=["EQuery:Unknown asset pair"]))
    with pytest.raises(DecodeError):
        parse_ohlc_payload({"result": {"X": [[1, "a"]]}})


def test_inconsistent_candle_logged_not_dropped(caplog):
    bad = [[1609459200, "100", "90", "80", "95", "0", "1", 1]]  # high below open
    with caplog.at_level(logging.WARNING):
        series = parse_ohlc_payload(payload(bad))
    assert len(series[0]) == 1
    assert "data quality" in caplog.text


class _Handler(http.server.BaseHTTPRequestHandler):
    body = b""

    def do_GET(self):
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(self.body)

    def log_message(self, *args):
        pass


@pytest.fixture
def ohlc_server():
    server = http.server.HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()


def test_fetch_writes_snapshots(tmp_path, ohlc_server):
    _Handler.body = json.dumps(payload(CANDLES)).encode()
    url = f"http://127.0.0.1:{ohlc_server.server_port}/0/public/OHLC"
    series = fetch_ohlc(url, "XXBTZUSD", out_dir=tmp_path)
    assert len(series) == 5
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "Close.csv",
        "High.csv",
        "Low.csv",
        "Open.csv",
        "Volume.csv",
    ]
    assert load_series_csv(tmp_path / "Close.csv", "Close").values.tolist() == [29300.0, 32200.0]


def test_failed_fetch_leaves_directory_untouched(tmp_path, ohlc_server):
    _Handler.body = b"not json"
    url = f"http://127.0.0.1:{ohlc_server.server_port}/"
    with pytest.raises(DecodeError):
        fetch_ohlc(url, "XXBTZUSD", out_dir=tmp_path)
    assert list(tmp_path.iterdir()) == []
    with pytest.raises(FetchError):
        fetch_ohlc("http://127.0.0.1:9/", "XXBTZUSD", out_dir=tmp_path, retries=0, timeout=2)
    assert list(tmp_path.iterdir()) == []
