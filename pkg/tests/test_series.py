import numpy as np
import pandas as pd
import pytest

from costcast.errors import ParseError, ValidationError
from costcast.series import HourlySeries, load_series_csv, synthetic_series


@pytest.fixture(scope="module")
def series():
    return synthetic_series(120, seed=3)


def test_synthetic_shape_and_determinism(series):
    assert len(series) == 120 * 24
    assert series.timestamps[0] == pd.Timestamp("2010-01-01 00:00")
    again = synthetic_series(120, seed=3)
    assert np.array_equal(series.load, again.load)
    assert np.array_equal(series.temperature, again.temperature)
    other = synthetic_series(120, seed=4)
    assert not np.array_equal(series.load, other.load)
    with pytest.raises(ValidationError, match="n_days"):
        synthetic_series(0)


def test_synthetic_stays_in_network_envelope():
    s = synthetic_series(913, seed=42)  # 2.5 years
    assert s.load.min() > 80.0
    assert s.load.max() < 345.0
    assert -20.0 < s.temperature.min() < s.temperature.max() < 40.0


def test_synthetic_weekly_and_thermal_structure(series):
    dow = series.timestamps.dayofweek.to_numpy()
    assert series.load[dow < 5].mean() > series.load[dow >= 5].mean() + 5.0
    # U-shaped temperature response: after removing hour-of-day structure,
    # the residual load grows with distance from the comfort point
    hour = series.timestamps.hour.to_numpy()
    hour_means = np.array([series.load[hour == h].mean() for h in range(24)])
    resid = series.load - hour_means[hour]
    gap2 = (series.temperature - 18.0) ** 2
    corr = np.corrcoef(resid, gap2)[0, 1]
    assert corr > 0.2


def test_series_validation():
    ts = pd.date_range("2011-01-01", periods=5, freq="h")
    with pytest.raises(ValidationError, match="gaps before"):
        HourlySeries(ts.delete(2), np.ones(4) * 100, np.zeros(4))
    with pytest.raises(ValidationError, match="positive"):
        HourlySeries(ts, np.array([1, 2, 0, 4, 5.0]), np.zeros(5))
    with pytest.raises(ValidationError, match="finite"):
        HourlySeries(ts, np.ones(5), np.array([0, np.nan, 0, 0, 0.0]))
    with pytest.raises(ValidationError, match="length"):
        HourlySeries(ts, np.ones(4), np.zeros(5))
    with pytest.raises(ValidationError, match="empty"):
        HourlySeries(ts[:0], np.ones(0), np.zeros(0))


def test_slice_range(series):
    part = series.slice_range("2010-02-01", "2010-02-08")
    assert len(part) == 7 * 24
    assert part.timestamps[0] == pd.Timestamp("2010-02-01 00:00")
    assert part.timestamps[-1] == pd.Timestamp("2010-02-07 23:00")
    with pytest.raises(ValidationError, match="precede"):
        series.slice_range("2010-02-08", "2010-02-01")
    with pytest.raises(ValidationError, match="no rows"):
        series.slice_range("1999-01-01", "1999-02-01")


def test_csv_roundtrip(tmp_path, series):
    path = tmp_path / "series.csv"
    series.save_csv(path)
    loaded = load_series_csv(path)
    assert np.array_equal(loaded.timestamps.asi8, series.timestamps.asi8)
    assert np.allclose(loaded.load, series.load, rtol=1e-9)
    assert np.allclose(loaded.temperature, series.temperature, atol=1e-7)
    # writing the loaded copy back reproduces the file byte for byte
    path2 = tmp_path / "series2.csv"
    loaded.save_csv(path2)
    assert path2.read_bytes() == path.read_bytes()
    assert path.read_text().splitlines()[0] == "timestamp,load_mw,temperature_c"


def test_csv_rejects_malformed(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,load_mw\n2010-01-01 00:00,100\n")
    with pytest.raises(ParseError, match="temperature_c"):
        load_series_csv(bad)
    bad.write_text("timestamp,load_mw,temperature_c\nnot-a-date,100,5\n")
    with pytest.raises(ParseError, match="timestamp"):
        load_series_csv(bad)
    with pytest.raises(ParseError):
        load_series_csv(tmp_path / "nope.csv")
