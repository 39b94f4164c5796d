import numpy as np
import pandas as pd
import pytest

from drive_styles.errors import DataError, SchemaError, ValidationError
from drive_styles.telemetry import (
    ChannelSpec,
    TelemetrySeries,
    export_csv,
    ingest_csv,
    validate_series,
)

from .conftest import telemetry_frame


def test_ingest_two_drivers(write_telemetry):
    path = write_telemetry(telemetry_frame({"alice": 3000, "bob": 3000}))

    series = ingest_csv(path, sample_rate_hz=100)

    assert [s.driver_id for s in series] == ["alice", "bob"]
    assert [s.length for s in series] == [3000, 3000]
    assert series[0].channel_names == ["v", "a_x", "a_y", "yaw_rate"]
    assert series[0].duration_s == pytest.approx(30.0)


def test_missing_required_channel(write_telemetry):
    path = write_telemetry(telemetry_frame({"alice": 100}).drop(columns=["yaw_rate"]))

    with pytest.raises(SchemaError, match="yaw_rate"):
        ingest_csv(path, sample_rate_hz=100)


def test_optional_channel_may_be_missing(write_telemetry):
    path = write_telemetry(telemetry_frame({"alice": 100}).drop(columns=["yaw_rate"]))
    spec = (
        ChannelSpec("v", "km/h"),
        ChannelSpec("a_x", "m/s^2"),
        ChannelSpec("a_y", "m/s^2"),
        ChannelSpec("yaw_rate", "deg/s", required=False),
    )

    (series,) = ingest_csv(path, spec=spec, sample_rate_hz=100)

    assert series.channel_names == ["v", "a_x", "a_y"]


def test_jitter_names_the_row(write_telemetry):
    frame = telemetry_frame({"alice": 50})
    # one 20 ms step after row 10
    frame.loc[11:, "timestamp_s"] += 0.01

    with pytest.raises(DataError, match=r"rows \[11\]"):
        ingest_csv(write_telemetry(frame), sample_rate_hz=100)


def test_non_monotone_timestamps(write_telemetry):
    frame = telemetry_frame({"alice": 20})
    frame.loc[5, "timestamp_s"] = frame.loc[3, "timestamp_s"]

    with pytest.raises(DataError, match="Non-monotone"):
        ingest_csv(write_telemetry(frame), sample_rate_hz=100)


def test_missing_driver_id_names_the_rows(write_telemetry):
    frame = telemetry_frame({"alice": 20, "bob": 20})
    frame.loc[[3, 27], "driver_id"] = None

    with pytest.raises(DataError, match=r"Missing driver_id at rows \[3, 27\]"):
        ingest_csv(write_telemetry(frame), sample_rate_hz=100)


def test_missing_file_is_validation_error(tmp_path):
    with pytest.raises(ValidationError):
        ingest_csv(tmp_path / "nope.csv")


def test_unit_conversion(write_telemetry):
    frame = telemetry_frame({"alice": 10})
    frame["v"] = 10.0
    frame["yaw_rate"] = np.pi
    spec = (
        ChannelSpec("v", "m/s"),
        ChannelSpec("a_x", "m/s^2"),
        ChannelSpec("a_y", "m/s^2"),
        ChannelSpec("yaw_rate", "rad/s"),
    )

    (series,) = ingest_csv(write_telemetry(frame), spec=spec, sample_rate_hz=100)

    np.testing.assert_allclose(series.channels["v"], 36.0)
    np.testing.assert_allclose(series.channels["yaw_rate"], 180.0)


def test_unknown_unit():
    with pytest.raises(ValidationError, match="furlong"):
        ChannelSpec("v", "furlong/h")


def test_reject_policy_drops_nan_rows(write_telemetry):
    frame = telemetry_frame({"alice": 100})
    frame.loc[40, "a_x"] = np.nan

    (series,) = ingest_csv(write_telemetry(frame), sample_rate_hz=100)
    report = validate_series(series)

    assert series.length == 99
    assert report.count_rejected == 1
    assert report.usable


def test_interpolate_policy_fills_short_gaps(write_telemetry):
    frame = telemetry_frame({"alice": 100})
    frame.loc[40:42, "v"] = np.nan
    frame.loc[39, "v"] = 10.0
    frame.loc[43, "v"] = 50.0

    (series,) = ingest_csv(write_telemetry(frame), sample_rate_hz=100, nan_policy="interpolate", max_gap_s=0.05)

    assert series.length == 100
    assert series.filled_samples == 3
    np.testing.assert_allclose(series.channels["v"][39:44], [10.0, 20.0, 30.0, 40.0, 50.0])


def test_interpolate_policy_rejects_long_gaps(write_telemetry):
    frame = telemetry_frame({"alice": 100})
    frame.loc[40:59, "v"] = np.nan

    (series,) = ingest_csv(write_telemetry(frame), sample_rate_hz=100, nan_policy="interpolate", max_gap_s=0.05)

    assert series.length == 80
    assert series.rejected_rows == 20


def test_series_is_read_only():
    series = TelemetrySeries("alice", 100.0, {"v": np.ones(5)})

    with pytest.raises(ValueError):
        series.channels["v"][0] = 2.0


def test_unequal_channel_lengths():
    with pytest.raises(DataError):
        TelemetrySeries("alice", 100.0, {"v": np.ones(5), "a_x": np.ones(4)})


def test_unknown_scenario():
    with pytest.raises(ValidationError, match="Scenario"):
        TelemetrySeries("alice", 100.0, {"v": np.ones(5)}, scenario_tag="rural")


def test_validate_constant_series():
    series = TelemetrySeries("alice", 100.0, {"v": np.full(50, 42.0)})

    report = validate_series(series)

    summary = report.channels["v"]
    assert summary.mean == summary.maximum == summary.minimum == 42.0
    assert report.to_dict()["channels"]["v"]["max"] == 42.0


def test_validate_empty_series():
    series = TelemetrySeries("alice", 100.0, {"v": np.array([])})

    report = validate_series(series)

    assert report.sample_count == 0
    assert not report.usable
    assert report.issues


def test_export_then_ingest(write_telemetry, tmp_path):
    original = ingest_csv(write_telemetry(telemetry_frame({"alice": 200, "bob": 150})), sample_rate_hz=100)

    path = export_csv(original, tmp_path / "canonical.csv")
    reread = ingest_csv(path, sample_rate_hz=100)

    assert len(reread) == 2
    for a, b in zip(original, reread):
        assert a.driver_id == b.driver_id
        for name in a.channel_names:
            np.testing.assert_allclose(a.channels[name], b.channels[name])
    assert list(pd.read_csv(path).columns) == ["driver_id", "timestamp_s", "v", "a_x", "a_y", "yaw_rate"]
