"""Ingestion, validation and export of per-driver vehicle telemetry."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DataError, SchemaError, ValidationError

logger = logging.getLogger(__name__)

DRIVER_COLUMN = "driver_id"
TIMESTAMP_COLUMN = "timestamp_s"
SCENARIO_TAGS = ("urban", "highway", "other")
NAN_POLICIES = ("reject", "interpolate")

# unit found in the file -> (canonical unit, multiplicative factor)
UNIT_CONVERSIONS: Dict[str, Tuple[str, float]] = {
    "km/h": ("km/h", 1.0),
    "m/s": ("km/h", 3.6),
    "mph": ("km/h", 1.609344),
    "m/s^2": ("m/s^2", 1.0),
    "m/s²": ("m/s^2", 1.0),
    "g": ("m/s^2", 9.80665),
    "deg/s": ("deg/s", 1.0),
    "rad/s": ("deg/s", 180.0 / np.pi),
}


@dataclass(frozen=True)
class ChannelSpec:
    """One telemetry channel expected in the input file."""

    name: str
    unit: str
    required: bool = True

    def __post_init__(self):
        if self.unit not in UNIT_CONVERSIONS:
            available = ", ".join(UNIT_CONVERSIONS)
            raise ValidationError(
                f"Unit '{self.unit}' of channel '{self.name}' not supported. Available: {available}"
            )

    @property
    def canonical_unit(self) -> str:
        return UNIT_CONVERSIONS[self.unit][0]

    def to_canonical(self, values: np.ndarray) -> np.ndarray:
        """Convert raw values to the canonical unit of this channel."""
        return np.asarray(values, dtype=float) * UNIT_CONVERSIONS[self.unit][1]


DEFAULT_CHANNELS: Tuple[ChannelSpec, ...] = (
    ChannelSpec("v", "km/h"),
    ChannelSpec("a_x", "m/s^2"),
    ChannelSpec("a_y", "m/s^2"),
    ChannelSpec("yaw_rate", "deg/s"),
)


def check_channel_specs(spec: Sequence[ChannelSpec]) -> None:
    """Raise if channel names repeat or no channel is required."""
    names = [channel.name for channel in spec]
    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        raise ValidationError(f"Duplicate channel names: {duplicates}")
    if not any(channel.required for channel in spec):
        raise ValidationError("At least one channel must be required")


@dataclass(frozen=True, eq=False)
class TelemetrySeries:
    """Uniformly sampled multi-channel signal of one driver, in canonical units.

    Channel arrays are read-only copies, so a series can be shared freely.
    """

    driver_id: str
    sample_rate_hz: float
    channels: Mapping[str, np.ndarray]
    scenario_tag: str = "other"
    rejected_rows: int = 0
    filled_samples: int = 0

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ValidationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if self.scenario_tag not in SCENARIO_TAGS:
            raise ValidationError(
                f"Scenario '{self.scenario_tag}' not available. Available: {', '.join(SCENARIO_TAGS)}"
            )
        frozen = {}
        for name, values in self.channels.items():
            array = np.array(values, dtype=float)
            array.setflags(write=False)
            frozen[name] = array
        lengths = {name: len(values) for name, values in frozen.items()}
        if len(set(lengths.values())) > 1:
            raise DataError(f"Channel lengths differ for driver {self.driver_id}: {lengths}")
        object.__setattr__(self, "channels", MappingProxyType(frozen))

    @property
    def length(self) -> int:
        return len(next(iter(self.channels.values()))) if self.channels else 0

    @property
    def channel_names(self) -> List[str]:
        return list(self.channels)

    @property
    def duration_s(self) -> float:
        return self.length / self.sample_rate_hz

    def equals(self, other: "TelemetrySeries") -> bool:
        """Value equality, comparing channel arrays element-wise."""
        return (
            self.driver_id == other.driver_id
            and self.sample_rate_hz == other.sample_rate_hz
            and self.scenario_tag == other.scenario_tag
            and self.channel_names == other.channel_names
            and all(np.array_equal(self.channels[name], other.channels[name]) for name in self.channels)
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({name: np.asarray(values) for name, values in self.channels.items()})
        frame.insert(0, TIMESTAMP_COLUMN, np.arange(self.length) / self.sample_rate_hz)
        frame.insert(0, DRIVER_COLUMN, self.driver_id)
        return frame


def _nan_runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """(start, stop) index pairs of consecutive True runs."""
    padded = np.concatenate(([0], mask.astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2], edges[1::2]))


def _apply_nan_policy(
    values: Dict[str, np.ndarray], sample_rate_hz: float, policy: str, max_gap_s: float
) -> Tuple[Dict[str, np.ndarray], int, int]:
    filled = 0
    if policy == "interpolate":
        max_gap = int(round(max_gap_s * sample_rate_hz))
        for name, column in values.items():
            bad = ~np.isfinite(column)
            if not bad.any():
                continue
            column = column.copy()
            index = np.arange(len(column))
            for start, stop in _nan_runs(bad):
                # only interior gaps with finite neighbours on both sides
                if stop - start > max_gap or start == 0 or stop == len(column):
                    continue
                column[start:stop] = np.interp(
                    index[start:stop], [start - 1, stop], [column[start - 1], column[stop]]
                )
                filled += stop - start
            values[name] = column

    matrix = np.column_stack(list(values.values())) if values else np.empty((0, 0))
    bad_rows = ~np.isfinite(matrix).all(axis=1) if matrix.size else np.zeros(0, dtype=bool)
    rejected = int(bad_rows.sum())
    if rejected:
        keep = ~bad_rows
        values = {name: column[keep] for name, column in values.items()}
    return values, rejected, filled


def ingest_csv(
    path: Union[str, Path],
    spec: Sequence[ChannelSpec] = DEFAULT_CHANNELS,
    sample_rate_hz: float = 100.0,
    scenario_tag: str = "other",
    nan_policy: str = "reject",
    max_gap_s: float = 0.5,
    jitter_tolerance: float = 0.01,
) -> List[TelemetrySeries]:
    """
    Read a telemetry CSV into one TelemetrySeries per distinct driver.

    Args:
        path: CSV with a driver_id column, a timestamp_s column and one column per channel
        spec: expected channels; required ones must be present
        sample_rate_hz: declared sampling rate, verified against the timestamps
        scenario_tag: scenario of the whole file (urban, highway or other)
        nan_policy: "reject" drops rows with non-finite values, "interpolate"
            fills interior gaps up to max_gap_s and rejects the rest
        jitter_tolerance: allowed relative deviation of each sampling interval

    Returns:
        Series in order of first appearance of each driver
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"Telemetry file does not exist: {path}")
    if not sample_rate_hz > 0:
        raise ValidationError(f"sample_rate_hz must be positive, got {sample_rate_hz}")
    if nan_policy not in NAN_POLICIES:
        raise ValidationError(f"NaN policy '{nan_policy}' not available. Available: {', '.join(NAN_POLICIES)}")
    check_channel_specs(spec)

    frame = pd.read_csv(path, encoding="utf-8", dtype={DRIVER_COLUMN: str})
    missing = [column for column in (DRIVER_COLUMN, TIMESTAMP_COLUMN) if column not in frame.columns]
    missing += [channel.name for channel in spec if channel.required and channel.name not in frame.columns]
    if missing:
        raise SchemaError(f"Missing required columns in {path.name}: {missing}")
    present = [channel for channel in spec if channel.name in frame.columns]

    timestamps = pd.to_numeric(frame[TIMESTAMP_COLUMN], errors="coerce").to_numpy(dtype=float)
    broken = np.flatnonzero(~np.isfinite(timestamps))
    if broken.size:
        raise DataError(f"Non-finite timestamps at rows {broken.tolist()}")
    anonymous = np.flatnonzero(frame[DRIVER_COLUMN].isna().to_numpy())
    if anonymous.size:
        raise DataError(f"Missing driver_id at rows {anonymous.tolist()}")

    interval = 1.0 / sample_rate_hz
    series_set = []
    for driver_id, rows in frame.groupby(DRIVER_COLUMN, sort=False):
        row_index = rows.index.to_numpy()
        steps = np.diff(timestamps[row_index])

        backwards = row_index[1:][steps <= 0]
        if backwards.size:
            raise DataError(f"Non-monotone timestamps for driver {driver_id} at rows {backwards.tolist()}")

        jittery = row_index[1:][np.abs(steps - interval) > jitter_tolerance * interval]
        if jittery.size:
            raise DataError(
                f"Sampling interval of driver {driver_id} deviates more than "
                f"{jitter_tolerance:.0%} from {interval:g} s at rows {jittery.tolist()}"
            )

        values = {
            channel.name: channel.to_canonical(
                pd.to_numeric(rows[channel.name], errors="coerce").to_numpy(dtype=float)
            )
            for channel in present
        }
        values, rejected, filled = _apply_nan_policy(values, sample_rate_hz, nan_policy, max_gap_s)
        if rejected:
            logger.warning("Rejected %d rows with non-finite values for driver %s", rejected, driver_id)

        series_set.append(
            TelemetrySeries(
                driver_id=str(driver_id),
                sample_rate_hz=sample_rate_hz,
                channels=values,
                scenario_tag=scenario_tag,
                rejected_rows=rejected,
                filled_samples=filled,
            )
        )
    return series_set


def export_csv(
    series_set: Iterable[TelemetrySeries],
    path: Union[str, Path],
    channels: Sequence[ChannelSpec] = DEFAULT_CHANNELS,
) -> Path:
    """Write series in the canonical CSV layout ingest_csv reads back."""
    path = Path(path)
    frames = [series.to_frame() for series in series_set]
    if frames:
        frame = pd.concat(frames, ignore_index=True)
    else:
        frame = pd.DataFrame(columns=[DRIVER_COLUMN, TIMESTAMP_COLUMN] + [c.name for c in channels])
    frame.to_csv(path, index=False, encoding="utf-8")
    return path


@dataclass(frozen=True)
class ChannelSummary:
    minimum: float
    maximum: float
    mean: float
    nonfinite: int


@dataclass
class ValidationReport:
    """Report-only summary of a series; never modifies it."""

    driver_id: str
    sample_count: int
    duration_s: float
    channels: Dict[str, ChannelSummary]
    count_rejected: int
    count_filled: int
    count_nonfinite: int
    usable: bool
    issues: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        def clean(value: float) -> Optional[float]:
            return float(value) if np.isfinite(value) else None

        return {
            "driver_id": self.driver_id,
            "sample_count": self.sample_count,
            "duration_s": self.duration_s,
            "channels": {
                name: {
                    "min": clean(summary.minimum),
                    "max": clean(summary.maximum),
                    "mean": clean(summary.mean),
                    "nonfinite": summary.nonfinite,
                }
                for name, summary in self.channels.items()
            },
            "count_rejected": self.count_rejected,
            "count_filled": self.count_filled,
            "count_nonfinite": self.count_nonfinite,
            "usable": self.usable,
            "issues": list(self.issues),
        }


def validate_series(series: TelemetrySeries) -> ValidationReport:
    """Per-channel min/max/mean plus rejected and gap-filled counts."""
    summaries = {}
    nonfinite_total = 0
    issues = []
    for name, values in series.channels.items():
        finite = values[np.isfinite(values)]
        nonfinite = int(values.size - finite.size)
        nonfinite_total += nonfinite
        if finite.size:
            summaries[name] = ChannelSummary(float(finite.min()), float(finite.max()), float(finite.mean()), nonfinite)
        else:
            summaries[name] = ChannelSummary(np.nan, np.nan, np.nan, nonfinite)
        if nonfinite:
            issues.append(f"channel {name} holds {nonfinite} non-finite samples")

    if series.length == 0:
        issues.append("series holds no samples")

    return ValidationReport(
        driver_id=series.driver_id,
        sample_count=series.length,
        duration_s=series.duration_s,
        channels=summaries,
        count_rejected=series.rejected_rows,
        count_filled=series.filled_samples,
        count_nonfinite=nonfinite_total,
        usable=series.length > 0 and nonfinite_total == 0,
        issues=issues,
    )
