"""Fixed-length fragments of telemetry and their per-fragment statistics."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ValidationError
from .telemetry import TelemetrySeries

logger = logging.getLogger(__name__)

POOLED_DRIVER_ID = "*pooled*"

# population statistics over the sample axis of a (fragments x samples) block
STATISTICS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "max": lambda block: block.max(axis=1),
    "mean": lambda block: block.mean(axis=1),
    "min": lambda block: block.min(axis=1),
    "std": lambda block: block.std(axis=1, ddof=0),
}


@dataclass(frozen=True)
class FragmentConfig:
    """Fragment length and the statistics computed over each fragment.

    Channels listed in ``absolute_channels`` are summarized by magnitude.
    """

    tau_s: float = 10.0
    stats: Tuple[str, ...] = ("max", "mean", "std")
    absolute_channels: Tuple[str, ...] = ("a_x", "a_y", "yaw_rate")

    def __post_init__(self):
        if not self.tau_s > 0:
            raise ValidationError(f"tau_s must be positive, got {self.tau_s}")
        if not self.stats:
            raise ValidationError("At least one fragment statistic is required")
        unknown = [stat for stat in self.stats if stat not in STATISTICS]
        if unknown:
            raise ValidationError(f"Unknown statistics {unknown}. Available: {', '.join(STATISTICS)}")
        if len(set(self.stats)) != len(self.stats):
            raise ValidationError(f"Statistics repeat: {list(self.stats)}")

    def samples_per_fragment(self, sample_rate_hz: float) -> int:
        samples = int(round(self.tau_s * sample_rate_hz))
        if samples < 2:
            raise ValidationError(
                f"tau_s={self.tau_s} at {sample_rate_hz} Hz gives {samples} samples per fragment, need >= 2"
            )
        return samples


@dataclass(frozen=True, eq=False)
class Fragment:
    driver_id: str
    index: int
    start: int
    data: Dict[str, np.ndarray]


@dataclass(eq=False)
class FragmentStatsMatrix:
    """Feature rows x fragment columns; column i summarizes fragment i."""

    driver_id: str
    values: np.ndarray
    feature_labels: List[str]
    column_drivers: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.feature_labels):
            raise ValidationError(
                f"Matrix shape {self.values.shape} does not match {len(self.feature_labels)} feature labels"
            )
        if not np.isfinite(self.values).all():
            raise ValidationError(f"Fragment statistics of {self.driver_id} hold non-finite entries")
        if not self.column_drivers:
            self.column_drivers = [self.driver_id] * self.values.shape[1]

    @property
    def fragment_count(self) -> int:
        return self.values.shape[1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.feature_labels)

    def for_driver(self, driver_id: str) -> "FragmentStatsMatrix":
        """Columns of one driver out of a pooled matrix."""
        mask = np.array([owner == driver_id for owner in self.column_drivers], dtype=bool)
        return FragmentStatsMatrix(driver_id, self.values[:, mask], list(self.feature_labels))


def feature_label(channel: str, stat: str) -> str:
    return f"{channel}_{stat}"


def segment(series: TelemetrySeries, cfg: FragmentConfig) -> List[Fragment]:
    """Split a series into consecutive non-overlapping fragments; the partial tail is dropped."""
    size = cfg.samples_per_fragment(series.sample_rate_hz)
    count = series.length // size
    if count == 0:
        logger.warning(
            "Series of driver %s has %d samples, shorter than one fragment of %d",
            series.driver_id,
            series.length,
            size,
        )
        return []
    return [
        Fragment(
            driver_id=series.driver_id,
            index=i,
            start=i * size,
            data={name: values[i * size : (i + 1) * size] for name, values in series.channels.items()},
        )
        for i in range(count)
    ]


def fragment_stats(
    fragments: Sequence[Fragment],
    cfg: FragmentConfig,
    channels: Sequence[str] = (),
) -> FragmentStatsMatrix:
    """Stack the configured statistics of every channel, channel-major, one column per fragment."""
    if not fragments:
        raise ValidationError("fragment_stats needs at least one fragment")
    channels = list(channels) or list(fragments[0].data)
    rows, labels = [], []
    for channel in channels:
        block = np.vstack([fragment.data[channel] for fragment in fragments])
        if channel in cfg.absolute_channels:
            block = np.abs(block)
        for stat in cfg.stats:
            rows.append(STATISTICS[stat](block))
            labels.append(feature_label(channel, stat))
    return FragmentStatsMatrix(
        driver_id=fragments[0].driver_id,
        values=np.vstack(rows),
        feature_labels=labels,
    )


def fragment_series(series: TelemetrySeries, cfg: FragmentConfig, channels: Sequence[str] = ()):
    """segment + fragment_stats; None when the series is shorter than one fragment."""
    fragments = segment(series, cfg)
    if not fragments:
        return None
    return fragment_stats(fragments, cfg, channels)


def pool_matrices(matrices: Sequence[FragmentStatsMatrix]) -> FragmentStatsMatrix:
    """Concatenate per-driver matrices column-wise, keeping each column's driver."""
    if not matrices:
        raise ValidationError("Nothing to pool: no fragment matrices")
    labels = list(matrices[0].feature_labels)
    for matrix in matrices[1:]:
        if matrix.feature_labels != labels:
            raise ValidationError(f"Feature labels of {matrix.driver_id} differ from {matrices[0].driver_id}")
    return FragmentStatsMatrix(
        driver_id=POOLED_DRIVER_ID,
        values=np.hstack([matrix.values for matrix in matrices]),
        feature_labels=labels,
        column_drivers=[owner for matrix in matrices for owner in matrix.column_drivers],
    )


def export_matrix_csv(matrix: FragmentStatsMatrix, path: Union[str, Path]) -> Path:
    """Rows = feature labels, columns = fragment index."""
    path = Path(path)
    matrix.to_frame().to_csv(path, index_label="feature")
    return path
