"""
Semantics of learned styles and per-driver aggressiveness.

Styles are ranked from calmest to most aggressive, every driver's mixture
is turned into an objective score and a five-level grade, and grades are
compared with subjective labels through a consistency-weighted confusion
matrix where off-by-one grades earn partial credit.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .discretizer import Codebook
from .errors import DataError, RangeError, SchemaError, ValidationError
from .fragmentation import FragmentStatsMatrix
from .hlm import StyleModel

logger = logging.getLogger(__name__)

LEVEL_COUNT = 5
LEVELS = tuple(range(1, LEVEL_COUNT + 1))
LABEL_SOURCES = ("self_report", "expert")
# credit per |predicted - true| level difference; larger differences earn nothing
CONSISTENCY_WEIGHTS = {0: 1.0, 1: 0.8}
SCORE_TOLERANCE = 1e-9
MIN_DRIVERS_PER_LEVEL = 5


@dataclass(frozen=True, eq=False)
class StyleOrdering:
    """``permutation[k]`` is the aggressiveness rank (1 = calmest) of learned style k."""

    permutation: Tuple[int, ...]
    severity_scores: np.ndarray
    mode: str = "bins"

    def __post_init__(self):
        permutation = tuple(int(r) for r in self.permutation)
        if sorted(permutation) != list(range(1, len(permutation) + 1)):
            raise ValidationError(f"Style ordering is not a bijection on 1..{len(permutation)}: {permutation}")
        object.__setattr__(self, "permutation", permutation)
        object.__setattr__(self, "severity_scores", np.asarray(self.severity_scores, dtype=float))

    @property
    def K(self) -> int:
        return len(self.permutation)

    def ranked_styles(self) -> List[int]:
        """Learned style indices, calmest first."""
        return sorted(range(self.K), key=lambda k: self.permutation[k])

    def reorder(self, theta: np.ndarray) -> np.ndarray:
        """Columns of a mixture matrix (or a single mixture) rearranged calmest first."""
        return np.asarray(theta)[..., self.ranked_styles()]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "permutation": list(self.permutation),
            "severity_scores": self.severity_scores.tolist(),
        }

    @classmethod
    def identity(cls, K: int) -> "StyleOrdering":
        return cls(tuple(range(1, K + 1)), np.arange(K, dtype=float), "identity")


@dataclass(frozen=True)
class SubjectiveLabel:
    driver_id: str
    level: int
    source: str = "expert"

    def __post_init__(self):
        if self.level not in LEVELS:
            raise RangeError(f"Level of driver {self.driver_id} must lie in 1..{LEVEL_COUNT}, got {self.level}")
        if self.source not in LABEL_SOURCES:
            raise ValidationError(f"Unknown label source {self.source!r}. Available: {', '.join(LABEL_SOURCES)}")


def read_labels(path: Union[str, Path], source: Optional[str] = None) -> List[SubjectiveLabel]:
    """Labels CSV with columns driver_id, level, source; optionally keep one source only."""
    frame = pd.read_csv(path, dtype={"driver_id": str})
    missing = {"driver_id", "level"} - set(frame.columns)
    if missing:
        raise SchemaError(f"Labels CSV {path} lacks columns {sorted(missing)}")
    if "source" not in frame.columns:
        frame["source"] = "expert"
    if source is not None:
        frame = frame[frame["source"] == source]
    labels = [SubjectiveLabel(str(row.driver_id), int(row.level), str(row.source)) for row in frame.itertuples()]
    ids = [label.driver_id for label in labels]
    duplicated = sorted({d for d in ids if ids.count(d) > 1})
    if duplicated:
        raise DataError(f"Drivers labeled more than once for one source: {duplicated}")
    return labels


def write_labels(labels: Sequence[SubjectiveLabel], path: Union[str, Path]) -> Path:
    path = Path(path)
    frame = pd.DataFrame(
        [(label.driver_id, label.level, label.source) for label in labels], columns=["driver_id", "level", "source"]
    )
    frame.to_csv(path, index=False, encoding="utf-8")
    return path


@dataclass(frozen=True)
class LevelThresholds:
    """Four ascending cuts splitting [lower, upper] into five levels; a cut belongs to the upper level."""

    scenario_tag: str
    cuts: Tuple[float, ...]
    lower: float = 1.0
    upper: float = 3.0

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cuts)
        object.__setattr__(self, "cuts", cuts)
        if len(cuts) != LEVEL_COUNT - 1:
            raise ValidationError(f"Need {LEVEL_COUNT - 1} cuts, got {len(cuts)}")
        if not self.lower < self.upper:
            raise ValidationError(f"Score range [{self.lower}, {self.upper}] is empty")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValidationError(f"Cuts must be strictly ascending: {cuts}")
        if cuts[0] <= self.lower or cuts[-1] > self.upper:
            raise ValidationError(f"Cuts {cuts} must lie in ({self.lower}, {self.upper}]")

    @property
    def boundaries(self) -> List[Tuple[float, float]]:
        edges = (self.lower,) + self.cuts + (self.upper,)
        return list(zip(edges[:-1], edges[1:]))

    def to_dict(self) -> Dict[str, Any]:
        return {"scenario_tag": self.scenario_tag, "cuts": list(self.cuts), "lower": self.lower, "upper": self.upper}


URBAN_THRESHOLDS = LevelThresholds("urban", (1.01, 1.37, 1.99, 2.97))
HIGHWAY_THRESHOLDS = LevelThresholds("highway", (1.03, 1.57, 2.19, 2.96))
THRESHOLD_PRESETS: Dict[str, LevelThresholds] = {"urban": URBAN_THRESHOLDS, "highway": HIGHWAY_THRESHOLDS}


def thresholds_for(scenario_tag: str) -> LevelThresholds:
    try:
        return THRESHOLD_PRESETS[scenario_tag]
    except KeyError:
        raise ValidationError(
            f"No threshold preset for scenario {scenario_tag!r}. Available: {', '.join(THRESHOLD_PRESETS)}"
        ) from None


def order_styles(model: StyleModel, cb: Codebook) -> StyleOrdering:
    """
    Rank styles by expected word severity, the sum of a word's bin indices.

    Ties keep the lower style index first and are reported as a warning.
    """
    if cb.word_count != model.V:
        raise SchemaError(f"Codebook has {cb.word_count} words, the model {model.V}")
    severity = model.phi @ cb.severities()
    return _ordering_from_scores(severity, "bins")


def _ordering_from_scores(severity: np.ndarray, mode: str) -> StyleOrdering:
    order = np.argsort(severity, kind="stable")
    ranked = severity[order]
    if np.any(np.isclose(ranked[1:], ranked[:-1], rtol=0.0, atol=1e-12)):
        logger.warning("Styles tie in severity %s; ties are broken by style index", np.round(severity, 6).tolist())
    permutation = np.empty(severity.size, dtype=int)
    permutation[order] = np.arange(1, severity.size + 1)
    return StyleOrdering(tuple(permutation), severity, mode)


def style_statistics(matrix: FragmentStatsMatrix, assignments: np.ndarray, K: int) -> pd.DataFrame:
    """
    Raw fragment statistics per style.

    Args:
        matrix: pooled fragment statistics, one column per fragment
        assignments: style index of every column, in the same order

    Returns:
        Rows of style, feature, fragments, mean, sd, q25, median, q75
    """
    assignments = np.asarray(assignments, dtype=int).ravel()
    if assignments.size != matrix.fragment_count:
        raise SchemaError(f"{assignments.size} assignments for {matrix.fragment_count} fragments")
    rows = []
    for k in range(K):
        block = matrix.values[:, assignments == k]
        for label, values in zip(matrix.feature_labels, block):
            if values.size:
                q25, median, q75 = np.percentile(values, [25, 50, 75])
                rows.append((k, label, values.size, values.mean(), values.std(ddof=0), q25, median, q75))
            else:
                rows.append((k, label, 0) + (np.nan,) * 5)
    return pd.DataFrame(rows, columns=["style", "feature", "fragments", "mean", "sd", "q25", "median", "q75"])


def order_styles_by_statistics(stats: pd.DataFrame, features: Optional[Sequence[str]] = None) -> StyleOrdering:
    """Rank styles by their mean rank of per-feature style means; larger statistics mean more aggressive."""
    table = stats.pivot(index="style", columns="feature", values="mean")
    if features is not None:
        table = table[list(features)]
    empty = table.index[table.isna().all(axis=1)].tolist()
    if empty:
        logger.warning("Styles %s own no fragments; they are placed in the middle of the ranking", empty)
    ranks = table.rank(axis=0, method="average")
    severity = ranks.mean(axis=1).fillna((len(table) + 1) / 2.0)
    return _ordering_from_scores(severity.sort_index().to_numpy(dtype=float), "statistics")


def default_gamma(K: int) -> np.ndarray:
    return np.arange(1, K + 1, dtype=float)


def aggressive_score(
    theta_d: Sequence[float], ordering: StyleOrdering, gamma: Optional[Sequence[float]] = None
) -> float:
    """Sum of gamma_rank(k) * theta_k, the expected style rank with gamma_k = k by default."""
    theta_d = np.asarray(theta_d, dtype=float)
    if theta_d.size != ordering.K:
        raise SchemaError(f"Mixture has {theta_d.size} styles, ordering {ordering.K}")
    if np.any(theta_d < 0) or abs(theta_d.sum() - 1.0) > 1e-6:
        raise ValidationError(f"Mixture is not on the simplex: {theta_d}")
    gamma = default_gamma(ordering.K) if gamma is None else np.asarray(gamma, dtype=float)
    if gamma.size != ordering.K:
        raise ValidationError(f"gamma needs {ordering.K} weights, got {gamma.size}")
    weights = gamma[np.asarray(ordering.permutation) - 1]
    return math.fsum(weights * theta_d)


def aggressive_scores(
    model: StyleModel, ordering: StyleOrdering, gamma: Optional[Sequence[float]] = None
) -> Dict[str, float]:
    return {driver_id: aggressive_score(theta, ordering, gamma) for driver_id, theta in zip(model.driver_ids, model.theta)}


def score_to_level(s_obj: float, thresholds: LevelThresholds) -> int:
    """Level of the interval containing s_obj; a score on a cut takes the higher level."""
    if not thresholds.lower - SCORE_TOLERANCE <= s_obj <= thresholds.upper + SCORE_TOLERANCE:
        raise RangeError(f"Score {s_obj} outside [{thresholds.lower}, {thresholds.upper}]")
    return 1 + sum(1 for cut in thresholds.cuts if cut <= s_obj)


def consistency_weight(predicted: int, truth: int) -> float:
    return CONSISTENCY_WEIGHTS.get(abs(int(predicted) - int(truth)), 0.0)


@dataclass(eq=False)
class WeightedConfusion:
    """Rows are subjective levels, columns predicted levels."""

    raw: np.ndarray
    weighted: np.ndarray
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    driver_ids: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        def clean(values):
            return [None if np.isnan(v) else float(v) for v in values]

        return {
            "schema_version": 1,
            "levels": list(LEVELS),
            "axes": {"rows": "subjective", "columns": "predicted"},
            "weights": {"0": 1.0, "1": 0.8, ">=2": 0.0},
            "raw": self.raw.tolist(),
            "weighted": self.weighted.tolist(),
            "accuracy": self.accuracy,
            "precision": clean(self.precision),
            "recall": clean(self.recall),
            "precision_definition": "weighted diagonal over weighted column mass",
            "recall_definition": "weighted diagonal over weighted row mass",
            "drivers": len(self.driver_ids),
        }


def _weight_matrix() -> np.ndarray:
    idx = np.arange(LEVEL_COUNT)
    return np.vectorize(consistency_weight)(idx[:, None], idx[None, :])


def weighted_confusion(pred: Mapping[str, int], truth: Sequence[SubjectiveLabel]) -> WeightedConfusion:
    """
    Consistency-weighted confusion of predicted against subjective levels.

    Args:
        pred: predicted level per driver id
        truth: one subjective label per driver
    """
    truth_levels = {label.driver_id: label.level for label in truth}
    unmatched = sorted(set(pred) ^ set(truth_levels))
    if unmatched:
        raise DataError(f"Driver ids present on only one side of the comparison: {unmatched}")
    if not truth_levels:
        raise ValidationError("No drivers to compare")

    raw = np.zeros((LEVEL_COUNT, LEVEL_COUNT), dtype=np.int64)
    for driver_id, level in truth_levels.items():
        predicted = int(pred[driver_id])
        if predicted not in LEVELS:
            raise RangeError(f"Predicted level {predicted} of driver {driver_id} outside 1..{LEVEL_COUNT}")
        raw[level - 1, predicted - 1] += 1

    weighted = raw * _weight_matrix()
    diagonal = np.diag(weighted)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(weighted.sum(axis=0) > 0, diagonal / weighted.sum(axis=0), np.nan)
        recall = np.where(weighted.sum(axis=1) > 0, diagonal / weighted.sum(axis=1), np.nan)
    return WeightedConfusion(
        raw=raw,
        weighted=weighted,
        accuracy=float(weighted.sum() / raw.sum()),
        precision=precision,
        recall=recall,
        driver_ids=sorted(truth_levels),
    )


@dataclass(frozen=True)
class ThresholdFit:
    thresholds: LevelThresholds
    accuracy: float
    baseline_accuracy: float
    flagged: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "thresholds": self.thresholds.to_dict(),
            "accuracy": self.accuracy,
            "baseline_accuracy": self.baseline_accuracy,
            "flagged": self.flagged,
        }


# integer credit units so accumulated credit compares exactly
_CREDIT_UNITS = {0: 5, 1: 4}


def _best_cut_cells(cells: np.ndarray, truth: np.ndarray, n_cells: int) -> Tuple[List[int], int]:
    """
    Monotone assignment of grid cells to levels 1..5 maximizing credit.

    Cell 0 is level 1, the last cell level 5 and every level owns at least one
    cell. Equal credit prefers more level-3 cells. Returns the first cell of
    levels 2..5 and the credit in units of 0.2.
    """
    gain = np.zeros((n_cells, LEVEL_COUNT), dtype=np.int64)
    for cell, level in zip(cells, truth):
        for predicted in LEVELS:
            gain[cell, predicted - 1] += _CREDIT_UNITS.get(abs(predicted - level), 0)

    none = (-1, -1)
    best = [[none] * LEVEL_COUNT for _ in range(n_cells)]
    came_from = np.zeros((n_cells, LEVEL_COUNT), dtype=bool)  # True when the level started at this cell
    best[0][0] = (int(gain[0, 0]), 0)
    for c in range(1, n_cells):
        for L in range(LEVEL_COUNT):
            stay = best[c - 1][L]
            step = best[c - 1][L - 1] if L > 0 else none
            prev, started = (stay, False) if stay >= step else (step, True)
            if prev == none:
                continue
            best[c][L] = (prev[0] + int(gain[c, L]), prev[1] + (1 if L == 2 else 0))
            came_from[c, L] = started

    if best[n_cells - 1][LEVEL_COUNT - 1] == none:
        raise ValidationError(f"Grid of {n_cells} cells is too coarse for {LEVEL_COUNT} levels")
    starts = [0] * (LEVEL_COUNT - 1)
    L = LEVEL_COUNT - 1
    for c in range(n_cells - 1, 0, -1):
        if came_from[c, L]:
            starts[L - 1] = c
            L -= 1
    return starts, best[n_cells - 1][LEVEL_COUNT - 1][0]


def fit_thresholds(
    scores: Sequence[float],
    truth: Sequence[SubjectiveLabel],
    grid_step: float = 0.01,
    scenario_tag: str = "other",
    lower: float = 1.0,
    upper: float = 3.0,
    baseline_shuffles: int = 20,
    seed: int = 0,
) -> ThresholdFit:
    """
    Cuts on a grid of step ``grid_step`` that maximize weighted accuracy.

    Args:
        scores: objective score of every labeled driver, aligned with ``truth``
        truth: subjective labels
        baseline_shuffles: label shuffles averaged into the chance baseline

    Returns:
        ThresholdFit; ``flagged`` when the fit beats the baseline by less than 0.05
    """
    if not truth:
        raise ValidationError("fit_thresholds needs labeled drivers")
    scores = np.asarray(scores, dtype=float)
    if scores.size != len(truth):
        raise SchemaError(f"{scores.size} scores for {len(truth)} labels")
    if not grid_step > 0:
        raise ValidationError(f"grid_step must be positive, got {grid_step}")

    levels = np.array([label.level for label in truth])
    counts = np.bincount(levels, minlength=LEVEL_COUNT + 1)[1:]
    if np.count_nonzero(counts) == 1:
        logger.warning("Every driver carries level %d; fitted thresholds are degenerate", levels[0])
    sparse = [level for level, n in zip(LEVELS, counts) if 0 < n < MIN_DRIVERS_PER_LEVEL]
    if sparse:
        logger.warning("Levels %s have fewer than %d drivers; thresholds may not generalize", sparse, MIN_DRIVERS_PER_LEVEL)

    n_steps = int(round((upper - lower) / grid_step))
    grid = np.round(lower + grid_step * np.arange(n_steps + 1), 10)
    cells = np.clip(np.searchsorted(grid, np.clip(scores, lower, upper), side="right") - 1, 0, n_steps)

    starts, credit = _best_cut_cells(cells, levels, n_steps + 1)
    thresholds = LevelThresholds(scenario_tag, tuple(float(grid[c]) for c in starts), lower, upper)
    accuracy = credit / 5.0 / levels.size

    rng = np.random.default_rng(seed)
    baseline = []
    for _ in range(baseline_shuffles):
        _, shuffled_credit = _best_cut_cells(cells, rng.permutation(levels), n_steps + 1)
        baseline.append(shuffled_credit / 5.0 / levels.size)
    baseline_accuracy = float(np.mean(baseline)) if baseline else float("nan")
    flagged = bool(baseline and accuracy - baseline_accuracy < 0.05)
    if flagged:
        logger.warning(
            "Fitted thresholds reach %.3f, within 0.05 of the shuffled-label baseline %.3f", accuracy, baseline_accuracy
        )
    return ThresholdFit(thresholds, accuracy, baseline_accuracy, flagged)


def _mixtures_frame(model: StyleModel, ordering: Optional[StyleOrdering]) -> pd.DataFrame:
    theta = ordering.reorder(model.theta) if ordering is not None else model.theta
    return pd.DataFrame(theta, index=model.driver_ids, columns=[f"style_{k}" for k in range(1, model.K + 1)])


def _attributes_for(model: StyleModel, attributes: pd.DataFrame) -> pd.DataFrame:
    attributes = attributes.set_index(attributes["driver_id"].astype(str)) if "driver_id" in attributes else attributes
    missing = sorted(set(model.driver_ids) - set(attributes.index))
    if missing:
        raise DataError(f"Drivers without attributes: {missing}")
    return attributes.loc[model.driver_ids]


def group_report(
    model: StyleModel,
    attributes: pd.DataFrame,
    columns: Sequence[str] = ("gender", "age_band", "experience_band"),
    ordering: Optional[StyleOrdering] = None,
    expected_groups: Optional[Mapping[str, Sequence[str]]] = None,
) -> pd.DataFrame:
    """
    Mean mixture and its dispersion per attribute group.

    Styles are numbered calmest first when an ordering is given. The standard
    deviation of a single-driver group is NaN. Groups listed in
    ``expected_groups`` without drivers are omitted with a warning.
    """
    mixtures = _mixtures_frame(model, ordering)
    attributes = _attributes_for(model, attributes)
    rows = []
    for column in columns:
        if column not in attributes:
            raise SchemaError(f"Attribute {column!r} missing from the attributes table")
        present = attributes[column].astype(str)
        for group in (expected_groups or {}).get(column, []):
            if group not in set(present):
                logger.warning("Group %s=%s has no drivers and is omitted", column, group)
        for group, members in mixtures.groupby(present.to_numpy(), sort=True):
            for style in mixtures.columns:
                rows.append((column, group, style, len(members), members[style].mean(), members[style].std(ddof=1)))
    return pd.DataFrame(rows, columns=["attribute", "group", "style", "drivers", "mean", "std"])


def group_significance(
    model: StyleModel,
    attributes: pd.DataFrame,
    column: str,
    n_resamples: int = 10_000,
    seed: int = 0,
    ordering: Optional[StyleOrdering] = None,
) -> pd.DataFrame:
    """
    Permutation test of group differences in mean mixture, per style.

    The statistic is the largest absolute difference between two group means;
    the p-value counts shuffled group assignments reaching it.
    """
    mixtures = _mixtures_frame(model, ordering)
    groups = _attributes_for(model, attributes)[column].astype(str).to_numpy()
    names, codes = np.unique(groups, return_inverse=True)
    if names.size < 2:
        raise ValidationError(f"Attribute {column!r} has fewer than two groups")

    values = mixtures.to_numpy()
    sizes = np.bincount(codes, minlength=names.size)

    def statistic(labels: np.ndarray) -> np.ndarray:
        onehot = np.eye(names.size)[labels]
        means = onehot.T @ values / sizes[:, None]
        return means.max(axis=0) - means.min(axis=0)

    observed = statistic(codes)
    rng = np.random.default_rng(seed)
    exceed = np.zeros(values.shape[1], dtype=np.int64)
    for _ in range(n_resamples):
        exceed += statistic(rng.permutation(codes)) >= observed - 1e-12
    p_values = (1 + exceed) / (1 + n_resamples)
    return pd.DataFrame(
        {
            "attribute": column,
            "style": mixtures.columns,
            "statistic": observed,
            "p_value": p_values,
            "groups": names.size,
        }
    )
