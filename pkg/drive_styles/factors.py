"""Common-factor reduction of fragment statistics.

Features are standardized, loadings come from the eigendecomposition of the
feature correlation matrix, the factor count follows Kaiser's criterion unless
given, and the loadings are varimax-rotated. Scores use the regression method.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg

from .errors import DataError, NumericalError, SchemaError, ValidationError
from .fragmentation import FragmentStatsMatrix

logger = logging.getLogger(__name__)

CHANNEL_GROUPS: Dict[str, str] = {
    "v": "speed",
    "a_x": "acceleration",
    "a_y": "lateral",
    "yaw_rate": "lateral",
}
GROUP_ORDER = ("speed", "acceleration", "lateral")

# eigenvalues within this distance of 1 are not retained
KAISER_TOLERANCE = 1e-9


@dataclass(eq=False)
class FactorModel:
    """Loadings A (features x factors) and the constants needed to score new fragments."""

    loadings: np.ndarray
    uniquenesses: np.ndarray
    eigenvalues: np.ndarray
    feature_labels: List[str]
    factor_labels: List[str]
    feature_means: np.ndarray
    feature_stds: np.ndarray
    correlation: np.ndarray
    rotation_matrix: Optional[np.ndarray] = None

    @property
    def factor_count(self) -> int:
        return self.loadings.shape[1]

    @property
    def communalities(self) -> np.ndarray:
        return np.sum(self.loadings**2, axis=1)

    def explained_variance(self) -> pd.DataFrame:
        """Sum of squared loadings, proportion and cumulative proportion per factor."""
        variance = np.sum(self.loadings**2, axis=0)
        proportion = variance / len(self.feature_labels)
        return pd.DataFrame(
            {"variance": variance, "proportion": proportion, "cumulative": np.cumsum(proportion)},
            index=self.factor_labels,
        )

    def retained_eigen_share(self) -> float:
        """Share of the total standardized variance kept by the retained factors."""
        return float(np.sum(self.eigenvalues[: self.factor_count]) / len(self.feature_labels))

    def score_weights(self) -> np.ndarray:
        """Regression-method weights R^-1 A, by least squares so singular R is tolerated."""
        weights, *_ = linalg.lstsq(self.correlation, self.loadings)
        return weights

    def loadings_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.loadings, index=self.feature_labels, columns=self.factor_labels)

    def export_loadings_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.loadings_frame().to_csv(path, index_label="feature")
        return path

    def to_dict(self) -> Dict[str, Any]:
        return {
            "loadings": self.loadings.tolist(),
            "uniquenesses": self.uniquenesses.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "feature_labels": list(self.feature_labels),
            "factor_labels": list(self.factor_labels),
            "feature_means": self.feature_means.tolist(),
            "feature_stds": self.feature_stds.tolist(),
            "correlation": self.correlation.tolist(),
            "rotation_matrix": None if self.rotation_matrix is None else self.rotation_matrix.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FactorModel":
        rotation = data.get("rotation_matrix")
        return cls(
            loadings=np.asarray(data["loadings"], dtype=float),
            uniquenesses=np.asarray(data["uniquenesses"], dtype=float),
            eigenvalues=np.asarray(data["eigenvalues"], dtype=float),
            feature_labels=list(data["feature_labels"]),
            factor_labels=list(data["factor_labels"]),
            feature_means=np.asarray(data["feature_means"], dtype=float),
            feature_stds=np.asarray(data["feature_stds"], dtype=float),
            correlation=np.asarray(data["correlation"], dtype=float),
            rotation_matrix=None if rotation is None else np.asarray(rotation, dtype=float),
        )


@dataclass(eq=False)
class FactorScores:
    """Factor scores of one driver; column i is the score vector of fragment i."""

    driver_id: str
    scores: np.ndarray
    factor_labels: List[str] = field(default_factory=list)

    @property
    def fragment_count(self) -> int:
        return self.scores.shape[1]


def varimax(
    loadings: np.ndarray, normalize: bool = True, tol: float = 1e-6, max_iter: int = 500
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Varimax rotation with optional Kaiser row normalization.

    Returns:
        (rotated loadings, orthogonal rotation matrix)
    """
    X = np.array(loadings, dtype=float)
    n_rows, n_cols = X.shape
    if n_cols < 2:
        return X, np.eye(n_cols)

    if normalize:
        row_norms = np.sqrt(np.sum(X**2, axis=1))
        row_norms[row_norms == 0] = 1.0
        X = X / row_norms[:, None]

    rotation = np.eye(n_cols)
    d = 0.0
    for _ in range(max_iter):
        old_d = d
        basis = X @ rotation
        column_ss = np.sum(basis**2, axis=0)
        transformed = X.T @ (basis**3 - basis * column_ss / n_rows)
        U, S, Vt = np.linalg.svd(transformed)
        rotation = U @ Vt
        d = float(np.sum(S))
        if old_d != 0 and d / old_d < 1 + tol:
            break
    else:
        raise NumericalError(f"Varimax rotation did not converge after {max_iter} iterations")

    rotated = X @ rotation
    if normalize:
        rotated = rotated * row_norms[:, None]
    return rotated, rotation


def _channel_of(label: str) -> str:
    return label.rsplit("_", 1)[0]


def assign_factor_labels(
    loadings: np.ndarray,
    feature_labels: Sequence[str],
    channel_groups: Mapping[str, str] = CHANNEL_GROUPS,
) -> List[str]:
    """Name each factor after the channel group with the largest mean |loading|.

    Groups are handed out greedily by strength; ties go to the group that
    comes first in GROUP_ORDER, then to the lower factor index.
    """
    groups_per_feature = [channel_groups.get(_channel_of(label), _channel_of(label)) for label in feature_labels]
    groups = [g for g in GROUP_ORDER if g in groups_per_feature]
    groups += [g for g in dict.fromkeys(groups_per_feature) if g not in groups]

    strength = np.zeros((loadings.shape[1], len(groups)))
    for j, group in enumerate(groups):
        rows = [i for i, g in enumerate(groups_per_feature) if g == group]
        strength[:, j] = np.mean(np.abs(loadings[rows, :]), axis=0)

    candidates = sorted(
        (-strength[factor, j], j, factor) for factor in range(loadings.shape[1]) for j in range(len(groups))
    )
    labels: List[Optional[str]] = [None] * loadings.shape[1]
    taken = set()
    for _, j, factor in candidates:
        if labels[factor] is None and j not in taken:
            labels[factor] = groups[j]
            taken.add(j)
    return [label if label is not None else f"factor_{i + 1}" for i, label in enumerate(labels)]


def fit_factor_model(
    pooled: FragmentStatsMatrix,
    m: Optional[int] = None,
    rotate: bool = True,
    tol: float = 1e-6,
    max_iter: int = 500,
    channel_groups: Mapping[str, str] = CHANNEL_GROUPS,
) -> FactorModel:
    """
    Fit the factor model on the pooled fragment statistics.

    Args:
        pooled: feature rows x fragment columns
        m: number of factors; Kaiser's criterion (eigenvalues > 1) when None
        rotate: apply varimax with Kaiser normalization

    Returns:
        FactorModel with columns ordered by explained variance, largest loading of each column positive
    """
    X = pooled.values.T
    n_fragments, n_features = X.shape
    if n_features < 2:
        raise ValidationError(f"Factor analysis needs at least 2 features, got {n_features}")
    if n_fragments < 10 * n_features:
        logger.warning(
            "Only %d fragments for %d features; factor estimates may be unstable", n_fragments, n_features
        )

    means = X.mean(axis=0)
    stds = X.std(axis=0)
    flat = [label for label, std in zip(pooled.feature_labels, stds) if not std > 0]
    if flat:
        raise DataError(f"Zero-variance features cannot be standardized: {flat}")

    Z = (X - means) / stds
    correlation = Z.T @ Z / n_fragments
    correlation = (correlation + correlation.T) / 2
    np.fill_diagonal(correlation, 1.0)

    eigenvalues, eigenvectors = np.linalg.eigh(correlation)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order]

    if m is None:
        m = int(np.sum(eigenvalues > 1.0 + KAISER_TOLERANCE))
        if m == 0:
            raise ValidationError("Kaiser's criterion retained no factor; pass the factor count explicitly")
        logger.info("Kaiser's criterion retained %d factors", m)
    if not 1 <= m <= n_features:
        raise ValidationError(f"Factor count must lie in [1, {n_features}], got {m}")

    loadings = eigenvectors[:, :m] * np.sqrt(eigenvalues[:m])
    rotation = np.eye(m)
    if rotate and m > 1:
        loadings, rotation = varimax(loadings, tol=tol, max_iter=max_iter)

    order = np.argsort(-np.sum(loadings**2, axis=0), kind="stable")
    loadings = loadings[:, order]
    rotation = rotation[:, order]
    for column in range(m):
        if loadings[np.argmax(np.abs(loadings[:, column])), column] < 0:
            loadings[:, column] *= -1
            rotation[:, column] *= -1

    return FactorModel(
        loadings=loadings,
        uniquenesses=np.clip(1.0 - np.sum(loadings**2, axis=1), 0.0, 1.0),
        eigenvalues=eigenvalues,
        feature_labels=list(pooled.feature_labels),
        factor_labels=assign_factor_labels(loadings, pooled.feature_labels, channel_groups),
        feature_means=means,
        feature_stds=stds,
        correlation=correlation,
        rotation_matrix=rotation,
    )


def score_fragments(model: FactorModel, matrix: FragmentStatsMatrix) -> FactorScores:
    """Regression-method factor scores of every fragment column."""
    if list(matrix.feature_labels) != list(model.feature_labels):
        raise SchemaError(
            f"Feature labels of {matrix.driver_id} {matrix.feature_labels} do not match the model's "
            f"{model.feature_labels}"
        )
    Z = (matrix.values.T - model.feature_means) / model.feature_stds
    scores = (Z @ model.score_weights()).T
    return FactorScores(driver_id=matrix.driver_id, scores=scores, factor_labels=list(model.factor_labels))
