from typing import Tuple

import numpy as np
from scipy import stats

from ..errors import NumericalError
from .base import SUPPORT_EPSILON, CandidateDistribution


class BetaCandidate(CandidateDistribution):
    """Beta distribution on [0, 1]; data is mapped linearly onto (eps, 1 - eps)."""

    family = "beta"
    n_params = 2

    def support_transform(self, data: np.ndarray) -> Tuple[float, float]:
        low, high = float(np.min(data)), float(np.max(data))
        if not high > low:
            raise NumericalError("Beta fit needs data with positive range")
        scale = (high - low) / (1 - 2 * SUPPORT_EPSILON)
        return low - SUPPORT_EPSILON * scale, scale

    def estimate(self, mapped: np.ndarray) -> Tuple[float, ...]:
        a, b, _, _ = stats.beta.fit(mapped, floc=0, fscale=1)
        if not (a > 0 and b > 0):
            raise NumericalError(f"Beta fit returned invalid shapes a={a}, b={b}")
        return a, b

    def frozen(self, params: Tuple[float, ...]):
        a, b = params
        return stats.beta(a, b)
