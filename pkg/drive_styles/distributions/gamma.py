from typing import Tuple

import numpy as np
from scipy import stats

from ..errors import NumericalError
from .base import SUPPORT_EPSILON, CandidateDistribution


class GammaCandidate(CandidateDistribution):
    """Gamma distribution (shape, scale); data is shifted so its minimum sits at eps."""

    family = "gamma"
    n_params = 2

    def support_transform(self, data: np.ndarray) -> Tuple[float, float]:
        return float(np.min(data)) - SUPPORT_EPSILON, 1.0

    def estimate(self, mapped: np.ndarray) -> Tuple[float, ...]:
        shape, _, scale = stats.gamma.fit(mapped, floc=0)
        if not (shape > 0 and scale > 0):
            raise NumericalError(f"Gamma fit returned invalid parameters shape={shape}, scale={scale}")
        return shape, scale

    def frozen(self, params: Tuple[float, ...]):
        shape, scale = params
        return stats.gamma(shape, scale=scale)
