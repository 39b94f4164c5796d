from typing import Tuple

import numpy as np
from scipy import stats

from ..errors import NumericalError
from .base import CandidateDistribution


class NormalCandidate(CandidateDistribution):
    """Normal distribution (mean, standard deviation)."""

    family = "normal"
    n_params = 2

    def estimate(self, mapped: np.ndarray) -> Tuple[float, ...]:
        mu, sigma = stats.norm.fit(mapped)
        if not sigma > 0:
            raise NumericalError("Normal fit needs data with positive variance")
        return mu, sigma

    def frozen(self, params: Tuple[float, ...]):
        mu, sigma = params
        return stats.norm(loc=mu, scale=sigma)
