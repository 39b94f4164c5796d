import logging
from typing import Tuple

import numpy as np
from scipy import special, stats
from scipy.optimize import minimize

from ..errors import NumericalError
from .base import CandidateDistribution

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329


def gev_pwm_estimate(data: np.ndarray) -> Tuple[float, float, float]:
    """
    Probability-weighted-moment estimate of (location, scale, shape).

    Uses Hosking's rational approximation of the shape from the L-skewness
    ratio; shape is returned with the convention that positive values give a
    heavy upper tail.
    """
    x = np.sort(np.asarray(data, dtype=float))
    n = x.size
    j = np.arange(n)
    b0 = x.mean()
    b1 = np.sum(j / (n - 1) * x) / n
    b2 = np.sum(j * (j - 1) / ((n - 1) * (n - 2)) * x) / n

    c = (2 * b1 - b0) / (3 * b2 - b0) - np.log(2) / np.log(3)
    k = 7.8590 * c + 2.9554 * c**2
    if abs(k) < 1e-6:
        sigma = (2 * b1 - b0) / np.log(2)
        return float(b0 - EULER_GAMMA * sigma), float(sigma), 0.0
    g = special.gamma(1 + k)
    sigma = (2 * b1 - b0) * k / (g * (1 - 2 ** (-k)))
    mu = b0 + sigma * (g - 1) / k
    return float(mu), float(sigma), float(-k)


class GEVCandidate(CandidateDistribution):
    """Generalized extreme value distribution (location, scale, shape).

    Fitted by Nelder-Mead on the negative log-likelihood, starting from the
    probability-weighted-moment estimate.
    """

    family = "gev"
    n_params = 3

    fatol = 1e-8
    xatol = 1e-6
    max_evaluations = 2000

    @staticmethod
    def _negative_log_likelihood(theta: np.ndarray, data: np.ndarray) -> float:
        mu, log_sigma, xi = theta
        logpdf = stats.genextreme.logpdf(data, -xi, loc=mu, scale=np.exp(log_sigma))
        total = float(np.sum(logpdf))
        return -total if np.isfinite(total) else np.inf

    def estimate(self, mapped: np.ndarray) -> Tuple[float, ...]:
        mu, sigma, xi = gev_pwm_estimate(mapped)
        start = np.array([mu, np.log(sigma) if sigma > 0 else 0.0, xi])
        if not np.isfinite(self._negative_log_likelihood(start, mapped)):
            # start outside the support: fall back to Gumbel moments
            sigma = np.std(mapped) * np.sqrt(6) / np.pi
            start = np.array([np.mean(mapped) - EULER_GAMMA * sigma, np.log(sigma), 0.0])

        step = np.diag([0.1 * np.exp(start[1]), 0.1, 0.05])
        result = minimize(
            self._negative_log_likelihood,
            start,
            args=(mapped,),
            method="Nelder-Mead",
            options={
                "initial_simplex": np.vstack([start, start + step]),
                "fatol": self.fatol,
                "xatol": self.xatol,
                "maxfev": self.max_evaluations,
            },
        )
        if not result.success:
            raise NumericalError(f"GEV likelihood optimization did not converge: {result.message}")
        mu, log_sigma, xi = result.x
        return mu, float(np.exp(log_sigma)), xi

    def frozen(self, params: Tuple[float, ...]):
        mu, sigma, xi = params
        return stats.genextreme(-xi, loc=mu, scale=sigma)
