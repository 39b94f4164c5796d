import logging
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from ..errors import NumericalError

logger = logging.getLogger(__name__)

# distance kept between mapped data and the edges of a bounded support
SUPPORT_EPSILON = 1e-6


@dataclass(frozen=True)
class FittedDistribution:
    """MLE fit of one family to a factor's scores.

    The family is fitted to ``(x - offset) / scale``; offset and scale record
    the affine map into the family's support (identity for Normal and GEV).
    Log-likelihood and AIC refer to the original, unmapped data.
    """

    family: str
    params: Tuple[float, ...]
    log_likelihood: float
    aic: float
    support: Tuple[float, float]
    offset: float = 0.0
    scale: float = 1.0
    n_obs: int = 0

    def _frozen(self):
        from .factory import DistributionFactory

        return DistributionFactory.create_distribution(self.family).frozen(self.params)

    def ppf(self, q) -> np.ndarray:
        return self.offset + self.scale * self._frozen().ppf(q)

    def cdf(self, x) -> np.ndarray:
        return self._frozen().cdf((np.asarray(x, dtype=float) - self.offset) / self.scale)

    def rvs(self, size: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        rng = rng if rng is not None else np.random.default_rng()
        return self.offset + self.scale * self._frozen().rvs(size=size, random_state=rng)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "params": list(self.params),
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "support": [self.support[0], self.support[1]],
            "offset": self.offset,
            "scale": self.scale,
            "n_obs": self.n_obs,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FittedDistribution":
        return cls(
            family=data["family"],
            params=tuple(float(p) for p in data["params"]),
            log_likelihood=float(data["log_likelihood"]),
            aic=float(data["aic"]),
            support=(float(data["support"][0]), float(data["support"][1])),
            offset=float(data.get("offset", 0.0)),
            scale=float(data.get("scale", 1.0)),
            n_obs=int(data.get("n_obs", 0)),
        )


class CandidateDistribution(ABC):
    """Abstract base class for the candidate families fitted to factor scores."""

    family: str = ""
    n_params: int = 0

    def support_transform(self, data: np.ndarray) -> Tuple[float, float]:
        """(offset, scale) mapping the data into the family's support."""
        return 0.0, 1.0

    @abstractmethod
    def estimate(self, mapped: np.ndarray) -> Tuple[float, ...]:
        """Maximum-likelihood parameters for data already in the support."""
        pass

    @abstractmethod
    def frozen(self, params: Tuple[float, ...]):
        """scipy.stats frozen distribution for the given parameters."""
        pass

    def fit(self, data: np.ndarray) -> FittedDistribution:
        """Fit the family and score it by log-likelihood and AIC on the original scale."""
        data = np.asarray(data, dtype=float)
        offset, scale = self.support_transform(data)
        mapped = (data - offset) / scale

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            params = tuple(float(p) for p in self.estimate(mapped))
            frozen = self.frozen(params)
            log_likelihood = float(np.sum(frozen.logpdf(mapped))) - data.size * np.log(scale)

        if not np.all(np.isfinite(params)) or not np.isfinite(log_likelihood):
            raise NumericalError(f"{self.family} fit produced non-finite parameters or likelihood: {params}")

        low, high = frozen.support()
        return FittedDistribution(
            family=self.family,
            params=params,
            log_likelihood=log_likelihood,
            aic=2 * self.n_params - 2 * log_likelihood,
            support=(float(offset + scale * low), float(offset + scale * high)),
            offset=float(offset),
            scale=float(scale),
            n_obs=int(data.size),
        )
