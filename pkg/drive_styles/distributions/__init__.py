"""
Candidate distribution families for factor-score discretization.
"""

from .base import CandidateDistribution, FittedDistribution
from .beta import BetaCandidate
from .factory import DistributionFactory
from .gamma import GammaCandidate
from .gev import GEVCandidate, gev_pwm_estimate
from .normal import NormalCandidate

__all__ = [
    "CandidateDistribution",
    "FittedDistribution",
    "NormalCandidate",
    "BetaCandidate",
    "GammaCandidate",
    "GEVCandidate",
    "DistributionFactory",
    "gev_pwm_estimate",
]
