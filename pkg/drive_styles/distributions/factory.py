from typing import Dict, Type

from ..errors import ValidationError
from .base import CandidateDistribution
from .beta import BetaCandidate
from .gamma import GammaCandidate
from .gev import GEVCandidate
from .normal import NormalCandidate


class DistributionFactory:
    """Factory to create candidate distributions."""

    _families: Dict[str, Type[CandidateDistribution]] = {
        "normal": NormalCandidate,
        "beta": BetaCandidate,
        "gamma": GammaCandidate,
        "gev": GEVCandidate,
    }

    @staticmethod
    def create_distribution(family: str) -> CandidateDistribution:
        """Create a candidate distribution by family name."""
        families = DistributionFactory._families
        if family not in families:
            available = ", ".join(families.keys())
            raise ValidationError(f"Family '{family}' not available. Available: {available}")
        return families[family]()

    @staticmethod
    def get_available_families() -> list[str]:
        """Returns the candidate families in fitting order."""
        return list(DistributionFactory._families)

    @staticmethod
    def is_family_available(family: str) -> bool:
        return family in DistributionFactory._families
