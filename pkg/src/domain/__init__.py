from src.domain.geometry import DomainModel
from src.domain.green import GreenFunction, RegularPart, singular_parts
from src.domain.nystrom import BoundaryIntegralSolver, HarmonicFunction

__all__ = [
    "DomainModel",
    "GreenFunction",
    "RegularPart",
    "singular_parts",
    "BoundaryIntegralSolver",
    "HarmonicFunction",
]
