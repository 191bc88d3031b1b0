from src.construct.assembly import SpikeAssembler
from src.construct.parameters import ParameterSolver, check_exponent, limit_mu_bar
from src.construct.predictions import SQRT_E, predict, reduced_map

__all__ = [
    "ParameterSolver",
    "SpikeAssembler",
    "check_exponent",
    "limit_mu_bar",
    "predict",
    "reduced_map",
    "SQRT_E",
]
