from src.profiles.moments import B0_EXACT, C0_EXACT, MomentSuite, reference_moments
from src.profiles.profiles import (
    ProfileEvaluator,
    ProfileSolver,
    eval_U,
    exp_U,
    kernel_residuals,
)

__all__ = [
    "ProfileSolver",
    "ProfileEvaluator",
    "MomentSuite",
    "eval_U",
    "exp_U",
    "kernel_residuals",
    "reference_moments",
    "C0_EXACT",
    "B0_EXACT",
]
