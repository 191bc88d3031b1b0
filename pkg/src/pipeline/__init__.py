from src.pipeline.base import compare, flag, run_stage
from src.pipeline.construction import ConstructionService
from src.pipeline.state import RunState
from src.pipeline.verification import (
    VerificationService,
    identity_orders,
    order_rows,
    richardson_limit,
    top_coefficient_fit,
)

__all__ = [
    "ConstructionService",
    "VerificationService",
    "RunState",
    "run_stage",
    "compare",
    "flag",
    "richardson_limit",
    "top_coefficient_fit",
    "identity_orders",
    "order_rows",
]
