from typing import Optional, Tuple

import numpy as np

from src.construct.parameters import check_exponent
from src.core.exceptions import DegenerateCriticalPoint
from src.core.schemas import PredictionSet, SpikeConfiguration

SQRT_E = float(np.sqrt(np.e))
LOG_EPS_SHIFT = 1.5 * np.log(2.0) + 0.75


def _require_nondegenerate(crit: SpikeConfiguration) -> None:
    if crit.nondegenerate is None or crit.theta is None:
        raise DegenerateCriticalPoint("critical point is not classified", configuration=crit)
    if not crit.nondegenerate:
        raise DegenerateCriticalPoint(
            "predictions need a nondegenerate critical point", configuration=crit
        )


def predict(crit: SpikeConfiguration, p: float) -> PredictionSet:
    """Асимптотические предсказания для k-спайкового решения в точке crit."""
    p = check_exponent(p)
    _require_nondegenerate(crit)
    k = crit.k
    psi = crit.psi_parts
    log_eps_p = -p / 4.0 - LOG_EPS_SHIFT
    eps_p = float(np.exp(log_eps_p))
    eps_pred = np.exp(log_eps_p - 2.0 * np.pi * psi)
    morse = k + int(crit.morse)
    return PredictionSet(
        p=p,
        k=k,
        eps_pred=eps_pred.tolist(),
        eps_ratio=np.exp(2.0 * np.pi * (psi[0] - psi)).tolist(),
        eps_p=eps_p,
        peak_pred=SQRT_E,
        energy_pred=8.0 * np.pi * np.e * k,
        lambda_low=1.0 / p,
        lambda_mid=(1.0 + 24.0 * np.pi * eps_p**2 * np.asarray(crit.theta)).tolist(),
        lambda_top=1.0 + 6.0 / p,
        morse_pred=morse,
        degree_pred=-1 if morse % 2 else 1,
    )


def reduced_map(
    crit: SpikeConfiguration,
    p: float,
    alpha: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    B̃(α, ξ) = ((α_j − α_j^p)·8π√e/p, (64π²e/p²)·∇Ψ_k(ξ)), его якобиан
    blockdiag((1 − pα_j^{p−1})·8π√e/p, (64π²e/p²)·D²Ψ_k) и знак определителя.
    """
    p = check_exponent(p)
    k = crit.k
    alpha = np.ones(k) if alpha is None else np.asarray(alpha, dtype=float)
    scale_alpha = 8.0 * np.pi * SQRT_E / p
    scale_xi = 64.0 * np.pi**2 * np.e / p**2
    values = np.concatenate([(alpha - alpha**p) * scale_alpha, scale_xi * crit.grad])

    jac = np.zeros((3 * k, 3 * k))
    jac[:k, :k] = np.diag((1.0 - p * alpha ** (p - 1.0)) * scale_alpha)
    jac[k:, k:] = scale_xi * crit.hess
    sign, _ = np.linalg.slogdet(jac)
    return values, jac, int(sign)
