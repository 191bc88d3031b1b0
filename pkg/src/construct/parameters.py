from typing import Optional

import numpy as np
from omegaconf import DictConfig

from src.core.exceptions import InvalidExponent, NoConvergence, PointsTooClose
from src.core.schemas import ProfileTable, SpikeParameters
from src.domain import GreenFunction
from src.utils.logger import get_logger

LOG_64 = np.log(64.0)


def check_exponent(p: float) -> float:
    p = float(p)
    if not np.isfinite(p) or p <= 1.0:
        raise InvalidExponent(f"p must be > 1, got {p}")
    return p


def limit_mu_bar(psi_parts: np.ndarray, c0: float = 12.0) -> np.ndarray:
    """Предел μ̄_j при p → ∞: exp(−(2πΨ_{k,j} + (3/2)log 2 + C0/16))."""
    return np.exp(-(2.0 * np.pi * np.asarray(psi_parts) + 1.5 * np.log(2.0) + c0 / 16.0))


class ParameterSolver:
    """
    Система для масштабов μ̄_j (s_j = log μ̄_j, log ε̄_j = s_j − p/4):

        F_j = −log 64 − 4s_j − 8πc·H(ξ_j, ξ_j) + (C0 + C1/p)(s_j − p/4)/p
              + 8πc Σ_{l≠j} e^{(2/(p−1))(s_j − s_l)} G(ξ_j, ξ_l) − (B0/p + B1/p²),

    c = 1 − C0/(4p) − C1/(4p²). Последнее слагаемое отключается флагом
    construct.log_moment_correction.
    """

    def __init__(self, green: GreenFunction, cfg: DictConfig):
        self.logger = get_logger(self.__class__.__name__)
        self.green = green
        cc = cfg.construct
        self.newton_tol = float(cc.newton_tol)
        self.max_iter = int(cc.max_iter)
        self.log_moment_correction = bool(cc.log_moment_correction)
        self.min_separation = float(cfg.kirchhoff.min_separation) * green.domain.diameter

    def _geometry(self, xi: np.ndarray):
        k = xi.shape[0]
        robin = np.array([self.green.robin_value(x) for x in xi])
        g = np.zeros((k, k))
        for j in range(k):
            for m in range(j + 1, k):
                dist = float(np.linalg.norm(xi[j] - xi[m]))
                if dist < self.min_separation:
                    raise PointsTooClose(f"|ξ_{j} − ξ_{m}| = {dist:.3e}")
                g[j, m] = g[m, j] = self.green.green(xi[j], xi[m]).value
        return robin, g

    def _coefficients(self, table: ProfileTable, p: float) -> dict:
        c = 1.0 - table.c0 / (4.0 * p) - table.c1 / (4.0 * p**2)
        shift = table.b0 / p + table.b1 / p**2 if self.log_moment_correction else 0.0
        return {"c": c, "a": (table.c0 + table.c1 / p) / p, "shift": shift}

    @staticmethod
    def residual(s: np.ndarray, p: float, robin: np.ndarray, g: np.ndarray, coef: dict):
        """F(s) и якобиан ∂F/∂s."""
        k = s.size
        c, a = coef["c"], coef["a"]
        q = 2.0 / (p - 1.0)
        coupling = np.exp(q * (s[:, None] - s[None, :])) * g
        np.fill_diagonal(coupling, 0.0)
        F = (
            -LOG_64
            - 4.0 * s
            - 8.0 * np.pi * c * robin
            + a * (s - p / 4.0)
            + 8.0 * np.pi * c * coupling.sum(axis=1)
            - coef["shift"]
        )
        jac = -8.0 * np.pi * c * q * coupling
        jac[np.diag_indices(k)] = -4.0 + a + 8.0 * np.pi * c * q * coupling.sum(axis=1)
        return F, jac

    def closed_form_single(self, table: ProfileTable, xi: np.ndarray, p: float) -> float:
        """При k = 1 система линейна по s: решение в явном виде."""
        p = check_exponent(p)
        coef = self._coefficients(table, p)
        robin = self.green.robin_value(np.asarray(xi, dtype=float).reshape(2))
        numerator = LOG_64 + 8.0 * np.pi * coef["c"] * robin + coef["a"] * p / 4.0 + coef["shift"]
        return float(np.exp(numerator / (coef["a"] - 4.0)))

    def solve_F(
        self,
        table: ProfileTable,
        xi: np.ndarray,
        p: float,
        alpha: Optional[np.ndarray] = None,
        initial: Optional[np.ndarray] = None,
    ) -> SpikeParameters:
        p = check_exponent(p)
        xi = np.asarray(xi, dtype=float).reshape(-1, 2)
        self.green.domain.require_interior(xi)
        k = xi.shape[0]
        robin, g = self._geometry(xi)
        coef = self._coefficients(table, p)

        if initial is None:
            psi_parts = robin - (g.sum(axis=1))
            s = np.log(limit_mu_bar(psi_parts, table.c0))
        else:
            s = np.log(np.asarray(initial, dtype=float))

        F, jac = self.residual(s, p, robin, g, coef)
        for iteration in range(self.max_iter):
            norm = float(np.max(np.abs(F)))
            self.logger.debug(f"F-system iter {iteration}: |F| = {norm:.3e}")
            if norm < self.newton_tol:
                break
            step = np.linalg.solve(jac, -F)
            t = 1.0
            while t > 1e-6:
                trial = s + t * step
                F_trial, jac_trial = self.residual(trial, p, robin, g, coef)
                if np.max(np.abs(F_trial)) < norm:
                    break
                t *= 0.5
            else:
                raise NoConvergence(f"F-system line search failed at |F| = {norm:.3e}")
            s, F, jac = trial, F_trial, jac_trial
        else:
            norm = float(np.max(np.abs(F)))
            if norm >= self.newton_tol:
                raise NoConvergence(f"F-system: |F| = {norm:.3e} after {self.max_iter} iterations")

        params = SpikeParameters(
            p=p,
            xi=xi,
            mu_bar=np.exp(s),
            alpha=np.ones(k) if alpha is None else np.asarray(alpha, dtype=float),
            f_residual=float(np.max(np.abs(F))),
        )
        self.logger.info(
            f"F-system p={p:g}, k={k}: μ̄={np.round(params.mu_bar, 10).tolist()}, "
            f"|F|={params.f_residual:.2e}"
        )
        return params
