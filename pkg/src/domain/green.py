from typing import Callable, Optional, Tuple

import numpy as np
from omegaconf import DictConfig

from src.core.exceptions import CoincidentPoints, PointOutsideDomain
from src.core.schemas import GreenEval, RobinEval
from src.domain.geometry import DomainModel
from src.domain.nystrom import (
    INV_2PI,
    BoundaryIntegralSolver,
    HarmonicFunction,
    build_refined_solver,
)
from src.utils.logger import get_logger

INV_4PI = 0.5 * INV_2PI


def singular_parts(d: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Φ(d) = (1/2π)log(1/|d|), ∇Φ и D²Φ для массива разностей d = x − y (M, 2)."""
    r2 = np.sum(d**2, axis=-1)
    value = -0.5 * INV_2PI * np.log(r2)
    grad = -INV_2PI * d / r2[:, None]
    hess = -INV_2PI * (
        np.eye(2)[None] / r2[:, None, None]
        - 2.0 * d[:, :, None] * d[:, None, :] / (r2**2)[:, None, None]
    )
    return value, grad, hess


class RegularPart:
    """
    H(x, y) для фиксированного источника y и массива точек x.

    Все блоки: H, ∂H/∂x, ∂²H/∂x∂x, ∂H/∂y, ∂²H/∂x_i∂y_q.
    Для круга используются формулы через отраженную точку, иначе плотности
    Нистрема для данных (1/2π)log(1/|t−y|) и их производных по y.
    """

    def __init__(
        self, source: np.ndarray, solver: Optional[BoundaryIntegralSolver] = None
    ):
        self.source = np.asarray(source, dtype=float)
        self.solver = solver
        self._density = None
        if solver is not None:
            t = solver.points
            diff = t - self.source
            r2 = np.sum(diff**2, axis=-1)
            data = np.stack(
                [
                    -0.5 * INV_2PI * np.log(r2),
                    INV_2PI * diff[:, 0] / r2,
                    INV_2PI * diff[:, 1] / r2,
                ],
                axis=-1,
            )
            self._density = solver.solve_density(data)

    def blocks(self, targets: np.ndarray, order: int = 2) -> dict:
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if self.solver is None:
            return self._disc_blocks(targets)
        values, grads, hessians = self.solver.evaluate(targets, self._density, order=order)
        out = {
            "value": values[:, 0],
            "grad_y": values[:, 1:3],
        }
        if order >= 1:
            out["grad_x"] = grads[:, :, 0]
            out["hess_xy"] = grads[:, :, 1:3]
        if order >= 2:
            out["hess_xx"] = hessians[..., 0]
        return out

    def _disc_blocks(self, x: np.ndarray) -> dict:
        y = self.source
        yy = float(y @ y)
        xx = np.sum(x**2, axis=-1)
        q = 1.0 - 2.0 * x @ y + xx * yy
        qx = -2.0 * y[None, :] + 2.0 * yy * x
        qy = -2.0 * x + 2.0 * xx[:, None] * y[None, :]
        qxx = 2.0 * yy * np.eye(2)[None]
        qxy = -2.0 * np.eye(2)[None] + 4.0 * x[:, :, None] * y[None, None, :]
        q1 = q[:, None]
        q2 = (q**2)[:, None, None]
        return {
            "value": -INV_4PI * np.log(q),
            "grad_x": -INV_4PI * qx / q1,
            "grad_y": -INV_4PI * qy / q1,
            "hess_xx": -INV_4PI * (qxx / q[:, None, None] - qx[:, :, None] * qx[:, None, :] / q2),
            "hess_xy": -INV_4PI * (qxy / q[:, None, None] - qx[:, :, None] * qy[:, None, :] / q2),
        }


class GreenFunction:
    """
    Функция Грина задачи Дирихле G(x,y) = (1/2π)log(1/|x−y|) − H(x,y),
    функция Робена R(x) = H(x,x) и гармоническое продолжение граничных данных.
    """

    def __init__(self, domain: DomainModel, cfg: DictConfig):
        self.logger = get_logger(self.__class__.__name__)
        self.domain = domain
        self.cfg = cfg
        self.closed_form = domain.kind == "unit_disc" and not bool(
            cfg.domain.get("force_integral", False)
        )
        self.cutoff = float(cfg.domain.coincident_cutoff) * domain.diameter
        self.fd_step = float(cfg.domain.fd_step) * domain.diameter
        self.hessian_scheme = str(cfg.domain.get("hessian", "analytic"))
        self._solver: Optional[BoundaryIntegralSolver] = None

    @property
    def solver(self) -> BoundaryIntegralSolver:
        if self._solver is None:
            center = np.asarray(self.domain.center)
            # пробная точка смещена от центра: на круге данные log(1/|t−c|) постоянны
            trial_source = center + 0.3 * self.domain.radius(np.array([0.0]))[0] * np.array(
                [0.6, 0.8]
            )

            def trial_data(t: np.ndarray) -> np.ndarray:
                return -0.5 * INV_2PI * np.log(np.sum((t - trial_source) ** 2, axis=-1))

            self._solver = build_refined_solver(self.domain, self.cfg, trial_data)
        return self._solver

    # -------------------------------------------------------------- evaluators

    def regular_part(self, source: np.ndarray) -> RegularPart:
        self.domain.require_interior(source)
        return RegularPart(source, None if self.closed_form else self.solver)

    def green(self, x: np.ndarray, y: np.ndarray) -> GreenEval:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not self.domain.contains(np.stack([x, y])).all():
            raise PointOutsideDomain(f"x={x.tolist()}, y={y.tolist()}")
        if np.linalg.norm(x - y) < self.cutoff:
            raise CoincidentPoints(
                f"|x−y| = {np.linalg.norm(x - y):.3e} < {self.cutoff:.3e}; use robin()"
            )
        h = self.regular_part(y).blocks(x[None, :])
        phi, dphi, ddphi = singular_parts((x - y)[None, :])
        return GreenEval(
            value=float(phi[0] - h["value"][0]),
            grad_x=dphi[0] - h["grad_x"][0],
            grad_y=-dphi[0] - h["grad_y"][0],
            hess_xx=ddphi[0] - h["hess_xx"][0],
            hess_xy=-ddphi[0] - h["hess_xy"][0],
            h_value=float(h["value"][0]),
            h_grad_x=h["grad_x"][0],
            h_hess_xx=h["hess_xx"][0],
        )

    def green_many(self, targets: np.ndarray, source: np.ndarray, order: int = 1) -> dict:
        """G(x, y) и производные для массива x при фиксированном y (без проверок совпадения)."""
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        h = self.regular_part(source).blocks(targets, order=max(order, 1))
        phi, dphi, ddphi = singular_parts(targets - np.asarray(source)[None, :])
        out = {
            "value": phi - h["value"],
            "grad_x": dphi - h["grad_x"],
            "grad_y": -dphi - h["grad_y"],
            "hess_xy": -ddphi - h["hess_xy"],
        }
        if "hess_xx" in h:
            out["hess_xx"] = ddphi - h["hess_xx"]
        return out

    def robin(self, x: np.ndarray) -> RobinEval:
        """R(x) = H(x,x), ∇R = 2∂_xH, D²R = 2(H_xx + H_xy) на диагонали."""
        x = np.asarray(x, dtype=float)
        self.domain.require_interior(x)
        h = self.regular_part(x).blocks(x[None, :])
        grad = 2.0 * h["grad_x"][0]
        if self.hessian_scheme == "fd":
            hess = self._robin_hessian_fd(x)
        else:
            mixed = h["hess_xy"][0]
            hess = 2.0 * (h["hess_xx"][0] + 0.5 * (mixed + mixed.T))
        return RobinEval(value=float(h["value"][0]), grad=grad, hess=0.5 * (hess + hess.T))

    def robin_value(self, x: np.ndarray) -> float:
        return float(self.regular_part(x).blocks(np.asarray(x)[None, :], order=0)["value"][0])

    def _robin_hessian_fd(self, x: np.ndarray) -> np.ndarray:
        """Центральные разности 4-го порядка от аналитического ∇R."""
        step = self.fd_step
        hess = np.zeros((2, 2))
        for q in range(2):
            e = np.zeros(2)
            e[q] = step
            g = [
                2.0 * self.regular_part(x + c * e).blocks((x + c * e)[None, :], order=1)["grad_x"][0]
                for c in (-2.0, -1.0, 1.0, 2.0)
            ]
            hess[:, q] = (g[0] - 8.0 * g[1] + 8.0 * g[2] - g[3]) / (12.0 * step)
        return hess

    def harmonic_solve(self, g: Callable[[np.ndarray], np.ndarray]) -> HarmonicFunction:
        """Гармоническая функция с граничными значениями g (всегда через Нистрема)."""
        solver = self.solver
        data = np.asarray(g(solver.points), dtype=float)
        return HarmonicFunction(solver, solver.solve_density(data))
