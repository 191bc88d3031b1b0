from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse.linalg as spla
from omegaconf import DictConfig
from scipy.spatial import cKDTree

from src.core.exceptions import NegativeSolution, NewtonDiverged
from src.core.schemas import ApproxSolution, DiscreteSolution
from src.pde.fem import P1Space, positive_power
from src.pde.mesh import Mesh
from src.utils.logger import get_logger

InitFactory = Callable[[float], ApproxSolution]


class LaneEmdenSolver:
    """
    Демпфированный Ньютон для P1-задачи K u = ∫u^p λ_i, u = 0 на границе.
    Невязка измеряется в двойственной энергетической норме sqrt(FᵀK⁻¹F).
    """

    def __init__(self, mesh: Mesh, cfg: DictConfig):
        self.logger = get_logger(self.__class__.__name__)
        self.mesh = mesh
        self.space = P1Space(mesh)
        sc = cfg.solver
        self.newton_tol = float(sc.newton_tol)
        self.max_iter = int(sc.max_iter)
        self.min_damping = float(sc.min_damping)
        self.continuation = bool(sc.continuation)
        self.continuation_steps = int(sc.continuation_steps)
        self.u_floor = float(sc.u_floor)
        self.positivity_tol = float(sc.positivity_tol)

        self.interior = mesh.interior
        self.K_II = self.space.stiffness[self.interior][:, self.interior].tocsc()
        self._K_lu = spla.splu(self.K_II)
        self._node_tree = cKDTree(mesh.nodes)

    # -------------------------------------------------------------- discrete operators

    def residual(self, u: np.ndarray, p: float) -> np.ndarray:
        rhs = self.space.load(positive_power(self.space.at_quad(u), p, self.u_floor))
        return (self.space.stiffness @ u - rhs)[self.interior]

    def jacobian(self, u: np.ndarray, p: float):
        weight = p * positive_power(self.space.at_quad(u), p - 1.0, self.u_floor)
        mass = self.space.weighted_mass(weight)[self.interior][:, self.interior]
        return (self.K_II - mass).tocsc()

    def dual_norm(self, F: np.ndarray) -> float:
        return float(np.sqrt(max(F @ self._K_lu.solve(F), 0.0)))

    # -------------------------------------------------------------- Newton

    def newton(self, u0: np.ndarray, p: float) -> Tuple[np.ndarray, float, int]:
        u = np.array(u0, dtype=float)
        u[self.mesh.boundary] = 0.0
        F = self.residual(u, p)
        norm = self.dual_norm(F)
        for iteration in range(self.max_iter):
            self.logger.debug(f"Newton p={p:g} iter {iteration}: |F|* = {norm:.3e}")
            if norm < self.newton_tol:
                return u, norm, iteration
            try:
                delta = spla.spsolve(self.jacobian(u, p), -F)
            except RuntimeError as e:
                raise NewtonDiverged(f"p={p:g}: singular Jacobian ({e})") from e
            if not np.all(np.isfinite(delta)):
                raise NewtonDiverged(f"p={p:g}: non-finite Newton step")
            t = 1.0
            while t >= self.min_damping:
                trial = u.copy()
                trial[self.interior] += t * delta
                F_trial = self.residual(trial, p)
                norm_trial = self.dual_norm(F_trial)
                if np.isfinite(norm_trial) and norm_trial < (1.0 - 1e-4 * t) * norm:
                    break
                t *= 0.5
            else:
                raise NewtonDiverged(
                    f"p={p:g}: damping below {self.min_damping:g} at |F|* = {norm:.3e}; "
                    "try a smaller p step"
                )
            u, F, norm = trial, F_trial, norm_trial
        if norm < self.newton_tol:
            return u, norm, self.max_iter
        raise NewtonDiverged(f"p={p:g}: |F|* = {norm:.3e} after {self.max_iter} iterations")

    def check_positive(self, u: np.ndarray, p: float) -> None:
        low = float(np.min(u[self.interior]))
        if low < -self.positivity_tol * float(np.max(u)):
            raise NegativeSolution(f"p={p:g}: min u = {low:.3e}, initial guess too far")

    # -------------------------------------------------------------- public

    def solve(
        self,
        p: float,
        init: ApproxSolution,
        init_factory: Optional[InitFactory] = None,
    ) -> DiscreteSolution:
        """
        Ньютон из W_{α,p}. При неудаче и включенном продолжении: решение при p/2
        и геометрические шаги к p, начальное приближение
        W_{p_i} + (u_{p_{i−1}} − W_{p_{i−1}}).
        """
        path = [p]
        try:
            u, norm, iterations = self.newton(init.field, p)
            self.check_positive(u, p)
        except (NewtonDiverged, NegativeSolution) as e:
            if not (self.continuation and init_factory is not None):
                raise
            self.logger.warning(f"Direct Newton failed ({e}); continuation from p={p / 2:g}")
            u, norm, iterations, path = self._continue(p, init_factory, depth=0)
        solution = self._measure(u, p, norm, iterations, init.params.xi)
        solution.p_path = path
        self.logger.info(
            f"Lane-Emden p={p:g}: |F|*={norm:.2e}, iters={iterations}, "
            f"peaks={np.round(solution.peak_values, 8).tolist()}, energy={solution.energy:.6f}"
        )
        return solution

    def _continue(self, p: float, init_factory: InitFactory, depth: int):
        p_low = 0.5 * p
        if depth >= 4 or p_low <= 1.5:
            raise NewtonDiverged(f"continuation exhausted below p={p:g}")
        start = init_factory(p_low)
        try:
            u, norm, iterations = self.newton(start.field, p_low)
            self.check_positive(u, p_low)
            path = [p_low]
        except (NewtonDiverged, NegativeSolution):
            u, norm, iterations, path = self._continue(p_low, init_factory, depth + 1)

        previous_w = start.field
        steps = p_low * (p / p_low) ** (np.arange(1, self.continuation_steps + 1) / self.continuation_steps)
        for p_step in steps:
            approx = init_factory(float(p_step))
            guess = approx.field + (u - previous_w)
            u, norm, iterations = self.newton(guess, float(p_step))
            self.check_positive(u, float(p_step))
            previous_w = approx.field
            path.append(float(p_step))
        return u, norm, iterations, path

    # -------------------------------------------------------------- peaks

    def locate_peak(self, u: np.ndarray, center: np.ndarray, radius: float) -> Tuple[np.ndarray, float]:
        """Максимум u в B_radius(center): узел максимума и квадратичная подгонка по 6 ближайшим узлам."""
        ball = self.mesh.nodes_within(center, radius)
        if ball.size == 0:
            _, nearest = self._node_tree.query(center)
            ball = np.array([nearest])
        top = ball[np.argmax(u[ball])]
        x0 = self.mesh.nodes[top]
        _, stencil = self._node_tree.query(x0, k=6)
        d = self.mesh.nodes[stencil] - x0
        scale = float(np.max(np.linalg.norm(d, axis=-1)))
        if scale == 0.0:
            return x0, float(u[top])
        z = d / scale
        A = np.stack([np.ones(6), z[:, 0], z[:, 1], z[:, 0] ** 2, z[:, 0] * z[:, 1], z[:, 1] ** 2], axis=-1)
        coef, *_ = np.linalg.lstsq(A, u[stencil], rcond=None)
        hess = np.array([[2.0 * coef[3], coef[4]], [coef[4], 2.0 * coef[5]]])
        if np.all(np.linalg.eigvalsh(hess) < 0.0):
            shift = np.linalg.solve(hess, -coef[1:3])
            if np.linalg.norm(shift) <= 1.0:
                value = coef[0] + coef[1:3] @ shift + 0.5 * shift @ hess @ shift
                return x0 + scale * shift, float(max(value, u[top]))
        return x0, float(u[top])

    def _measure(self, u, p, norm, iterations, centers) -> DiscreteSolution:
        radii = self.mesh.rosette_radii
        peaks, values = [], []
        for j, center in enumerate(np.atleast_2d(centers)):
            radius = float(radii[j]) if j < radii.size else 0.1 * float(np.ptp(self.mesh.nodes[:, 0]))
            x, value = self.locate_peak(u, center, radius)
            peaks.append(x)
            values.append(value)
        values = np.asarray(values)
        log_eps = -0.5 * (np.log(p) + (p - 1.0) * np.log(values))
        return DiscreteSolution(
            u=u,
            p=p,
            residual_norm=norm,
            iterations=iterations,
            peak_points=np.asarray(peaks),
            peak_values=values,
            eps_measured=np.exp(log_eps),
            energy=p * self.space.energy(u),
        )
