from typing import List, Optional, Sequence

import numpy as np
from omegaconf import DictConfig

from src.core.exceptions import (
    DegenerateCriticalPoint,
    NoConvergence,
    PointOutsideDomain,
    PointsTooClose,
)
from src.core.schemas import SpikeConfiguration
from src.domain import GreenFunction
from src.utils.logger import get_logger


def canonical_order(points: np.ndarray) -> np.ndarray:
    """Перестановка точек в лексикографическом порядке (x, затем y)."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.lexsort((points[:, 1], points[:, 0]))


class KirchhoffRouth:
    """
    Функция Кирхгофа-Рауса
        Ψ_k(a) = Σ_j [R(a_j) − Σ_{m≠j} G(a_j, a_m)],
    ее градиент и гессиан по 2k координатам, поиск невырожденных
    критических точек и их морсовские данные.
    """

    def __init__(self, green: GreenFunction, cfg: DictConfig):
        self.logger = get_logger(self.__class__.__name__)
        self.green = green
        self.domain = green.domain
        kc = cfg.kirchhoff
        diameter = self.domain.diameter
        self.barrier = float(kc.barrier) * diameter
        self.min_separation = float(kc.min_separation) * diameter
        self.newton_tol = float(kc.newton_tol)
        self.max_iter = int(kc.max_iter)
        self.morse_tol = float(kc.morse_tol)
        self.dedup_tol = float(kc.dedup_tol)

    # -------------------------------------------------------------- Ψ_k

    def _validate(self, points: np.ndarray) -> None:
        if not self.domain.contains(points).all():
            raise PointOutsideDomain(f"points {points.tolist()} leave the domain")
        k = points.shape[0]
        for j in range(k):
            for m in range(j + 1, k):
                dist = float(np.linalg.norm(points[j] - points[m]))
                if dist < self.min_separation:
                    raise PointsTooClose(
                        f"|a_{j} − a_{m}| = {dist:.3e} < {self.min_separation:.3e}"
                    )

    def psi_eval(self, points: np.ndarray) -> SpikeConfiguration:
        """Значение, градиент и гессиан Ψ_k в точке a = (a_1, ..., a_k)."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        self._validate(points)
        k = points.shape[0]

        parts = np.zeros(k)
        grad = np.zeros((k, 2))
        hess = np.zeros((k, 2, k, 2))
        for j in range(k):
            robin = self.green.robin(points[j])
            parts[j] = robin.value
            grad[j] = robin.grad
            hess[j, :, j, :] = robin.hess
            for m in range(k):
                if m == j:
                    continue
                g = self.green.green(points[j], points[m])
                parts[j] -= g.value
                # G симметрична, поэтому оба слагаемых с a_j дают 2∂G(a_j, a_m)
                grad[j] -= 2.0 * g.grad_x
                hess[j, :, j, :] -= 2.0 * g.hess_xx
                hess[j, :, m, :] -= 2.0 * g.hess_xy

        hess = hess.reshape(2 * k, 2 * k)
        return SpikeConfiguration(
            k=k,
            points=points,
            psi=float(parts.sum()),
            psi_parts=parts,
            grad=grad.reshape(-1),
            hess=0.5 * (hess + hess.T),
        )

    # -------------------------------------------------------------- Morse data

    def classify(self, conf: SpikeConfiguration) -> SpikeConfiguration:
        """Заполняет собственные числа гессиана, m, m_0, θ и признак невырожденности."""
        eigenvalues = np.linalg.eigvalsh(conf.hess)
        tol = self.morse_tol * max(float(np.linalg.norm(conf.hess, 2)), 1e-300)
        negative = int(np.sum(eigenvalues < -tol))
        zero = int(np.sum(np.abs(eigenvalues) <= tol))
        conf.hess_eigenvalues = eigenvalues
        conf.morse = negative
        conf.morse0 = negative + zero
        conf.nondegenerate = zero == 0
        conf.theta = self._theta(conf)
        return conf

    @staticmethod
    def _theta(conf: SpikeConfiguration) -> np.ndarray:
        weights = np.repeat(np.exp(-2.0 * np.pi * conf.psi_parts), 2)
        scaled = weights[:, None] * conf.hess * weights[None, :]
        return np.linalg.eigvalsh(0.5 * (scaled + scaled.T))

    def theta_spectrum(self, conf: SpikeConfiguration) -> np.ndarray:
        """θ_1 ≤ ... ≤ θ_{2k}: спектр H·D²Ψ_k·H, H = diag(e^{−2πΨ_{k,j}}) (каждое дважды)."""
        if conf.nondegenerate is None:
            conf = self.classify(conf)
        if not conf.nondegenerate:
            raise DegenerateCriticalPoint(
                "θ spectrum requested at a degenerate critical point", configuration=conf
            )
        return self._theta(conf)

    def degree_sign(self, conf: SpikeConfiguration) -> int:
        """(−1)^{k+m} для невырожденной критической точки."""
        if conf.nondegenerate is None:
            conf = self.classify(conf)
        if not conf.nondegenerate:
            raise DegenerateCriticalPoint(
                "degree is undefined at a degenerate critical point", configuration=conf
            )
        return -1 if (conf.k + conf.morse) % 2 else 1

    # -------------------------------------------------------------- Newton

    def admissible(self, points: np.ndarray) -> bool:
        if not self.domain.contains(points).all():
            return False
        if np.min(self.domain.boundary_distance(points)) < self.barrier:
            return False
        diffs = points[:, None, :] - points[None, :, :]
        dist = np.sqrt(np.sum(diffs**2, axis=-1)) + np.eye(points.shape[0]) * np.inf
        return bool(np.min(dist) >= self.min_separation)

    def newton(self, seed: np.ndarray) -> SpikeConfiguration:
        """
        Ньютон на ∇Ψ_k = 0 с дроблением шага по ‖∇Ψ_k‖.
        Итерации, подходящие к границе ближе барьера, отбрасываются.
        """
        points = np.asarray(seed, dtype=float).reshape(-1, 2)
        if not self.admissible(points):
            raise NoConvergence(f"seed {points.tolist()} violates the boundary barrier")
        conf = self.psi_eval(points)
        for iteration in range(self.max_iter):
            norm = conf.grad_norm
            self.logger.debug(f"Newton iter {iteration}: |∇Ψ| = {norm:.3e}")
            if norm < self.newton_tol:
                return conf
            try:
                step = np.linalg.solve(conf.hess, -conf.grad)
            except np.linalg.LinAlgError:
                step = -conf.grad
            t = 1.0
            accepted = None
            for _ in range(30):
                trial = conf.points + t * step.reshape(-1, 2)
                if self.admissible(trial):
                    candidate = self.psi_eval(trial)
                    if candidate.grad_norm < (1.0 - 1e-4 * t) * norm:
                        accepted = candidate
                        break
                t *= 0.5
            if accepted is None:
                raise NoConvergence(
                    f"line search failed at |∇Ψ| = {norm:.3e} after {iteration} iterations"
                )
            conf = accepted
        if conf.grad_norm < self.newton_tol:
            return conf
        raise NoConvergence(
            f"|∇Ψ| = {conf.grad_norm:.3e} after {self.max_iter} Newton iterations"
        )

    def find_all_critical(self, seeds: Sequence[np.ndarray]) -> List[SpikeConfiguration]:
        """
        Ньютон из каждого начального приближения. Сходящиеся результаты
        приводятся к лексикографическому порядку точек и дедуплицируются
        (с точностью до перестановки); порядок: порядок первого появления.
        """
        found: List[SpikeConfiguration] = []
        for index, seed in enumerate(seeds):
            try:
                conf = self.newton(seed)
            except (NoConvergence, PointsTooClose, PointOutsideDomain) as e:
                self.logger.debug(f"Seed {index} rejected: {e}")
                continue
            order = canonical_order(conf.points)
            conf = self.psi_eval(conf.points[order])
            if any(
                np.max(np.abs(conf.points - other.points)) < self.dedup_tol for other in found
            ):
                continue
            found.append(self.classify(conf))
        return found

    def find_critical(
        self, k: int, seeds: Sequence[np.ndarray], strict: bool = False
    ) -> SpikeConfiguration:
        """
        Первая (в порядке начальных приближений) критическая точка, невырожденные
        предпочтительнее. Вырожденная точка возвращается с nondegenerate=False,
        либо (strict=True) отдается в исключении DegenerateCriticalPoint.
        """
        seeds = [np.asarray(s, dtype=float).reshape(-1, 2) for s in seeds]
        if not seeds:
            raise NoConvergence("no starting configurations")
        if any(s.shape[0] != k for s in seeds):
            raise NoConvergence(f"every seed must contain exactly {k} points")

        found = self.find_all_critical(seeds)
        if not found:
            raise NoConvergence(f"Newton failed from all {len(seeds)} seeds (k={k})")
        best: Optional[SpikeConfiguration] = next(
            (c for c in found if c.nondegenerate), None
        )
        if best is None:
            best = found[0]
            self.logger.warning(
                f"Only degenerate critical points found for k={k}: "
                f"eigenvalues {np.round(best.hess_eigenvalues, 12).tolist()}"
            )
            if strict:
                raise DegenerateCriticalPoint("degenerate critical point", configuration=best)
        self.logger.info(
            f"Critical point k={k}: points={np.round(best.points, 8).tolist()}, "
            f"Ψ={best.psi:.10f}, m={best.morse}, m0={best.morse0}"
        )
        return best
