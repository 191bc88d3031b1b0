from typing import Callable

import numpy as np
from omegaconf import DictConfig
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from src.core.exceptions import SolverDiverged
from src.domain.geometry import DomainModel
from src.utils.logger import get_logger

INV_2PI = 1.0 / (2.0 * np.pi)


class BoundaryIntegralSolver:
    """
    Внутренняя задача Дирихле для Лапласа через потенциал двойного слоя.

    Плотность φ на узлах θ_j = 2πj/N решает (−½I + K)φ = g, где
    k(x, y) = (1/2π) n·(x−y)/|x−y|² с ненормированной нормалью n = (z2', −z1').
    Матрица факторизуется один раз, дальше только lu_solve.
    """

    def __init__(self, domain: DomainModel, nodes: int, chunk: int = 2048):
        self.logger = get_logger(self.__class__.__name__)
        self.domain = domain
        self.nodes = int(nodes)
        self.chunk = int(chunk)
        self.weight = 2.0 * np.pi / self.nodes

        z, dz, ddz = domain.boundary(self.nodes)
        self.points = z
        self.normals = np.stack([dz[:, 1], -dz[:, 0]], axis=-1)
        self._lu = self._factorize(z, dz, ddz)

    def _factorize(self, z: np.ndarray, dz: np.ndarray, ddz: np.ndarray):
        d = z[:, None, :] - z[None, :, :]
        r2 = np.sum(d**2, axis=-1)
        np.fill_diagonal(r2, 1.0)
        kernel = INV_2PI * np.einsum("ijk,jk->ij", d, self.normals) / r2
        speed2 = np.sum(dz**2, axis=-1)
        diag = -0.5 * INV_2PI * (dz[:, 0] * ddz[:, 1] - dz[:, 1] * ddz[:, 0]) / speed2
        np.fill_diagonal(kernel, diag)
        matrix = -0.5 * np.eye(self.nodes) + self.weight * kernel
        try:
            lu = lu_factor(matrix, check_finite=True)
        except (LinAlgError, ValueError) as e:
            raise SolverDiverged(f"Nyström factorization failed: {e}") from e
        if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) < 1e-14:
            raise SolverDiverged("Nyström matrix is numerically singular")
        return lu

    def solve_density(self, data: np.ndarray) -> np.ndarray:
        """Плотности для одного или нескольких векторов граничных данных (N,) / (N, m)."""
        density = lu_solve(self._lu, data)
        if not np.all(np.isfinite(density)):
            raise SolverDiverged("non-finite density in Nyström solve")
        return density

    def evaluate(self, targets: np.ndarray, density: np.ndarray, order: int = 0):
        """
        Значение, градиент (order ≥ 1) и гессиан (order = 2) потенциала в точках.
        Используется вычитание φ(y*) в ближайшем узле: ∫k = −1 внутри области.
        Возвращает кортеж массивов формы (M, m), (M, 2, m), (M, 2, 2, m).
        """
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        dens = density[:, None] if density.ndim == 1 else density
        m = dens.shape[1]
        n_t = targets.shape[0]
        values = np.empty((n_t, m))
        grads = np.empty((n_t, 2, m)) if order >= 1 else None
        hessians = np.empty((n_t, 2, 2, m)) if order >= 2 else None

        chunk = max(1, min(self.chunk, 2**21 // self.nodes))
        for start in range(0, n_t, chunk):
            sl = slice(start, min(start + chunk, n_t))
            d = targets[sl, None, :] - self.points[None, :, :]
            r2 = np.sum(d**2, axis=-1)
            nearest = np.argmin(r2, axis=1)
            singular = r2 < 1e-28
            r2 = np.where(singular, 1.0, r2)
            nd = np.einsum("tjk,jk->tj", d, self.normals)
            # (φ_j − φ_*) для каждой точки
            shifted = dens[None, :, :] - dens[nearest][:, None, :]

            k = self.weight * INV_2PI * np.where(singular, 0.0, nd / r2)
            values[sl] = np.einsum("tj,tjm->tm", k, shifted) - dens[nearest]
            if order >= 1:
                inv2 = 1.0 / r2
                inv4 = inv2**2
                gk = self.weight * INV_2PI * (
                    self.normals[None, :, :] * inv2[..., None]
                    - 2.0 * (nd * inv4)[..., None] * d
                )
                gk = np.where(singular[..., None], 0.0, gk)
                grads[sl] = np.einsum("tja,tjm->tam", gk, shifted)
            if order >= 2:
                inv6 = inv4 * inv2
                n = self.normals[None, :, :]
                outer_nd = n[..., :, None] * d[..., None, :]
                hk = -2.0 * (outer_nd + np.swapaxes(outer_nd, -1, -2)) * inv4[..., None, None]
                hk -= 2.0 * (nd * inv4)[..., None, None] * np.eye(2)
                hk += 8.0 * (nd * inv6)[..., None, None] * (d[..., :, None] * d[..., None, :])
                hk = self.weight * INV_2PI * np.where(singular[..., None, None], 0.0, hk)
                hessians[sl] = np.einsum("tjab,tjm->tabm", hk, shifted)
        return values, grads, hessians


class HarmonicFunction:
    """Гармоническое продолжение граничных данных g (результат harmonic_solve)."""

    def __init__(self, solver: BoundaryIntegralSolver, density: np.ndarray):
        self.solver = solver
        self.density = density

    def __call__(self, points: np.ndarray) -> np.ndarray:
        values, _, _ = self.solver.evaluate(points, self.density, order=0)
        return values[:, 0]

    def gradient(self, points: np.ndarray) -> np.ndarray:
        _, grads, _ = self.solver.evaluate(points, self.density, order=1)
        return grads[:, :, 0]

    def hessian(self, points: np.ndarray) -> np.ndarray:
        _, _, hessians = self.solver.evaluate(points, self.density, order=2)
        return hessians[..., 0]


def build_refined_solver(
    domain: DomainModel, cfg: DictConfig, trial_data: Callable[[np.ndarray], np.ndarray]
) -> BoundaryIntegralSolver:
    """
    Начинает с domain.quadrature_nodes узлов и удваивает, пока значение в центре
    для данных `trial_data` меняется сильнее refine_tol (не больше max_nodes).
    """
    logger = get_logger("BoundaryIntegralSolver")
    nodes = int(domain.quadrature_nodes)
    max_nodes = int(cfg.domain.max_nodes)
    tol = float(cfg.domain.refine_tol)
    chunk = int(cfg.domain.chunk)
    target = np.array([domain.center])

    solver = BoundaryIntegralSolver(domain, nodes, chunk)
    previous = HarmonicFunction(solver, solver.solve_density(trial_data(solver.points)))(target)[0]
    while nodes < max_nodes:
        candidate = BoundaryIntegralSolver(domain, 2 * nodes, chunk)
        value = HarmonicFunction(
            candidate, candidate.solve_density(trial_data(candidate.points))
        )(target)[0]
        change = abs(value - previous)
        solver, nodes, previous = candidate, 2 * nodes, value
        if change < tol:
            break
    logger.info(f"Nyström solver for {domain.name}: {nodes} nodes")
    return solver
