import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from omegaconf import DictConfig

from src.core.exceptions import EigenSolverFailed, WeightDegenerate
from src.core.schemas import DiscreteSolution, SpectrumReport
from src.pde.fem import P1Space, positive_power
from src.utils.logger import get_logger


class SpectrumSolver:
    """
    Обобщенная задача K v = λ M_w v, M_w = ∫ p u^{p−1} λ_i λ_j (внутренние узлы).
    Lanczos со сдвигом-обращением в σ = 0 и σ = 1; объединенные векторы
    проходят шаг Рэлея-Ритца, поэтому M_w-ортогональность точная до округления.
    """

    def __init__(self, space: P1Space, cfg: DictConfig):
        self.logger = get_logger(self.__class__.__name__)
        self.space = space
        spc = cfg.spectrum
        self.shifts = [float(s) for s in spc.shifts]
        self.tol = float(spc.tol)
        self.cluster_tol = float(spc.cluster_tol)
        self.u_floor = float(cfg.solver.u_floor)
        self.interior = space.mesh.interior

    def weighted_mass(self, sol: DiscreteSolution):
        weight = sol.p * positive_power(self.space.at_quad(sol.u), sol.p - 1.0, self.u_floor)
        if not np.any(weight > 0.0):
            raise WeightDegenerate(
                f"p={sol.p:g}: p·u^(p−1) underflows at every quadrature point"
            )
        return self.space.weighted_mass(weight)[self.interior][:, self.interior].tocsc()

    def eigen_spectrum(self, sol: DiscreteSolution, count: int) -> SpectrumReport:
        K = self.space.stiffness[self.interior][:, self.interior].tocsc()
        M = self.weighted_mass(sol)
        n = K.shape[0]
        count = min(count, n - 2)

        blocks = []
        for sigma in self.shifts:
            try:
                _, vectors = spla.eigsh(K, k=count, M=M, sigma=sigma, which="LM", tol=self.tol)
            except (spla.ArpackNoConvergence, spla.ArpackError, RuntimeError) as e:
                raise EigenSolverFailed(f"shift σ={sigma:g}: {e}") from e
            blocks.append(vectors)
        basis = np.concatenate(blocks, axis=1)

        values, vectors = self._rayleigh_ritz(K, M, basis)
        values, vectors = values[:count], vectors[:, :count]
        count = values.size

        gram = vectors.T @ (M @ vectors)
        orthogonality = float(np.max(np.abs(gram - np.eye(count))))
        full = np.zeros((self.space.n, count))
        full[self.interior] = vectors

        morse = int(np.sum(values < 1.0))
        morse0 = int(np.sum(values <= 1.0 + self.cluster_tol))
        self.logger.info(
            f"Spectrum p={sol.p:g}: λ={np.round(values, 8).tolist()}, m={morse}, m0={morse0}"
        )
        return SpectrumReport(
            eigenvalues=values,
            eigenvectors=full,
            morse=morse,
            morse0=morse0,
            orthogonality=orthogonality,
        )

    @staticmethod
    def _rayleigh_ritz(K, M, basis: np.ndarray):
        Kr = basis.T @ (K @ basis)
        Mr = basis.T @ (M @ basis)
        Kr, Mr = 0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T)
        s, Q = sla.eigh(Mr)
        keep = s > 1e-12 * s.max()
        T = Q[:, keep] / np.sqrt(s[keep])
        values, Y = sla.eigh(T.T @ Kr @ T)
        return values, basis @ (T @ Y)
