from typing import List, Tuple

import numpy as np
from omegaconf import DictConfig

from src.construct import ParameterSolver, SpikeAssembler
from src.core.schemas import ApproxSolution, ProfileTable, SpikeParameters
from src.domain import DomainModel
from src.pde.fem import P1Space, positive_power
from src.pde.mesh import Mesh, MeshBuilder
from src.utils.logger import get_logger


class CenterRefiner:
    """
    Центры спайков при конечном p: нуль приведенного уравнения
    G_{j,h}(ξ) = ⟨F(W_ξ), ∂_h PW̄_{p,j}⟩, F = K W − ∫W₊^p λ_i (внутренние узлы).

    ∇Ψ_k(ξ_p) = O(1/p), поэтому ξ_p отходит от x_∞ на O(1/p) ≫ ε̄. Дискретное
    решение прилипает к центру розетки, так что пики грубого решения сдвиг не
    показывают. G(ξ) всегда считается на сетке с розетками в ξ: ошибка
    дискретизации ядра симметрична и в проекции на ∂_h сокращается.
    Ньютон-Бройден, начальный якобиан по конечным разностям, шаг принимается
    только при уменьшении |G|.
    """

    def __init__(
        self,
        builder: MeshBuilder,
        parameter_solver: ParameterSolver,
        assembler: SpikeAssembler,
        cfg: DictConfig,
    ):
        self.logger = get_logger(self.__class__.__name__)
        self.builder = builder
        self.parameter_solver = parameter_solver
        self.assembler = assembler
        cc = cfg.centering
        self.enabled = bool(cc.enabled)
        self.max_steps = int(cc.max_steps)
        self.tol = float(cc.tol)
        self.fd_step = float(cc.fd_step)
        self.max_move = float(cc.max_move)
        self.u_floor = float(cfg.solver.u_floor)

    def clearance(self, domain: DomainModel, xi: np.ndarray) -> float:
        gap = float(np.min(domain.boundary_distance(xi)))
        if xi.shape[0] > 1:
            dist = np.linalg.norm(xi[:, None, :] - xi[None, :, :], axis=-1)
            gap = min(gap, 0.5 * float(np.min(dist[np.triu_indices(xi.shape[0], 1)])))
        return gap

    def projection(
        self,
        domain: DomainModel,
        table: ProfileTable,
        xi: np.ndarray,
        p: float,
        resolution: float = 1.0,
    ) -> Tuple[np.ndarray, SpikeParameters, Mesh, ApproxSolution]:
        """G(ξ) (вектор 2k), параметры, сетка с розетками в ξ и W_ξ на ней."""
        params = self.parameter_solver.solve_F(table, xi, p)
        mesh = self.builder.build(domain, params.xi, params.eps_bar, resolution)
        space = P1Space(mesh)
        approx = self.assembler.assemble(params, mesh.nodes, mesh.boundary)
        W = approx.field
        F = space.stiffness @ W - space.load(positive_power(space.at_quad(W), p, self.u_floor))
        F[mesh.boundary] = 0.0
        values: List[float] = []
        for j in range(params.k):
            grad = space.recovered_gradient(approx.components[j])
            values.extend(float(F @ grad[:, h]) for h in range(2))
        return np.asarray(values), params, mesh, approx

    def refine(
        self,
        domain: DomainModel,
        table: ProfileTable,
        xi: np.ndarray,
        p: float,
        resolution: float = 1.0,
    ) -> Tuple[SpikeParameters, Mesh, ApproxSolution, List[float]]:
        """
        Возвращает параметры, сетку и W в найденных центрах и историю |G|∞.
        При выключенной настройке: центры x_∞ без итераций.
        """
        xi = np.asarray(xi, dtype=float).reshape(-1, 2)
        start = xi.copy()
        G, params, mesh, approx = self.projection(domain, table, xi, p, resolution)
        history = [float(np.max(np.abs(G)))]
        if not self.enabled:
            return params, mesh, approx, history

        min_eps = float(np.min(params.eps_bar))
        clearance = self.clearance(domain, xi)
        delta = self.fd_step * clearance
        n = G.size
        J = np.empty((n, n))
        for i in range(n):
            shifted = xi.ravel().copy()
            shifted[i] += delta
            G_i, *_ = self.projection(domain, table, shifted.reshape(-1, 2), p, resolution)
            J[:, i] = (G_i - G) / delta

        for step in range(self.max_steps):
            try:
                move = -np.linalg.solve(J, G)
            except np.linalg.LinAlgError:
                self.logger.warning(f"p={p:g}: singular centring Jacobian, keeping ξ")
                break
            limit = self.max_move * clearance
            norm = float(np.max(np.abs(move)))
            if norm > limit:
                move *= limit / norm
            accepted = False
            for _ in range(4):
                trial = (xi.ravel() + move).reshape(-1, 2)
                if domain.contains(trial).all():
                    G_new, params_new, mesh_new, approx_new = self.projection(
                        domain, table, trial, p, resolution
                    )
                    if np.max(np.abs(G_new)) < np.max(np.abs(G)):
                        accepted = True
                        break
                move *= 0.5
            if not accepted:
                self.logger.info(f"p={p:g}: |G| no longer decreases, centring stops at step {step}")
                break
            # Бройден: J += (ΔG − J s) sᵀ / sᵀs
            dG = G_new - G
            J += np.outer(dG - J @ move, move) / float(move @ move)
            xi, G, params, mesh, approx = trial, G_new, params_new, mesh_new, approx_new
            history.append(float(np.max(np.abs(G))))
            self.logger.debug(
                f"Centring p={p:g} step {step}: |Δξ|∞={np.max(np.abs(move)):.3e}, |G|∞={history[-1]:.3e}"
            )
            if float(np.max(np.abs(move))) < self.tol * min_eps:
                break

        self.logger.info(
            f"Centres p={p:g}: max shift from x_∞ = {np.max(np.abs(params.xi - start)):.3e}, "
            f"|G|∞ {history[0]:.3e} → {history[-1]:.3e}"
        )
        return params, mesh, approx, history
