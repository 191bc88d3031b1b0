from typing import List

import numpy as np
from omegaconf import DictConfig

from src.core.exceptions import MeshTooCoarse
from src.core.schemas import ApproxSolution, CheckRow, SpikeParameters
from src.domain import GreenFunction, HarmonicFunction
from src.profiles import ProfileEvaluator, eval_U
from src.utils.logger import get_logger


class SpikeAssembler:
    """
    Профили спайков W̄_{p,j}(x) = A_j [p + U(y) + w0(y)/p + w1(y)/p²],
    y = (x − ξ_j)/ε̄_j, log A_j = −(p/(p−1))log p − (2/(p−1))log ε̄_j,
    их проекции PW̄_{p,j} = W̄_{p,j} − (гармоническое продолжение W̄_{p,j}|∂Ω)
    и сумма W_{α,p} = Σ α_j PW̄_{p,j}.
    """

    def __init__(self, green: GreenFunction, evaluator: ProfileEvaluator, cfg: DictConfig):
        self.logger = get_logger(self.__class__.__name__)
        self.green = green
        self.evaluator = evaluator
        self.min_core_nodes = int(cfg.construct.min_core_nodes)
        self.far_field_samples = int(cfg.construct.far_field_samples)
        self.far_field_rtol = float(cfg.construct.get("far_field_rtol", 1e-3))

    def profile(self, params: SpikeParameters, j: int, points: np.ndarray) -> np.ndarray:
        """W̄_{p,j} в точках (массив (M, 2))."""
        p = params.p
        points = np.atleast_2d(points)
        y = np.linalg.norm(points - params.xi[j], axis=-1) / params.eps_bar[j]
        bracket = p + eval_U(y) + self.evaluator.w0(y) / p + self.evaluator.w1(y) / p**2
        return params.amplitude[j] * bracket

    def projection_correction(self, params: SpikeParameters, j: int) -> HarmonicFunction:
        return self.green.harmonic_solve(lambda t: self.profile(params, j, t))

    def evaluate(
        self, params: SpikeParameters, points: np.ndarray, corrections: List[HarmonicFunction]
    ) -> np.ndarray:
        """PW̄_{p,j} в произвольных точках, массив (k, M)."""
        points = np.atleast_2d(points)
        return np.stack(
            [self.profile(params, j, points) - h(points) for j, h in enumerate(corrections)]
        )

    def assemble(
        self, params: SpikeParameters, nodes: np.ndarray, boundary_mask: np.ndarray
    ) -> ApproxSolution:
        nodes = np.asarray(nodes, dtype=float)
        for j in range(params.k):
            core = np.linalg.norm(nodes - params.xi[j], axis=-1) < 10.0 * params.eps_bar[j]
            if int(core.sum()) < self.min_core_nodes:
                raise MeshTooCoarse(
                    f"spike {j}: {int(core.sum())} nodes within 10ε̄ "
                    f"(need {self.min_core_nodes}, ε̄ = {params.eps_bar[j]:.3e})"
                )

        corrections = [self.projection_correction(params, j) for j in range(params.k)]
        components = self.evaluate(params, nodes, corrections)
        boundary_residual = (
            float(np.max(np.abs(components[:, boundary_mask]))) if boundary_mask.any() else 0.0
        )
        components[:, boundary_mask] = 0.0
        field = params.alpha @ components
        self.logger.info(
            f"W assembled: p={params.p:g}, k={params.k}, max W={field.max():.6f}, "
            f"boundary residual={boundary_residual:.2e}"
        )
        return ApproxSolution(
            params=params,
            nodes=nodes,
            field=field,
            components=components,
            boundary_residual=boundary_residual,
            corrections=corrections,
        )

    # -------------------------------------------------------------- checks

    def _ring(self, center: np.ndarray, radius: float) -> np.ndarray:
        phi = 2.0 * np.pi * np.arange(self.far_field_samples) / self.far_field_samples
        return center + radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    def far_field_check(self, params: SpikeParameters, j: int) -> CheckRow:
        """PW̄_{p,j} ≈ A_j·8πc·G(x, ξ_j) на окружности радиуса d/2, d = dist(ξ_j, ∂Ω)."""
        table = self.evaluator.table
        p = params.p
        xi = params.xi[j]
        d = float(self.green.domain.boundary_distance(xi)[0])
        ring = self._ring(xi, 0.5 * d)
        h = self.projection_correction(params, j)
        computed = self.profile(params, j, ring) - h(ring)
        c = 1.0 - table.c0 / (4.0 * p) - table.c1 / (4.0 * p**2)
        predicted = params.amplitude[j] * 8.0 * np.pi * c * self.green.green_many(ring, xi)["value"]
        error = float(np.max(np.abs(computed - predicted) / np.abs(predicted)))
        return CheckRow(
            name=f"far_field[spike={j}]",
            predicted=0.0,
            computed=error,
            tolerance=self.far_field_rtol,
            passed=error < self.far_field_rtol,
            note="max relative gap between PW̄ and A·8πc·G at distance d/2",
        )

    def pu_expansion_check(self, params: SpikeParameters, j: int) -> CheckRow:
        """
        PU − [U − log(64ε̄⁴) − 8πH(·, ξ_j)] для U((x − ξ_j)/ε̄_j): по принципу максимума
        не больше 16ε̄²/d² (d = dist(ξ_j, ∂Ω)).
        """
        xi = params.xi[j]
        eps = params.eps_bar[j]
        d = float(self.green.domain.boundary_distance(xi)[0])

        def profile_u(t: np.ndarray) -> np.ndarray:
            return eval_U(np.linalg.norm(t - xi, axis=-1) / eps)

        h = self.green.harmonic_solve(profile_u)
        samples = np.concatenate([self._ring(xi, f * d) for f in (0.25, 0.5, 0.75)])
        regular = self.green.regular_part(xi).blocks(samples, order=0)["value"]
        expected = np.log(64.0) + 4.0 * np.log(eps) + 8.0 * np.pi * regular
        gap = float(np.max(np.abs(h(samples) - expected)))
        bound = 16.0 * eps**2 / d**2 + 1e-8
        return CheckRow(
            name=f"pu_expansion[spike={j}]",
            predicted=0.0,
            computed=gap,
            tolerance=bound,
            passed=gap <= bound,
            note="PU − (U − log(64ε̄⁴) − 8πH) = O(ε̄²)",
        )
