from typing import Dict, List, Optional

import numpy as np
from omegaconf import DictConfig, OmegaConf

from src.construct import limit_mu_bar, predict, reduced_map
from src.core.schemas import CheckRow, ProfileTable, StageResult
from src.core.service import BaseService
from src.domain import DomainModel, GreenFunction
from src.pde import GreenQuadraticForms, MeshBuilder
from src.pipeline.base import compare, flag, run_stage
from src.pipeline.state import RunState
from src.profiles import (
    B0_EXACT,
    C0_EXACT,
    MomentSuite,
    ProfileEvaluator,
    ProfileSolver,
    kernel_residuals,
    reference_moments,
)
from src.utils.storage import ProfileCache

_MOMENT_FIELDS = (
    "mass",
    "log_mass",
    "mass_f0",
    "mass_f1",
    "log_f0",
    "log_f1",
    "pi_twelfth",
    "eight_pi_third",
)


class ConstructionService(BaseService):
    """
    Построение приближенных решений.
    Пайплайн: Profiles -> Green/Robin -> CriticalPoints -> Parameters -> Assembly.
    """

    def __init__(self, config_path: str = "configs/toolkit_config.yaml"):
        super().__init__(config_path)

        self.profile_solver = self._init_profile_solver(self.config)
        self.moment_suite = self._init_moment_suite(self.config)
        self.cache = self._init_cache(self.config)
        self.mesh_builder = self._init_mesh_builder(self.config)
        self._table: Optional[ProfileTable] = None

        self.logger.info("ConstructionService initialized.")

    def _init_profile_solver(self, config: DictConfig) -> ProfileSolver:
        return ProfileSolver(config)

    def _init_moment_suite(self, config: DictConfig) -> MomentSuite:
        return MomentSuite(config)

    def _init_cache(self, config: DictConfig) -> ProfileCache:
        return ProfileCache(config.paths.profile_cache)

    def _init_mesh_builder(self, config: DictConfig) -> MeshBuilder:
        return MeshBuilder(config)

    # -------------------------------------------------------------- profiles

    def load_profiles(self, force: bool = False) -> ProfileTable:
        """Таблица профилей из кэша или заново (с моментами и C_i через моменты)."""
        if self._table is not None and not force:
            return self._table
        pc = self.config.profiles
        key = self.cache.key(pc.r_max, pc.grid_size, pc.taylor_terms, pc.rtol)
        table = None if force else self.cache.load(key)
        if table is None:
            table = self.profile_solver.build_table()
            moments = self.moment_suite.compute(ProfileEvaluator(table))
            table.moments = moments
            table.c0_moment = -moments.mass_f0 / (2.0 * np.pi)
            table.c1_moment = -moments.mass_f1 / (2.0 * np.pi)
            self.cache.save(key, table)
        else:
            self.logger.info(f"Profiles loaded from cache: {key}")
        self._table = table
        return table

    def profiles_stage(self, force: bool = False) -> StageResult:
        checks = self.config.checks

        def body():
            table = self.load_profiles(force=force)
            evaluator = ProfileEvaluator(table)
            rows: List[CheckRow] = []
            reference = reference_moments(table.c0, table.c1, table.b0, table.b1)
            for name in _MOMENT_FIELDS:
                rows.append(
                    compare(
                        f"moment[{name}]",
                        reference[name],
                        getattr(table.moments, name),
                        checks.moment_rtol,
                        relative=True,
                    )
                )
            rows += [
                compare("C0[slope_vs_moment]", table.c0_moment, table.c0, checks.slope_rtol, relative=True),
                compare("C1[slope_vs_moment]", table.c1_moment, table.c1, checks.slope_rtol, relative=True),
                compare("C0[exact]", C0_EXACT, table.c0, checks.slope_rtol, relative=True),
                compare("B0[exact]", B0_EXACT, table.b0, checks.slope_rtol, relative=True),
            ]
            r = np.geomspace(2.0 * table.r_launch, 1.0e3, 400)
            for which in ("w0", "w1"):
                residual = float(np.max(np.abs(evaluator.equation_residual(which, r))))
                rows.append(compare(f"ode_residual[{which}]", 0.0, residual, checks.profile_residual))
            res_z0, res_grad = kernel_residuals(r)
            rows.append(
                compare(
                    "kernel_residual",
                    0.0,
                    float(max(np.max(np.abs(res_z0)), np.max(np.abs(res_grad)))),
                    checks.kernel_atol,
                )
            )
            data = {
                "c0": table.c0,
                "c1": table.c1,
                "b0": table.b0,
                "b1": table.b1,
                "c0_moment": table.c0_moment,
                "c1_moment": table.c1_moment,
                "moments": table.moments,
            }
            return rows, data

        return run_stage(self.logger, "profiles", body)

    # -------------------------------------------------------------- geometry

    def _integral_green(self, domain: DomainModel) -> GreenFunction:
        """Та же функция Грина, но через граничные интегралы даже на круге."""
        raw = OmegaConf.to_container(self.config, resolve=True)
        raw["domain"]["force_integral"] = True
        return GreenFunction(domain, OmegaConf.create(raw))

    def green_stage(self, state: RunState, samples: int = 20) -> StageResult:
        atol = state.tol("green_atol")

        def body():
            domain = state.domain
            rng = np.random.default_rng(state.run.seed)
            theta = rng.uniform(0.0, 2.0 * np.pi, size=(2, samples))
            rho = rng.uniform(0.1, 0.7, size=(2, samples))
            xs = domain.to_cartesian(rho[0], theta[0])
            ys = domain.to_cartesian(rho[1], theta[1])
            green = state.green

            symmetry = max(
                abs(green.green(x, y).value - green.green(y, x).value) for x, y in zip(xs, ys)
            )
            rows = [compare("green[symmetry]", 0.0, symmetry, atol)]

            if domain.kind == "unit_disc":
                integral = self._integral_green(domain)
                gaps: Dict[str, float] = {"value": 0.0, "robin": 0.0, "robin_grad": 0.0, "robin_hess": 0.0}
                for x, y in zip(xs, ys):
                    gaps["value"] = max(gaps["value"], abs(green.green(x, y).value - integral.green(x, y).value))
                    exact, numeric = green.robin(x), integral.robin(x)
                    gaps["robin"] = max(gaps["robin"], abs(exact.value - numeric.value))
                    gaps["robin_grad"] = max(gaps["robin_grad"], float(np.max(np.abs(exact.grad - numeric.grad))))
                    gaps["robin_hess"] = max(gaps["robin_hess"], float(np.max(np.abs(exact.hess - numeric.hess))))
                rows += [
                    compare(f"green[closed_vs_integral:{name}]", 0.0, gap, atol)
                    for name, gap in gaps.items()
                ]
            return rows, {"nystrom_nodes": green.solver.nodes if not green.closed_form else None}

        return run_stage(self.logger, "green", body)

    def critical_stage(self, state: RunState) -> StageResult:
        def body():
            crit = state.crit()
            tol = 10.0 * float(self.config.kirchhoff.newton_tol)
            rows = [
                compare("critical[grad_norm]", 0.0, crit.grad_norm, tol),
                flag("critical[nondegenerate]", bool(crit.nondegenerate)),
            ]
            data = crit.summary()
            if crit.nondegenerate:
                data["degree_sign"] = state.kirchhoff.degree_sign(crit)
                data["theta"] = state.kirchhoff.theta_spectrum(crit)
            return rows, data

        return run_stage(self.logger, "critical", body)

    def quadform_stage(self, state: RunState) -> StageResult:
        def body():
            points = state.crit().points
            clearance = float(np.min(state.domain.boundary_distance(points)))
            if points.shape[0] > 1:
                diffs = points[:, None, :] - points[None, :, :]
                dist = np.linalg.norm(diffs, axis=-1)[np.triu_indices(points.shape[0], 1)]
                clearance = min(clearance, 0.5 * float(np.min(dist)))
            radius = 0.25 * clearance
            forms = GreenQuadraticForms(state.green, self.config)
            return forms.check(points, radius), {"radius": radius}

        return run_stage(self.logger, "quadform", body)

    # -------------------------------------------------------------- construction

    def construct_stage(self, state: RunState) -> StageResult:
        def body():
            crit = state.crit()
            table = state.table()
            assembler = state.assembler()
            limit = limit_mu_bar(crit.psi_parts, table.c0)
            rows: List[CheckRow] = []
            data: Dict[str, dict] = {"limit_mu_bar": limit, "per_p": {}}
            gaps = []
            for p in state.run.p_values:
                params = state.params(p)
                pred = predict(crit, p)
                rows.append(compare(f"F_residual[p={p:g}]", 0.0, params.f_residual, state.tol("f_residual")))
                if crit.k == 1:
                    closed = state.parameter_solver.closed_form_single(table, crit.points[0], p)
                    rows.append(
                        compare(f"mu_bar_closed_form[p={p:g}]", closed, params.mu_bar[0], 1e-10, relative=True)
                    )
                ratio = params.eps_bar / params.eps_bar[0]
                rows.append(
                    compare(
                        f"eps_ratio[p={p:g}]",
                        0.0,
                        float(np.max(np.abs(ratio - np.asarray(pred.eps_ratio)))),
                        state.tol("eps_ratio_atol"),
                        gating=False,
                    )
                )
                for j in range(crit.k):
                    rows.append(assembler.pu_expansion_check(params, j))
                    far = assembler.far_field_check(params, j)
                    rows.append(far.model_copy(update={"gating": False}))
                gaps.append(float(np.max(np.abs(params.mu_bar - limit))))
                data["per_p"][f"{p:g}"] = {"parameters": params, "predictions": pred}
            rows.append(
                flag(
                    "mu_bar_limit_trend",
                    all(b <= a for a, b in zip(gaps, gaps[1:])),
                    gating=False,
                    note=f"|μ̄ − μ̄∞| by p: {[f'{g:.2e}' for g in gaps]}",
                )
            )
            return rows, data

        return run_stage(self.logger, "construct", body)

    def reduced_map_stage(self, state: RunState) -> StageResult:
        def body():
            crit = state.crit()
            rows: List[CheckRow] = []
            data = {}
            for p in state.run.p_values:
                pred = predict(crit, p)
                values, _, sign = reduced_map(crit, p)
                rows.append(compare(f"reduced_map_zero[p={p:g}]", 0.0, float(np.max(np.abs(values))), 1e-8))
                rows.append(compare(f"reduced_map_degree[p={p:g}]", pred.degree_pred, sign, 0.0))
                alpha = np.ones(crit.k)
                alpha[0] += 1e-3
                shifted, _, _ = reduced_map(crit, p, alpha)
                rows.append(flag(f"reduced_map_alpha_direction[p={p:g}]", shifted[0] < 0.0))
                data[f"{p:g}"] = {"sign": sign, "degree_pred": pred.degree_pred}
            return rows, data

        return run_stage(self.logger, "reduced_map", body)
