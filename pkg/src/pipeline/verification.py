from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.construct import SQRT_E, predict
from src.core.exceptions import BallOutsideDomain, NegativeSolution, NewtonDiverged
from src.core.schemas import CheckRow, IdentityResidual, StageResult
from src.core.service import BaseService
from src.pde import LocalIdentities, eigenvalue_table, ray_profiles, save_snapshot, write_table
from src.pipeline.base import compare, flag, run_stage
from src.pipeline.state import RunState


def richardson_limit(p_values: List[float], values: List[float]) -> float:
    """E(p) = E∞ + a/p по двум последним точкам."""
    p1, p2 = p_values[-2], p_values[-1]
    e1, e2 = values[-2], values[-1]
    return (p2 * e2 - p1 * e1) / (p2 - p1)


def top_coefficient_fit(p_values: List[float], top: List[float]) -> Tuple[float, float]:
    """
    Коэффициент c в λ_{3k+1} − 1 ≈ c/p по методу наименьших квадратов.
    Возвращает (c, стандартная ошибка); при одной точке ошибка nan.
    """
    x = 1.0 / np.asarray(p_values, dtype=float)
    y = np.asarray(top, dtype=float) - 1.0
    (c,), residuals, _, _ = np.linalg.lstsq(x[:, None], y, rcond=None)
    if x.size < 2:
        return float(c), float("nan")
    sse = float(residuals[0]) if residuals.size else float(np.sum((y - c * x) ** 2))
    return float(c), float(np.sqrt(sse / (x.size - 1) / (x @ x)))


def identity_orders(residuals: Dict[float, List[IdentityResidual]]) -> pd.DataFrame:
    """
    Таблица относительных невязок тождеств по разрешениям сетки и наблюдаемый
    порядок log(r_coarse / r_fine) / log(res_fine / res_coarse).
    """
    table = pd.DataFrame(
        [
            {
                "identity": r.identity,
                "spike": r.spike,
                "l": r.eigen_index,
                "resolution": resolution,
                "residual": r.relative_residual,
            }
            for resolution, records in residuals.items()
            for r in records
        ],
        columns=["identity", "spike", "l", "resolution", "residual"],
    )
    if table.empty:
        table["order"] = pd.Series(dtype=float)
        return table
    table = table.sort_values(["identity", "spike", "l", "resolution"], ignore_index=True)
    key = ["identity", "spike", "l"]
    table["order"] = table.groupby(key)["residual"].transform(lambda r: -np.log(r).diff())
    table["order"] /= table.groupby(key)["resolution"].transform(lambda s: np.log(s).diff())
    return table


def order_rows(orders: pd.DataFrame, minimum: float) -> List[CheckRow]:
    """Медианный порядок сходимости по каждому тождеству."""
    rows = []
    for identity, order in orders.dropna(subset=["order"]).groupby("identity")["order"]:
        median = float(order.median())
        rows.append(
            CheckRow(
                name=f"order[{identity}]",
                predicted=minimum,
                computed=median,
                passed=bool(np.isfinite(median) and median >= minimum),
                note=f"median over {order.size} (spike, l) pairs",
            )
        )
    return rows


class VerificationService(BaseService):
    """
    Проверка решений на сетке.
    Пайплайн: Solve -> Spectrum -> LocalIdentities -> LimitProfile -> Uniqueness.
    """

    def __init__(self, config_path: str = "configs/toolkit_config.yaml"):
        super().__init__(config_path)
        self.logger.info("VerificationService initialized.")

    # -------------------------------------------------------------- solve

    def solve_stage(self, state: RunState, out_dir: Optional[Path] = None) -> StageResult:
        def body():
            crit = state.crit()
            rows: List[CheckRow] = []
            data: Dict[str, dict] = {}
            p_seen, energies, peak_gaps, gaps_w = [], [], [], []
            for p in state.run.p_values:
                sol = state.solution(p)
                approx = state.approx(p)
                pred = predict(crit, p)
                rows.append(
                    compare(f"newton_residual[p={p:g}]", 0.0, sol.residual_norm, float(self.config.solver.newton_tol))
                )
                gap_w = float(np.max(np.abs(sol.u - approx.field)))
                # при малых p константа в O(1/p²) еще не вышла на асимптотику
                rows.append(
                    compare(
                        f"u_minus_W[p={p:g}]",
                        0.0,
                        gap_w,
                        1.0 / p**2,
                        gating=p >= self.config.checks.u_minus_w_min_p,
                        note="‖u_p − W_{α,p}‖∞ against 1/p²",
                    )
                )
                for j in range(crit.k):
                    rows.append(
                        compare(
                            f"peak_value[p={p:g},spike={j}]",
                            SQRT_E,
                            sol.peak_values[j],
                            state.tol("peak_atol"),
                            gating=False,
                        )
                    )
                    rows.append(
                        compare(
                            f"eps_measured[p={p:g},spike={j}]",
                            pred.eps_pred[j],
                            sol.eps_measured[j],
                            state.tol("eps_rtol"),
                            relative=True,
                            gating=False,
                        )
                    )
                rows.append(
                    compare(
                        f"energy[p={p:g}]",
                        pred.energy_pred,
                        sol.energy,
                        10.0 / p,
                        relative=True,
                        gating=False,
                    )
                )
                p_seen.append(p)
                energies.append(sol.energy)
                peak_gaps.append(float(np.max(np.abs(sol.peak_values - SQRT_E))))
                gaps_w.append(gap_w)
                data[f"{p:g}"] = {
                    "residual_norm": sol.residual_norm,
                    "iterations": sol.iterations,
                    "p_path": sol.p_path,
                    "peak_points": sol.peak_points,
                    "peak_values": sol.peak_values,
                    "eps_measured": sol.eps_measured,
                    "eps_pred": pred.eps_pred,
                    "energy": sol.energy,
                    "u_minus_W": gap_w,
                    "mesh_nodes": state.mesh(p).n_nodes,
                }
                if out_dir is not None:
                    mesh = state.mesh(p)
                    save_snapshot(Path(out_dir) / f"solution_p{p:g}.npz", mesh, sol)
                    rays = ray_profiles(mesh, sol, sol.peak_points[0], np.linspace(0.0, np.pi, 4, endpoint=False))
                    write_table(rays, Path(out_dir) / f"rays_p{p:g}.csv")

            rows.append(
                flag(
                    "peak_trend",
                    all(b <= a for a, b in zip(peak_gaps, peak_gaps[1:])),
                    note=f"max|u(x_j) − √e| by p: {[f'{g:.3e}' for g in peak_gaps]}",
                )
            )
            if len(p_seen) >= 2:
                rows.append(
                    flag(
                        "u_minus_W_trend",
                        all(b < a for a, b in zip(gaps_w, gaps_w[1:])),
                        note=f"‖u_p − W‖∞ by p: {[f'{g:.3e}' for g in gaps_w]}",
                    )
                )
                limit = richardson_limit(p_seen, energies)
                rows.append(
                    compare(
                        "energy_extrapolated",
                        8.0 * np.pi * np.e * crit.k,
                        limit,
                        state.tol("energy_rtol"),
                        relative=True,
                    )
                )
                data["energy_extrapolated"] = limit
            return rows, data

        return run_stage(self.logger, "solve", body)

    # -------------------------------------------------------------- spectrum

    def spectrum_stage(self, state: RunState, out_dir: Optional[Path] = None) -> StageResult:
        def body():
            crit = state.crit()
            k = crit.k
            rows: List[CheckRow] = []
            data: Dict[str, dict] = {}
            top_p, top = [], []
            for p in state.run.p_values:
                spec = state.spectrum(p)
                pred = predict(crit, p)
                lam = spec.eigenvalues
                rows.append(compare(f"morse_index[p={p:g}]", pred.morse_pred, spec.morse, 0.0))
                rows.append(
                    compare(
                        f"low_eigenvalues[p={p:g}]",
                        0.0,
                        float(np.max(np.abs(p * lam[:k] - 1.0))),
                        0.5,
                        note="max |p·λ_l − 1| over the first k eigenvalues",
                    )
                )
                rows.append(compare(f"orthogonality[p={p:g}]", 0.0, spec.orthogonality, 1e-8))
                rows.append(compare(f"count_below[p={p:g}]", k, int(np.sum(lam < 0.9)), 0.0))
                rows.append(
                    compare(
                        f"mid_cluster_count[p={p:g}]",
                        2 * k,
                        int(np.sum(np.abs(lam - 1.0) < 3.0 / p)),
                        0.0,
                        note="#{|λ − 1| < 3/p}",
                    )
                )
                if p <= 15.0:
                    mid = lam[k : 3 * k]
                    signs = np.sign(mid - 1.0) == np.sign(np.asarray(pred.lambda_mid) - 1.0)
                    rows.append(flag(f"mid_sign[p={p:g}]", bool(np.all(signs)), gating=False))
                if lam.size > 3 * k:
                    top_p.append(p)
                    top.append(lam[3 * k])
                    rows.append(
                        compare(
                            f"top_eigenvalue[p={p:g}]",
                            pred.lambda_top,
                            lam[3 * k],
                            3.0 / p,
                            gating=False,
                        )
                    )
                data[f"{p:g}"] = {**spec.summary(), "predictions": pred}

            if top:
                coefficient, stderr = top_coefficient_fit(top_p, top)
                low, high = self.config.checks.top_coefficient_range
                rows.append(
                    flag(
                        "top_coefficient",
                        low < coefficient < high,
                        note=f"c = {coefficient:.3f} ± {stderr:.3f} in λ_(3k+1) − 1 ≈ c/p, required {low:g} < c < {high:g}",
                    )
                )
                data["top_coefficient"] = {"c": coefficient, "stderr": stderr, "p": top_p}
            if out_dir is not None:
                write_table(eigenvalue_table(state.spectra), Path(out_dir) / "eigenvalues.csv")
            return rows, data

        return run_stage(self.logger, "spectrum", body)

    # -------------------------------------------------------------- identities

    def _identities(self, state: RunState, p: float) -> LocalIdentities:
        return LocalIdentities(state.domain, state.solver(p).space, self.config)

    def identities_stage(self, state: RunState) -> StageResult:
        def body():
            rtol = state.tol("pohozaev_rtol")
            span_min = state.tol("span_fraction")
            k = state.crit().k
            rows: List[CheckRow] = []
            data: Dict[str, dict] = {}
            for p in state.run.p_values:
                sol, spec = state.solution(p), state.spectrum(p)
                local = self._identities(state, p)
                records = []
                for j in range(k):
                    for l in range(spec.eigenvalues.size):
                        try:
                            records += local.pohozaev_check(sol, spec, j, l)
                        except BallOutsideDomain as e:
                            rows.append(flag(f"identity_ball[p={p:g},spike={j}]", False, gating=False, note=str(e)))
                            break
                spec.identity_residuals = records
                # уровень невязки зависит от сетки, гейтит порядок при сгущении (order_rows)
                for rec in records:
                    rows.append(
                        compare(
                            f"{rec.identity}[p={p:g},spike={rec.spike},l={rec.eigen_index}]",
                            0.0,
                            rec.relative_residual,
                            rtol,
                            gating=False,
                        )
                    )
                fractions = [
                    local.span_fraction(sol, spec.eigenvectors[:, l]) for l in range(k, 3 * k)
                ]
                rows.append(
                    compare(
                        f"kernel_span[p={p:g}]",
                        1.0,
                        float(min(fractions)) if fractions else 1.0,
                        1.0 - span_min,
                    )
                )
                data[f"{p:g}"] = {"residuals": records, "span_fractions": fractions}
            return rows, data

        return run_stage(self.logger, "identities", body)

    def limit_profile_stage(self, state: RunState) -> StageResult:
        def body():
            evaluator = state.evaluator()
            rows: List[CheckRow] = []
            data: Dict[str, list] = {}
            for p in state.run.p_values:
                sol = state.solution(p)
                local = self._identities(state, p)
                data[f"{p:g}"] = []
                for j in range(state.crit().k):
                    sups = local.limit_profile_check(sol, evaluator, j)
                    data[f"{p:g}"].append(sups)
                    rows.append(
                        compare(
                            f"limit_profile[p={p:g},spike={j}]",
                            0.0,
                            sups["sup_w_minus_U"],
                            10.0 / p,
                            gating=False,
                            note="sup |w_{p,j} − U| on |y| ≤ 10",
                        )
                    )
            return rows, data

        return run_stage(self.logger, "limit_profile", body)

    # -------------------------------------------------------------- uniqueness

    def uniqueness_stage(self, state: RunState) -> StageResult:
        """Случайные возмущения W (10%) при наибольшем p сходятся к одному решению."""

        def body():
            p = max(state.run.p_values)
            solver = state.solver(p)
            base = state.approx(p).field
            rng = np.random.default_rng(state.run.seed)
            solutions, failures = [], 0
            for _ in range(state.run.perturbations):
                u0 = base * (1.0 + 0.1 * rng.uniform(-1.0, 1.0, size=base.shape))
                try:
                    u, _, _ = solver.newton(u0, p)
                    solver.check_positive(u, p)
                except (NewtonDiverged, NegativeSolution) as e:
                    self.logger.warning(f"Perturbed start failed at p={p:g}: {e}")
                    failures += 1
                    continue
                solutions.append(u)
            spread = max(
                (float(np.max(np.abs(a - b))) for a, b in combinations(solutions, 2)),
                default=0.0,
            )
            rows = [
                compare(f"perturbation_failures[p={p:g}]", 0.0, failures, 0.0),
                compare(f"perturbation_spread[p={p:g}]", 0.0, spread, state.tol("uniqueness_atol")),
            ]
            return rows, {"p": p, "converged": len(solutions), "spread": spread}

        return run_stage(self.logger, "uniqueness", body)
