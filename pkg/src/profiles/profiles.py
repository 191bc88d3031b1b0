from typing import Callable, Optional, Tuple

import numpy as np
from omegaconf import DictConfig
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import make_interp_spline

from src.core.exceptions import ODEIntegrationFailed, SlopeNotConverged
from src.core.schemas import ProfileTable
from src.profiles.series import eval_series, launch_series, source_f0, source_f1
from src.utils.logger import get_logger


def eval_U(r: np.ndarray) -> np.ndarray:
    """Профиль Лиувилля U(r) = −2log(1 + r²/8)."""
    return -2.0 * np.log1p(np.asarray(r, dtype=float) ** 2 / 8.0)


def exp_U(r: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.asarray(r, dtype=float) ** 2 / 8.0) ** 2


def kernel_residuals(r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Невязки ΔZ + e^U Z для Z0 = (8−r²)/(8+r²) и для ∂U/∂y_q = U'(r)·cos φ
    (для моды cos φ: Δ = d²/dr² + (1/r)d/dr − 1/r²).
    """
    r = np.asarray(r, dtype=float)
    a = 8.0 + r**2
    eu = 64.0 / a**2
    z0 = (8.0 - r**2) / a
    z0_rr = -32.0 / a**2 + 128.0 * r**2 / a**3
    z0_r = -32.0 * r / a**2
    res_z0 = z0_rr + z0_r / r + eu * z0

    g = -4.0 * r / a
    g_r = -4.0 / a + 8.0 * r**2 / a**2
    g_rr = 8.0 * r / a**2 + 16.0 * r / a**2 - 32.0 * r**3 / a**3
    res_grad = g_rr + g_r / r - g / r**2 + eu * g
    return res_z0, res_grad


class ProfileEvaluator:
    """
    Вычисление U, w0, w1 и их производных в произвольных r по ProfileTable.

    r < r_launch: ряд Тейлора; r_launch ≤ r ≤ r_max: сплайн 7-й степени по
    s = log r (значения и v = r·w'); r > r_max: C_i·(log r − log r_max) + w_i(r_max).
    """

    def __init__(self, table: ProfileTable):
        self.table = table
        s = np.log(table.radii[1:])
        self._s_min, self._s_max = s[0], s[-1]
        self._w = {
            "w0": make_interp_spline(s, table.w0_vals[1:], k=7),
            "w1": make_interp_spline(s, table.w1_vals[1:], k=7),
        }
        self._v = {
            "w0": make_interp_spline(s, table.radii[1:] * table.w0_deriv[1:], k=7),
            "w1": make_interp_spline(s, table.radii[1:] * table.w1_deriv[1:], k=7),
        }
        self._series = {"w0": table.w0_series, "w1": table.w1_series}
        self._slope = {"w0": table.c0, "w1": table.c1}
        self._end = {"w0": table.w0_vals[-1], "w1": table.w1_vals[-1]}

    def U(self, r: np.ndarray) -> np.ndarray:
        return eval_U(r)

    def value(self, which: str, r: np.ndarray) -> np.ndarray:
        return self._evaluate(which, r)[0]

    def derivative(self, which: str, r: np.ndarray) -> np.ndarray:
        return self._evaluate(which, r)[1]

    def w0(self, r: np.ndarray) -> np.ndarray:
        return self.value("w0", r)

    def w1(self, r: np.ndarray) -> np.ndarray:
        return self.value("w1", r)

    def f0(self, r: np.ndarray) -> np.ndarray:
        return source_f0(self.w0(r), eval_U(r))

    def f1(self, r: np.ndarray) -> np.ndarray:
        return source_f1(self.w1(r), self.w0(r), eval_U(r))

    def _evaluate(self, which: str, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        r = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r).ravel()
        values = np.empty_like(flat)
        derivs = np.empty_like(flat)

        low = flat < self.table.r_launch
        high = flat > self.table.r_max
        mid = ~(low | high)
        if np.any(low):
            values[low], derivs[low] = eval_series(self._series[which], flat[low])
        if np.any(mid):
            s = np.clip(np.log(flat[mid]), self._s_min, self._s_max)
            values[mid] = self._w[which](s)
            derivs[mid] = self._v[which](s) / flat[mid]
        if np.any(high):
            c = self._slope[which]
            values[high] = self._end[which] + c * (np.log(flat[high]) - self._s_max)
            derivs[high] = c / flat[high]
        return values.reshape(r.shape), derivs.reshape(r.shape)

    def equation_residual(self, which: str, r: np.ndarray) -> np.ndarray:
        """Δw_i + e^U f_i на сетке r_launch ≤ r ≤ r_max (Δw = (1/r²)·dv/ds)."""
        r = np.asarray(r, dtype=float)
        s = np.log(r)
        laplacian = self._v[which].derivative()(s) / r**2
        f = self.f0(r) if which == "w0" else self.f1(r)
        return laplacian + exp_U(r) * f


class ProfileSolver:
    """
    Радиальные решения −Δw_i − e^U w_i = e^U(f_i − w_i) с w_i(0) = 0.

    Старт рядом Тейлора на [0, r_launch], дальше DOP853 по s = log r для
    состояния (w, r·w'). Константы C_i = lim r·w_i'(r), B_i = lim (w_i − C_i log r).
    """

    def __init__(self, cfg: DictConfig):
        self.logger = get_logger(self.__class__.__name__)
        pc = cfg.profiles
        self.r_launch = float(pc.r_launch)
        self.r_max = float(pc.r_max)
        self.taylor_terms = int(pc.taylor_terms)
        self.grid_size = int(pc.grid_size)
        self.rtol = float(pc.rtol)
        self.atol = float(pc.atol)
        self.slope_tol = float(pc.slope_tol)

    @property
    def s_grid(self) -> np.ndarray:
        return np.linspace(np.log(self.r_launch), np.log(self.r_max), self.grid_size)

    def _integrate(self, rhs: Callable, y0: np.ndarray, label: str):
        s_span = (float(np.log(self.r_launch)), float(np.log(self.r_max)))
        sol = solve_ivp(
            rhs,
            s_span,
            y0,
            method="DOP853",
            rtol=self.rtol,
            atol=self.atol,
            dense_output=True,
        )
        if not sol.success:
            raise ODEIntegrationFailed(f"{label}: {sol.message}")
        self.logger.debug(f"{label}: {sol.t.size} steps, {sol.nfev} evaluations")
        return sol

    def _far_field(self, sol, w_index: int, label: str, source: Callable) -> Tuple[float, float]:
        """
        C = v(R) − ∫_R^∞ x e^U f dx,  B = w(R) − C log R + ∫_R^∞ x e^U f log(x/R) dx,
        где f в хвосте берется от асимптотики w ≈ C log x + B (несколько итераций).
        """
        s_end = np.log(self.r_max)
        w_end, v_end = sol.sol(s_end)[[w_index, w_index + 1]]
        slope, intercept = float(v_end), float(w_end - v_end * s_end)

        def tail(lower: float, c: float, b: float, weight: Callable) -> float:
            def integrand(x):
                return x * exp_U(x) * source(c * np.log(x) + b, x) * weight(x)

            value, _ = quad(integrand, lower, np.inf, limit=200, epsabs=1e-16, epsrel=1e-10)
            return value

        for _ in range(3):
            slope = float(v_end - tail(self.r_max, slope, intercept, lambda x: 1.0))
            intercept = float(
                w_end
                - slope * s_end
                + tail(self.r_max, slope, intercept, lambda x: np.log(x / self.r_max))
            )

        s_tail = np.linspace(s_end - np.log(10.0), s_end, 12)
        v_tail = sol.sol(s_tail)[w_index + 1]
        estimates = np.array(
            [
                v - tail(np.exp(s), slope, intercept, lambda x: 1.0)
                for s, v in zip(s_tail, v_tail)
            ]
        )
        variation = float(np.max(np.abs(estimates - slope)))
        if variation > self.slope_tol:
            raise SlopeNotConverged(
                f"{label}: far-field slope varies by {variation:.2e} over the last decade"
            )
        return slope, intercept

    def solve_w0(self) -> dict:
        """w0: ряд, сэмплы на сетке, C0 и B0."""
        series = launch_series(self.taylor_terms)
        w_start, dw_start = eval_series(series, self.r_launch)

        def rhs(s, y):
            r = np.exp(s)
            scale = r**2 * exp_U(r)
            return [y[1], -scale * source_f0(y[0], eval_U(r))]

        sol = self._integrate(rhs, np.array([w_start, self.r_launch * dw_start]), "w0")
        c0, b0 = self._far_field(
            sol, 0, "w0", lambda w, x: source_f0(w, eval_U(x))
        )
        samples = sol.sol(self.s_grid)
        self.logger.info(f"w0 solved: C0={c0:.12f}, B0={b0:.12f}")
        return {"series": series, "w": samples[0], "v": samples[1], "c": c0, "b": b0}

    def solve_w1(self, w0: dict) -> dict:
        """w1 интегрируется совместно с w0 (ряд w0 нужен для старта)."""
        series = launch_series(self.taylor_terms, w0_coef=w0["series"])
        w0_start, dw0_start = eval_series(w0["series"], self.r_launch)
        w1_start, dw1_start = eval_series(series, self.r_launch)

        def rhs(s, y):
            r = np.exp(s)
            scale = r**2 * exp_U(r)
            u = eval_U(r)
            return [
                y[1],
                -scale * source_f0(y[0], u),
                y[3],
                -scale * source_f1(y[2], y[0], u),
            ]

        y0 = np.array(
            [w0_start, self.r_launch * dw0_start, w1_start, self.r_launch * dw1_start]
        )
        sol = self._integrate(rhs, y0, "w1")
        c0, b0 = w0["c"], w0["b"]
        c1, b1 = self._far_field(
            sol,
            2,
            "w1",
            lambda w, x: source_f1(w, c0 * np.log(x) + b0, eval_U(x)),
        )
        samples = sol.sol(self.s_grid)
        self.logger.info(f"w1 solved: C1={c1:.12f}, B1={b1:.12f}")
        return {"series": series, "w": samples[2], "v": samples[3], "c": c1, "b": b1}

    def build_table(self, w0: Optional[dict] = None, w1: Optional[dict] = None) -> ProfileTable:
        w0 = w0 or self.solve_w0()
        w1 = w1 or self.solve_w1(w0)
        r = np.exp(self.s_grid)
        radii = np.concatenate([[0.0], r])
        return ProfileTable(
            radii=radii,
            u_vals=eval_U(radii),
            w0_vals=np.concatenate([[0.0], w0["w"]]),
            w1_vals=np.concatenate([[0.0], w1["w"]]),
            w0_deriv=np.concatenate([[0.0], w0["v"] / r]),
            w1_deriv=np.concatenate([[0.0], w1["v"] / r]),
            c0=w0["c"],
            c1=w1["c"],
            b0=w0["b"],
            b1=w1["b"],
            r_launch=self.r_launch,
            r_max=self.r_max,
            w0_series=w0["series"],
            w1_series=w1["series"],
        )
