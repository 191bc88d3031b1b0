from typing import Dict, List, Optional, Sequence

import numpy as np
from omegaconf import DictConfig

from src.core.exceptions import BallOutsideDomain
from src.core.schemas import CheckRow, DiscreteSolution, IdentityResidual, SpectrumReport
from src.domain import DomainModel, GreenFunction
from src.pde.fem import FieldInterpolator, P1Space, positive_power
from src.profiles import ProfileEvaluator, eval_U
from src.utils.logger import get_logger

_INV_2PI = 1.0 / (2.0 * np.pi)


def circle(center: np.ndarray, radius: float, n: int):
    """Узлы трапеций на ∂B_radius(center): точки, нормали, вес dσ."""
    phi = 2.0 * np.pi * np.arange(n) / n
    normal = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    return center + radius * normal, normal, 2.0 * np.pi * radius / n


def _relative(lhs: float, rhs: float, scale: float) -> float:
    return abs(lhs - rhs) / max(scale, 1e-300)


class LocalIdentities:
    """
    Локальные тождества для пары (u_p, v_{p,l}) на шаре B_d(x_{p,j}):
    формула Грина, дилатационное и трансляционные тождества Похожаева.
    Граничные интегралы: трапеции по узлам окружности, u и ∇u (восстановленный)
    интерполируются с сетки; объемные: точки квадратуры внутри шара.
    """

    def __init__(self, domain: DomainModel, space: P1Space, cfg: DictConfig):
        self.logger = get_logger(self.__class__.__name__)
        self.domain = domain
        self.space = space
        self.interpolate = FieldInterpolator(space.mesh)
        self.boundary_nodes = int(cfg.identities.boundary_nodes)
        self.radius_fraction = float(cfg.identities.radius_fraction)
        self.u_floor = float(cfg.solver.u_floor)

    def default_radius(self, peaks: np.ndarray, j: int) -> float:
        clearance = float(self.domain.boundary_distance(peaks[j])[0])
        others = np.delete(peaks, j, axis=0)
        if others.size:
            clearance = min(clearance, 0.5 * float(np.min(np.linalg.norm(others - peaks[j], axis=-1))))
        return self.radius_fraction * clearance

    def _check_ball(self, peaks: np.ndarray, j: int, d: float) -> None:
        pts, _, _ = circle(peaks[j], d, self.boundary_nodes)
        if not self.domain.contains(pts).all():
            raise BallOutsideDomain(f"B_{d:.3e}(x_{j}) leaves the domain")
        others = np.delete(peaks, j, axis=0)
        if others.size and np.min(np.linalg.norm(others - peaks[j], axis=-1)) <= 2.0 * d:
            raise BallOutsideDomain(f"B_{d:.3e}(x_{j}) meets another spike's ball")

    def pohozaev_check(
        self,
        sol: DiscreteSolution,
        spectrum: SpectrumReport,
        j: int,
        l: int,
        d: Optional[float] = None,
    ) -> List[IdentityResidual]:
        p = sol.p
        lam = float(spectrum.eigenvalues[l])
        u, v = sol.u, spectrum.eigenvectors[:, l]
        center = sol.peak_points[j]
        d = self.default_radius(sol.peak_points, j) if d is None else float(d)
        self._check_ball(sol.peak_points, j, d)

        pts, nu, ds = circle(center, d, self.boundary_nodes)
        ub, vb = self.interpolate(u, pts), self.interpolate(v, pts)
        gu = self.interpolate(self.space.recovered_gradient(u), pts)
        gv = self.interpolate(self.space.recovered_gradient(v), pts)
        dnu, dnv = np.sum(gu * nu, axis=-1), np.sum(gv * nu, axis=-1)
        up_b = positive_power(ub, p, self.u_floor)

        q = self.space.quad_points
        inside = np.linalg.norm(q - center, axis=-1) < d
        w = np.where(inside, self.space.quad_weights, 0.0)
        uq, vq = self.space.at_quad(u), self.space.at_quad(v)
        up_q = positive_power(uq, p, self.u_floor)
        upm1_q = positive_power(uq, p - 1.0, self.u_floor)
        grad_u = self.space.gradients(u)[:, None, :]
        z = q - center

        records = []

        def add(name: str, lhs: float, rhs: float, scale: float) -> None:
            records.append(
                IdentityResidual(
                    identity=name,
                    spike=j,
                    eigen_index=l,
                    radius=d,
                    lhs=lhs,
                    rhs=rhs,
                    relative_residual=_relative(lhs, rhs, scale),
                )
            )

        # (pλ − 1)∫_B u^p v = ∫_∂B (∂_ν u v − ∂_ν v u)
        vol = np.sum(w * up_q * vq)
        lhs = (p * lam - 1.0) * vol
        rhs = ds * np.sum(dnu * vb - dnv * ub)
        scale = abs(p * lam - 1.0) * np.sum(w * np.abs(up_q * vq)) + ds * np.sum(
            np.abs(dnu * vb) + np.abs(dnv * ub)
        )
        add("green_second_identity", float(lhs), float(rhs), float(scale))

        # P_j(u, v) = d∫ u^p v − 2∫_B u^p v + (λ−1)p∫_B (z·∇u) v u^{p−1}
        p_form = -2.0 * d * ds * np.sum(dnu * dnv) + d * ds * np.sum(np.sum(gu * gv, axis=-1))
        z_grad = np.sum(z * grad_u, axis=-1)
        terms = [
            d * ds * np.sum(up_b * vb),
            -2.0 * vol,
            (lam - 1.0) * p * np.sum(w * z_grad * vq * upm1_q),
        ]
        scale = (
            2.0 * d * ds * np.sum(np.abs(dnu * dnv))
            + d * ds * np.sum(np.abs(np.sum(gu * gv, axis=-1)))
            + sum(abs(t) for t in terms)
        )
        add("pohozaev_dilation", float(p_form), float(sum(terms)), float(scale))

        # Q_j(u, v)_i = ∫_∂B u^p v ν_i + (λ−1)p∫_B u^{p−1} v ∂_i u
        for i in range(2):
            q_form = ds * np.sum(-dnv * gu[:, i] - dnu * gv[:, i] + np.sum(gu * gv, axis=-1) * nu[:, i])
            terms = [
                ds * np.sum(up_b * vb * nu[:, i]),
                (lam - 1.0) * p * np.sum(w * upm1_q * vq * grad_u[..., i]),
            ]
            scale = ds * np.sum(
                np.abs(dnv * gu[:, i]) + np.abs(dnu * gv[:, i]) + np.abs(np.sum(gu * gv, axis=-1))
            ) + sum(abs(t) for t in terms)
            add(f"pohozaev_translation_x{i + 1}", float(q_form), float(sum(terms)), float(scale))
        return records

    # -------------------------------------------------------------- rescaled views

    def limit_profile_check(
        self, sol: DiscreteSolution, evaluator: ProfileEvaluator, j: int, radius: float = 10.0
    ) -> Dict[str, float]:
        """
        w_{p,j}(y) = (p/u(x_{p,j}))(u(x_{p,j} + ε_{p,j} y) − u(x_{p,j})) против U, w0, w1
        на |y| ≤ radius (8 лучей × 40 точек).
        """
        p = sol.p
        r = np.linspace(0.0, radius, 41)[1:]
        phi = 2.0 * np.pi * np.arange(8) / 8
        y = (r[:, None, None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)[None]).reshape(-1, 2)
        rho = np.linalg.norm(y, axis=-1)
        peak = sol.peak_values[j]
        values = self.interpolate(sol.u, sol.peak_points[j] + sol.eps_measured[j] * y)
        w = (p / peak) * (values - peak)
        first = w - eval_U(rho)
        second = p * first - evaluator.w0(rho)
        third = p**2 * (first - evaluator.w0(rho) / p) - evaluator.w1(rho)
        return {
            "sup_w_minus_U": float(np.max(np.abs(first))),
            "sup_first_order": float(np.max(np.abs(second))),
            "sup_second_order": float(np.max(np.abs(third))),
        }

    def span_fraction(self, sol: DiscreteSolution, v: np.ndarray, radius: float = 10.0) -> float:
        """
        Доля L²-массы v на ∪_j {|y| ≤ radius}, захваченная
        span{y_1/(8+|y|²), y_2/(8+|y|²), (8−|y|²)/(8+|y|²)} каждого спайка.
        """
        q = self.space.quad_points
        vq = self.space.at_quad(v)
        columns, weights = [], np.zeros_like(vq)
        k = sol.peak_points.shape[0]
        for j in range(k):
            eps = sol.eps_measured[j]
            y = (q - sol.peak_points[j]) / eps
            r2 = np.sum(y**2, axis=-1)
            inside = r2 <= radius**2
            weights = np.where(inside, self.space.quad_weights / eps**2, weights)
            for phi in (y[..., 0] / (8.0 + r2), y[..., 1] / (8.0 + r2), (8.0 - r2) / (8.0 + r2)):
                columns.append(np.where(inside, phi, 0.0).ravel())
        Phi = np.stack(columns, axis=-1)
        wv = weights.ravel()
        total = float(np.sum(wv * vq.ravel() ** 2))
        if total == 0.0:
            return 0.0
        gram = Phi.T @ (wv[:, None] * Phi)
        rhs = Phi.T @ (wv * vq.ravel())
        coef = np.linalg.lstsq(gram, rhs, rcond=None)[0]
        return float(rhs @ coef) / total


class GreenQuadraticForms:
    """
    Квадратичные формы P_j, Q_j на функциях Грина G(x_s, ·) и ∂_hG(x_s, ·)
    (∂ по первому аргументу, D по второму) и их замкнутые значения.
    """

    def __init__(self, green: GreenFunction, cfg: DictConfig):
        self.logger = get_logger(self.__class__.__name__)
        self.green = green
        self.boundary_nodes = int(cfg.identities.boundary_nodes)
        self.atol = float(cfg.checks.quadform_atol)

    def _fields(self, pts: np.ndarray, source: np.ndarray):
        """∇_x G(source, x) и ∇_x ∂_hG(source, x) в точках pts."""
        g = self.green.green_many(pts, source, order=1)
        grad = g["grad_x"]  # (n, 2)
        grad_dh = np.transpose(g["hess_xy"], (2, 0, 1))  # [h][n, i] = ∂x_i ∂y_h
        return grad, grad_dh

    @staticmethod
    def _P(d, nu, ds, gu, gv) -> float:
        return float(
            -2.0 * d * ds * np.sum(np.sum(gu * nu, -1) * np.sum(gv * nu, -1))
            + d * ds * np.sum(np.sum(gu * gv, -1))
        )

    @staticmethod
    def _Q(nu, ds, gu, gv, i) -> float:
        dnu, dnv = np.sum(gu * nu, -1), np.sum(gv * nu, -1)
        return float(ds * np.sum(-dnv * gu[:, i] - dnu * gv[:, i] + np.sum(gu * gv, -1) * nu[:, i]))

    def check(self, points: np.ndarray, radius: float) -> List[CheckRow]:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        k = points.shape[0]
        for j in range(k):
            pts, _, _ = circle(points[j], 2.0 * radius, self.boundary_nodes)
            if not self.green.domain.contains(pts).all():
                raise BallOutsideDomain(f"B_2θ(x_{j}) leaves the domain, θ = {radius:.3e}")
            others = np.delete(points, j, axis=0)
            if others.size and np.min(np.linalg.norm(others - points[j], axis=-1)) <= 2.0 * radius:
                raise BallOutsideDomain(f"balls around x_{j} overlap, θ = {radius:.3e}")

        robin = [self.green.robin(x) for x in points]
        pair = {
            (s, j): self.green.green(points[s], points[j]) for s in range(k) for j in range(k) if s != j
        }
        rows: List[CheckRow] = []

        def add(name: str, predicted: float, computed: float, gating: bool = True) -> None:
            error = abs(computed - predicted)
            rows.append(
                CheckRow(
                    name=name,
                    predicted=predicted,
                    computed=computed,
                    tolerance=self.atol,
                    passed=error < self.atol,
                    gating=gating,
                )
            )

        for j in range(k):
            pts, nu, ds = circle(points[j], radius, self.boundary_nodes)
            fields = [self._fields(pts, points[s]) for s in range(k)]
            for s in range(k):
                for m in range(k):
                    # P_j(G_s, G_m)
                    expected = -_INV_2PI if s == m == j else 0.0
                    add(f"P{j}(G{s},G{m})", expected, self._P(radius, nu, ds, fields[s][0], fields[m][0]))
                    for h in range(2):
                        # P_j(G_s, ∂_hG_m)
                        if m != j:
                            expected = 0.0
                        elif s == j:
                            expected = -0.5 * robin[j].grad[h]
                        else:
                            expected = pair[(s, j)].grad_y[h]
                        add(
                            f"P{j}(G{s},d{h}G{m})",
                            expected,
                            self._P(radius, nu, ds, fields[s][0], fields[m][1][h]),
                        )
                    for i in range(2):
                        # Q_j(G_m, G_s)_i
                        if s == m == j:
                            expected = -robin[j].grad[i]
                        elif s == j:
                            expected = pair[(m, j)].grad_y[i]
                        elif m == j:
                            expected = pair[(s, j)].grad_y[i]
                        else:
                            expected = 0.0
                        add(f"Q{j}_{i}(G{m},G{s})", expected, self._Q(nu, ds, fields[m][0], fields[s][0], i))
                        for h in range(2):
                            # Q_j(G_m, ∂_hG_s)_i, диагностика
                            if s == m == j:
                                expected = -0.5 * robin[j].hess[i, h]
                            elif m == j:
                                expected = pair[(s, j)].hess_xy[h, i]
                            elif s == j:
                                expected = pair[(j, m)].hess_xx[i, h]
                            else:
                                expected = 0.0
                            add(
                                f"Q{j}_{i}(G{m},d{h}G{s})",
                                expected,
                                self._Q(nu, ds, fields[m][0], fields[s][1][h], i),
                                gating=False,
                            )
        self.logger.info(
            f"Quadratic forms: {sum(r.passed for r in rows if r.gating)}/"
            f"{sum(r.gating for r in rows)} gating rows pass"
        )
        return rows
