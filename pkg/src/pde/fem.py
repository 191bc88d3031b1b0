from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from src.pde.mesh import Mesh

# 6-точечное правило степени 4 на треугольнике (барицентрические координаты, веса к площади)
_A, _B = 0.445948490915965, 0.091576213509771
QUAD_BARY = np.array(
    [
        [_A, _A, 1.0 - 2.0 * _A],
        [_A, 1.0 - 2.0 * _A, _A],
        [1.0 - 2.0 * _A, _A, _A],
        [_B, _B, 1.0 - 2.0 * _B],
        [_B, 1.0 - 2.0 * _B, _B],
        [1.0 - 2.0 * _B, _B, _B],
    ]
)
QUAD_WEIGHTS = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


def positive_power(u: np.ndarray, exponent: float, floor: float) -> np.ndarray:
    """max(u, 0)^exponent как exp(exponent·log u); значения ниже floor дают 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    mask = u > floor
    out[mask] = np.exp(exponent * np.log(u[mask]))
    return out


class P1Space:
    """Кусочно-линейные элементы на Mesh: матрицы, квадратура, градиенты."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        nodes, tris = mesh.nodes, mesh.triangles
        self.areas = mesh.areas
        a, b, c = (nodes[tris[:, i]] for i in range(3))
        # ∇λ_i = (перпендикуляр к противолежащей стороне) / (2·площадь)
        edges = np.stack([c - b, a - c, b - a], axis=1)
        self.basis_grads = (
            np.stack([-edges[..., 1], edges[..., 0]], axis=-1) / (2.0 * self.areas)[:, None, None]
        )
        self.quad_points = np.einsum("qi,tid->tqd", QUAD_BARY, nodes[tris])
        self.quad_weights = self.areas[:, None] * QUAD_WEIGHTS[None, :]

        local_k = np.einsum("tid,tjd->tij", self.basis_grads, self.basis_grads) * self.areas[:, None, None]
        self.rows = np.repeat(tris, 3, axis=1).ravel()
        self.cols = np.tile(tris, (1, 3)).ravel()
        n = mesh.n_nodes
        self.stiffness = sp.csr_matrix((local_k.ravel(), (self.rows, self.cols)), shape=(n, n))
        self.mass = self.weighted_mass(np.ones_like(self.quad_weights))

    @property
    def n(self) -> int:
        return self.mesh.n_nodes

    def at_quad(self, u: np.ndarray) -> np.ndarray:
        """Значения P1-функции в точках квадратуры, массив (t, 6)."""
        return u[self.mesh.triangles] @ QUAD_BARY.T

    def load(self, f_quad: np.ndarray) -> np.ndarray:
        """Σ_T Σ_q w_q f(q) λ_i(q): вектор правой части."""
        local = np.einsum("tq,qi->ti", self.quad_weights * f_quad, QUAD_BARY)
        return np.bincount(self.mesh.triangles.ravel(), weights=local.ravel(), minlength=self.n)

    def weighted_mass(self, c_quad: np.ndarray) -> sp.csr_matrix:
        """Матрица ∫ c λ_i λ_j."""
        local = np.einsum("tq,qi,qj->tij", self.quad_weights * c_quad, QUAD_BARY, QUAD_BARY)
        return sp.csr_matrix((local.ravel(), (self.rows, self.cols)), shape=(self.n, self.n))

    def integrate(self, f_quad: np.ndarray) -> float:
        return float(np.sum(self.quad_weights * f_quad))

    def gradients(self, u: np.ndarray) -> np.ndarray:
        """Постоянный на треугольнике градиент, (t, 2)."""
        return np.einsum("ti,tid->td", u[self.mesh.triangles], self.basis_grads)

    def recovered_gradient(self, u: np.ndarray) -> np.ndarray:
        """Узловой градиент: среднее градиентов соседних треугольников с весами-площадями."""
        grads = self.gradients(u) * self.areas[:, None]
        tris = self.mesh.triangles.ravel()
        weight = np.bincount(tris, weights=np.repeat(self.areas, 3), minlength=self.n)
        out = np.stack(
            [np.bincount(tris, weights=np.repeat(grads[:, d], 3), minlength=self.n) for d in range(2)],
            axis=-1,
        )
        return out / weight[:, None]

    def energy(self, u: np.ndarray) -> float:
        """∫|∇u|²."""
        return float(u @ (self.stiffness @ u))


class FieldInterpolator:
    """Поиск треугольника (KD-дерево по центрам) и барицентрическая интерполяция."""

    def __init__(self, mesh: Mesh, candidates: int = 48):
        self.mesh = mesh
        self.centroids = mesh.nodes[mesh.triangles].mean(axis=1)
        self.tree = cKDTree(self.centroids)
        self.candidates = min(candidates, mesh.triangles.shape[0])
        self.node_tree = cKDTree(mesh.nodes)

    def locate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Индексы треугольников и барицентрические координаты; −1, если точка не найдена."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        _, cand = self.tree.query(points, k=self.candidates)
        cand = cand.reshape(points.shape[0], -1)
        verts = self.mesh.nodes[self.mesh.triangles[cand]]  # (m, c, 3, 2)
        a, b, c = verts[..., 0, :], verts[..., 1, :], verts[..., 2, :]
        det = (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])
        rel = points[:, None, :] - a
        l1 = (rel[..., 0] * (c[..., 1] - a[..., 1]) - rel[..., 1] * (c[..., 0] - a[..., 0])) / det
        l2 = ((b[..., 0] - a[..., 0]) * rel[..., 1] - (b[..., 1] - a[..., 1]) * rel[..., 0]) / det
        bary = np.stack([1.0 - l1 - l2, l1, l2], axis=-1)
        score = bary.min(axis=-1)
        best = np.argmax(score, axis=1)
        rows = np.arange(points.shape[0])
        found = score[rows, best] > -1e-9
        tri = np.where(found, cand[rows, best], -1)
        return tri, bary[rows, best]

    def __call__(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """values: узловые значения (n,) или (n, d)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        tri, bary = self.locate(points)
        values = np.asarray(values)
        out = np.einsum("mi,mi...->m...", bary, values[self.mesh.triangles[np.maximum(tri, 0)]])
        missing = tri < 0
        if np.any(missing):
            _, nearest = self.node_tree.query(points[missing])
            out[missing] = values[nearest]
        return out
