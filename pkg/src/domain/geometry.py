from pathlib import Path
from typing import Literal, Tuple, Union

import numpy as np
import yaml
from omegaconf import DictConfig
from pydantic import BaseModel, ConfigDict, PrivateAttr
from scipy.spatial import cKDTree

from src.core.exceptions import InvalidDomain, PointOutsideDomain
from src.core.schemas import DomainSpec, RadiusCoeffs

_CHECK_SAMPLES = 4096


class DomainModel(BaseModel):
    """
    Гладкая звездная область {c + ρ(cosθ, sinθ): ρ < r(θ)}.
    r(θ) задается конечным рядом Фурье. Неизменяема после создания.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["unit_disc", "star_shaped"]
    cos_coeffs: Tuple[float, ...] = (1.0,)
    sin_coeffs: Tuple[float, ...] = ()
    center: Tuple[float, float] = (0.0, 0.0)
    quadrature_nodes: int = 512
    name: str = "domain"

    _diameter: float = PrivateAttr(default=0.0)
    _tree: cKDTree = PrivateAttr(default=None)

    def model_post_init(self, __context) -> None:
        theta = np.linspace(0.0, 2.0 * np.pi, _CHECK_SAMPLES, endpoint=False)
        r = self.radius(theta)
        if not np.all(np.isfinite(r)) or np.min(r) <= 0.0:
            raise InvalidDomain(f"r(θ) must be positive, min r = {np.min(r):.3e}")
        curvature_term = self.radius(theta, order=2)
        if not np.all(np.isfinite(curvature_term)):
            raise InvalidDomain("boundary curve is not C²")
        pts = self.to_cartesian(np.ones_like(theta), theta)
        self._tree = cKDTree(pts)
        # диаметр по выборке точек границы
        diffs = pts[::8, None, :] - pts[None, ::8, :]
        self._diameter = float(np.sqrt(np.max(np.sum(diffs**2, axis=-1))))

    # -------------------------------------------------------------- factories

    @classmethod
    def from_spec(cls, spec: DomainSpec, cfg: DictConfig | None = None) -> "DomainModel":
        nodes = spec.nodes or (int(cfg.domain.nodes) if cfg is not None else 512)
        if spec.kind == "disc":
            return cls(
                kind="unit_disc",
                center=(0.0, 0.0),
                quadrature_nodes=nodes,
                name=spec.name or "unit_disc",
            )
        coeffs = spec.radius_coeffs or RadiusCoeffs()
        if not coeffs.cos:
            raise InvalidDomain("radius_coeffs.cos must contain at least a_0")
        return cls(
            kind="star_shaped",
            cos_coeffs=tuple(float(a) for a in coeffs.cos),
            sin_coeffs=tuple(float(b) for b in coeffs.sin),
            center=tuple(spec.center),
            quadrature_nodes=nodes,
            name=spec.name or "star",
        )

    @classmethod
    def from_file(cls, path: Union[str, Path], cfg: DictConfig | None = None) -> "DomainModel":
        path = Path(path)
        if not path.exists():
            raise InvalidDomain(f"Domain file not found: {path}")
        with open(path, "rt") as f:
            data = yaml.safe_load(f)
        return cls.from_spec(DomainSpec(**data), cfg)

    # -------------------------------------------------------------- geometry

    def radius(self, theta: np.ndarray, order: int = 0) -> np.ndarray:
        """r(θ) и ее производные по θ до второго порядка."""
        theta = np.asarray(theta, dtype=float)
        a = np.asarray(self.cos_coeffs)
        b = np.asarray(self.sin_coeffs)
        out = np.full_like(theta, a[0] if order == 0 else 0.0)
        for n in range(1, len(a)):
            c, s = np.cos(n * theta), np.sin(n * theta)
            out = out + a[n] * (c, -n * s, -(n**2) * c)[order]
        for n in range(1, len(b) + 1):
            c, s = np.cos(n * theta), np.sin(n * theta)
            out = out + b[n - 1] * (s, n * c, -(n**2) * s)[order]
        return out

    def to_cartesian(self, rho: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Отображение полярной сетки (ρ ∈ [0,1], θ) в область."""
        r = rho * self.radius(theta)
        return np.stack(
            [self.center[0] + r * np.cos(theta), self.center[1] + r * np.sin(theta)],
            axis=-1,
        )

    def polar(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dx = pts[:, 0] - self.center[0]
        dy = pts[:, 1] - self.center[1]
        return np.hypot(dx, dy), np.arctan2(dy, dx)

    def boundary(self, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Узлы z(θ_j), z'(θ_j), z''(θ_j) на равномерной сетке по θ."""
        theta = 2.0 * np.pi * np.arange(n) / n
        r, r1, r2 = (self.radius(theta, order=o) for o in (0, 1, 2))
        c, s = np.cos(theta), np.sin(theta)
        z = np.stack([self.center[0] + r * c, self.center[1] + r * s], axis=-1)
        dz = np.stack([r1 * c - r * s, r1 * s + r * c], axis=-1)
        ddz = np.stack(
            [r2 * c - 2.0 * r1 * s - r * c, r2 * s + 2.0 * r1 * c - r * s], axis=-1
        )
        return z, dz, ddz

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Точка внутри и не ближе `margin` к границе."""
        rho, theta = self.polar(points)
        inside = rho < self.radius(theta)
        if margin > 0.0:
            inside &= self.boundary_distance(points) > margin
        return inside

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dist, _ = self._tree.query(pts)
        return dist

    def require_interior(self, points: np.ndarray) -> None:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not np.all(self.contains(pts)):
            raise PointOutsideDomain(f"Points outside {self.name}: {pts.tolist()}")

    @property
    def diameter(self) -> float:
        return self._diameter

    def lobe_directions(self) -> np.ndarray:
        """Углы локальных максимумов r(θ), по убыванию r."""
        theta = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
        r = self.radius(theta)
        peaks = (r > np.roll(r, 1)) & (r >= np.roll(r, -1))
        idx = np.nonzero(peaks)[0]
        if idx.size == 0:
            return np.array([0.0])
        return theta[idx[np.argsort(-r[idx], kind="stable")]]
