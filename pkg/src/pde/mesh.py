from typing import List, Optional

import numpy as np
from omegaconf import DictConfig
from pydantic import Field
from scipy.spatial import Delaunay, cKDTree

from src.core.exceptions import MeshTooCoarse
from src.core.schemas import ArrayModel
from src.domain import DomainModel
from src.utils.logger import get_logger


class Mesh(ArrayModel):
    """Треугольная сетка P1: узлы, треугольники (CCW), маска граничных узлов."""

    nodes: np.ndarray = Field(..., description="(n, 2)")
    triangles: np.ndarray = Field(..., description="(t, 3), ориентация против часовой стрелки")
    boundary: np.ndarray = Field(..., description="bool (n,), узлы на r(θ)")
    spike_centers: np.ndarray = Field(default_factory=lambda: np.zeros((0, 2)))
    rosette_radii: np.ndarray = Field(default_factory=lambda: np.zeros(0))
    core_spacing: np.ndarray = Field(default_factory=lambda: np.zeros(0))

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def interior(self) -> np.ndarray:
        return np.nonzero(~self.boundary)[0]

    @property
    def areas(self) -> np.ndarray:
        a, b, c = (self.nodes[self.triangles[:, i]] for i in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    def nodes_within(self, center: np.ndarray, radius: float) -> np.ndarray:
        return np.nonzero(np.linalg.norm(self.nodes - center, axis=-1) < radius)[0]


class MeshBuilder:
    """
    Фоновая сетка в отображенных полярных координатах (кольца ρ_i·r(θ), число
    углов растет с ρ) плюс структурированная «розетка» вокруг каждого спайка:
    шаг ε̄/cells_per_eps до радиуса core_radius·ε̄, дальше геометрический рост
    до R_j = rosette_fraction·(зазор). Фон и внешние кольца розеток
    склеиваются триангуляцией Делоне.
    """

    def __init__(self, cfg: DictConfig):
        self.logger = get_logger(self.__class__.__name__)
        mc = cfg.mesh
        self.background_rings = int(mc.background_rings)
        self.background_angles = int(mc.background_angles)
        self.rosette_angles = int(mc.rosette_angles)
        self.cells_per_eps = float(mc.cells_per_eps)
        self.core_radius = float(mc.core_radius)
        self.grading = float(mc.grading)
        self.rosette_fraction = float(mc.rosette_fraction)

    # -------------------------------------------------------------- pieces

    def _background(self, domain: DomainModel, rings: int, angles: int):
        points = [np.array([domain.center])]
        boundary = [np.array([False])]
        for i in range(1, rings + 1):
            rho = i / rings
            count = max(6, int(round(angles * rho)))
            theta = 2.0 * np.pi * (np.arange(count) + 0.5 * (i % 2)) / count
            points.append(domain.to_cartesian(np.full(count, rho), theta))
            boundary.append(np.full(count, i == rings))
        return np.concatenate(points), np.concatenate(boundary)

    def _rosette_radii(self, eps: float, outer: float, resolution: float) -> np.ndarray:
        h = eps / (self.cells_per_eps * resolution)
        core = self.core_radius * eps
        radii = list(np.arange(1, int(np.ceil(core / h)) + 1) * h)
        while radii[-1] < outer:
            h *= self.grading
            radii.append(radii[-1] + h)
        radii = np.asarray(radii)
        radii = radii[radii <= outer]
        return radii if radii.size else np.array([outer])

    def _rosette(self, center: np.ndarray, radii: np.ndarray, angles: int, offset: int):
        """Узлы (центр + кольца) и структурированные треугольники розетки."""
        theta = 2.0 * np.pi * np.arange(angles) / angles
        ring_points = center + radii[:, None, None] * np.stack(
            [np.cos(theta), np.sin(theta)], axis=-1
        )[None]
        nodes = np.concatenate([center[None], ring_points.reshape(-1, 2)])

        def index(ring: int, a: np.ndarray) -> np.ndarray:
            return offset + 1 + ring * angles + (a % angles)

        a = np.arange(angles)
        tris = [np.stack([np.full(angles, offset), index(0, a), index(0, a + 1)], axis=-1)]
        for ring in range(radii.size - 1):
            flip = (a + ring) % 2 == 0
            inner0, inner1 = index(ring, a), index(ring, a + 1)
            outer0, outer1 = index(ring + 1, a), index(ring + 1, a + 1)
            first = np.where(flip[:, None], np.stack([inner0, outer0, outer1], -1), np.stack([inner0, outer0, inner1], -1))
            second = np.where(flip[:, None], np.stack([inner0, outer1, inner1], -1), np.stack([inner1, outer0, outer1], -1))
            tris += [first, second]
        outer_ring = index(radii.size - 1, a)
        return nodes, np.concatenate(tris), outer_ring

    # -------------------------------------------------------------- build

    def build(
        self,
        domain: DomainModel,
        centers: Optional[np.ndarray] = None,
        eps_bar: Optional[np.ndarray] = None,
        resolution: float = 1.0,
    ) -> Mesh:
        rings = max(4, int(round(self.background_rings * resolution)))
        angles = max(12, int(round(self.background_angles * resolution)))
        nodes, boundary = self._background(domain, rings, angles)
        background_h = float(domain.diameter) / (2.0 * rings)

        centers = np.zeros((0, 2)) if centers is None else np.asarray(centers, dtype=float).reshape(-1, 2)
        eps_bar = np.zeros(0) if eps_bar is None else np.asarray(eps_bar, dtype=float).ravel()
        rosette_angles = 4 * max(2, int(round(self.rosette_angles * resolution / 4)))

        outer = np.zeros(centers.shape[0])
        for j, xi in enumerate(centers):
            clearance = float(domain.boundary_distance(xi)[0])
            others = np.delete(centers, j, axis=0)
            if others.size:
                clearance = min(clearance, float(np.min(np.linalg.norm(others - xi, axis=-1))))
            outer[j] = self.rosette_fraction * clearance

        keep = np.ones(nodes.shape[0], dtype=bool)
        rosettes: List[tuple] = []
        for j, xi in enumerate(centers):
            radii = self._rosette_radii(eps_bar[j], outer[j], resolution)
            spacing = max(radii[-1] - radii[-2] if radii.size > 1 else radii[-1], 2.0 * np.pi * radii[-1] / rosette_angles)
            margin = 0.7 * max(spacing, background_h)
            keep &= np.linalg.norm(nodes - xi, axis=-1) > radii[-1] + margin
            rosettes.append((xi, radii))
        nodes, boundary = nodes[keep], boundary[keep]

        structured = []
        glue_rings = []
        offset = nodes.shape[0]
        all_nodes = [nodes]
        all_boundary = [boundary]
        for xi, radii in rosettes:
            r_nodes, r_tris, outer_ring = self._rosette(xi, radii, rosette_angles, offset)
            all_nodes.append(r_nodes)
            all_boundary.append(np.zeros(r_nodes.shape[0], dtype=bool))
            structured.append(r_tris)
            glue_rings.append(outer_ring)
            offset += r_nodes.shape[0]
        nodes = np.concatenate(all_nodes)
        boundary = np.concatenate(all_boundary)

        # Делоне по фону и внешним кольцам розеток
        glue = np.concatenate([np.arange(all_nodes[0].shape[0])] + glue_rings)
        local = Delaunay(nodes[glue]).simplices
        tris = glue[local]
        ring_id = np.full(nodes.shape[0], -1)
        for j, ring in enumerate(glue_rings):
            ring_id[ring] = j
        ids = ring_id[tris]
        inside_rosette = (ids[:, 0] >= 0) & (ids[:, 0] == ids[:, 1]) & (ids[:, 1] == ids[:, 2])
        centroids = nodes[tris].mean(axis=1)
        tris = tris[~inside_rosette & domain.contains(centroids)]
        area = np.abs(self._signed_area(nodes, tris))
        tris = tris[area > 1e-12 * area.max()]
        triangles = np.concatenate([tris] + structured) if structured else tris

        mesh = self._finalize(nodes, triangles, boundary, centers, outer, eps_bar, resolution)
        self.logger.info(
            f"Mesh for {domain.name}: {mesh.n_nodes} nodes, {mesh.triangles.shape[0]} triangles, "
            f"{int(mesh.boundary.sum())} boundary nodes"
        )
        return mesh

    @staticmethod
    def _signed_area(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
        a, b, c = (nodes[triangles[:, i]] for i in range(3))
        return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])

    def _finalize(self, nodes, triangles, boundary, centers, outer, eps_bar, resolution) -> Mesh:
        signed = self._signed_area(nodes, triangles)
        flip = signed < 0.0
        triangles[flip] = triangles[flip][:, [0, 2, 1]]

        used = np.zeros(nodes.shape[0], dtype=bool)
        used[triangles.ravel()] = True
        if not used[boundary].all():
            self.logger.warning(f"{int((~used[boundary]).sum())} boundary nodes left unused")
        remap = np.cumsum(used) - 1
        mesh = Mesh(
            nodes=nodes[used],
            triangles=remap[triangles],
            boundary=boundary[used],
            spike_centers=centers,
            rosette_radii=outer,
            core_spacing=eps_bar / (self.cells_per_eps * resolution),
        )
        if np.any(mesh.areas <= 0.0):
            raise MeshTooCoarse("degenerate triangles after orientation")
        return mesh
