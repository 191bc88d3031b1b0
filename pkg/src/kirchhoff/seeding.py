import itertools
from typing import List

import numpy as np
from omegaconf import DictConfig

from src.core.exceptions import PointOutsideDomain, PointsTooClose
from src.domain import DomainModel
from src.kirchhoff.kirchhoff import KirchhoffRouth, canonical_order
from src.utils.logger import get_logger

logger = get_logger("Seeding")


def lobe_candidates(domain: DomainModel, direction: float, count: int) -> np.ndarray:
    """Точки вдоль луча лепестка: доли 0.2..0.8 от r(θ) и сдвиги по углу."""
    fractions = np.linspace(0.2, 0.8, count)
    offsets = np.array([0.0, -0.15, 0.15])
    theta = direction + offsets
    rho, angles = np.meshgrid(fractions, theta, indexing="ij")
    return domain.to_cartesian(rho.ravel(), angles.ravel())


def grid_seeds(kr: KirchhoffRouth, k: int, cfg: DictConfig) -> List[np.ndarray]:
    """
    Грубый перебор по произведению подобластей лепестков: спайк j отправляется
    в лепесток j mod (число лепестков), конфигурации ранжируются по ‖∇Ψ_k‖.
    Возвращает не больше n_seeds лучших, без конфигураций, эквивалентных
    с точностью до перестановки.
    """
    kc = cfg.kirchhoff
    domain = kr.domain
    lobes = domain.lobe_directions()
    per_lobe = int(kc.grid_per_lobe)
    pools = []
    for j in range(k):
        direction = lobes[j % lobes.size] + (j // lobes.size) * np.pi / max(k, 2)
        pools.append(lobe_candidates(domain, float(direction), per_lobe))

    scored = {}
    for combo in itertools.product(*[range(len(pool)) for pool in pools]):
        points = np.array([pools[j][i] for j, i in enumerate(combo)])
        points = points[canonical_order(points)]
        key = tuple(np.round(points, 10).ravel())
        if key in scored:
            continue
        if not kr.admissible(points):
            continue
        try:
            conf = kr.psi_eval(points)
        except (PointsTooClose, PointOutsideDomain):
            continue
        scored[key] = (conf.grad_norm, points)

    ranked = sorted(scored.values(), key=lambda item: (item[0], tuple(item[1].ravel())))
    seeds = [points for _, points in ranked[: int(kc.n_seeds)]]
    logger.info(
        f"Grid seeding k={k}: {len(scored)} candidates over {lobes.size} lobe(s), "
        f"{len(seeds)} seeds kept"
    )
    return seeds
