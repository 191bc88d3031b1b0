import json
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from src.core.schemas import DiscreteSolution, SpectrumReport
from src.pde.fem import FieldInterpolator
from src.pde.mesh import Mesh
from src.utils.storage import to_jsonable


def save_snapshot(path: Path, mesh: Mesh, sol: DiscreteSolution, extra: Optional[Dict] = None) -> Path:
    """Сетка + узловые значения + метаданные (json в поле meta)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "p": sol.p,
        "residual_norm": sol.residual_norm,
        "iterations": sol.iterations,
        "peak_points": sol.peak_points,
        "peak_values": sol.peak_values,
        "eps_measured": sol.eps_measured,
        "energy": sol.energy,
        "p_path": sol.p_path,
    }
    meta.update(extra or {})
    np.savez(
        path,
        nodes=mesh.nodes,
        triangles=mesh.triangles,
        boundary=mesh.boundary,
        u=sol.u,
        meta=np.array(json.dumps(to_jsonable(meta), sort_keys=True)),
    )
    return path


def load_snapshot(path: Path) -> Dict:
    with np.load(path, allow_pickle=False) as data:
        out = {name: np.array(data[name]) for name in ("nodes", "triangles", "boundary", "u")}
        out["meta"] = json.loads(str(data["meta"]))
    return out


def ray_profiles(
    mesh: Mesh, sol: DiscreteSolution, center: np.ndarray, angles: Sequence[float], samples: int = 200
) -> pd.DataFrame:
    """u вдоль лучей из center до границы (расстояние выбирается по ближайшему граничному узлу)."""
    interpolate = FieldInterpolator(mesh)
    boundary_nodes = mesh.nodes[mesh.boundary]
    frames = []
    for angle in angles:
        direction = np.array([np.cos(angle), np.sin(angle)])
        along = (boundary_nodes - center) @ direction
        lateral = np.abs((boundary_nodes - center) @ np.array([-direction[1], direction[0]]))
        reach = float(along[np.argmin(np.where(along > 0, lateral, np.inf))])
        r = np.linspace(0.0, reach, samples)
        values = interpolate(sol.u, center + r[:, None] * direction)
        frames.append(pd.DataFrame({"p": sol.p, "angle": angle, "r": r, "u": values}))
    return pd.concat(frames, ignore_index=True)


def eigenvalue_table(spectra: Dict[float, SpectrumReport]) -> pd.DataFrame:
    """Таблица p, номер l, λ_{p,l}, (λ − 1)·p."""
    rows = []
    for p, report in sorted(spectra.items()):
        for l, lam in enumerate(report.eigenvalues):
            rows.append({"p": p, "index": l + 1, "lambda": lam, "p_times_lambda_minus_1": p * (lam - 1.0)})
    return pd.DataFrame(rows)


def write_table(df: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.12g")
    return path
