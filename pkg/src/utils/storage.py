import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from pydantic import BaseModel

from src.core.schemas import MomentRecord, ProfileTable
from src.utils.logger import get_logger

logger = get_logger("Storage")

_ARRAY_FIELDS = (
    "radii",
    "u_vals",
    "w0_vals",
    "w1_vals",
    "w0_deriv",
    "w1_deriv",
    "w0_series",
    "w1_series",
)
_SCALAR_FIELDS = ("c0", "c1", "b0", "b1", "c0_moment", "c1_moment", "r_launch", "r_max")


class ProfileCache:
    """
    Кэш таблиц профилей (.npz + json-метаданные), ключ: r_max, размер сетки,
    число членов ряда и допуск интегратора.
    """

    def __init__(self, cache_dir: str):
        self.cache_dir = Path(cache_dir)

    @staticmethod
    def key(r_max: float, grid_size: int, taylor_terms: int, rtol: float) -> str:
        return f"profiles_rmax{r_max:g}_n{grid_size}_t{taylor_terms}_rtol{rtol:g}"

    def path(self, key: str) -> Path:
        return self.cache_dir / f"{key}.npz"

    def load(self, key: str) -> Optional[ProfileTable]:
        path = self.path(key)
        if not path.exists():
            return None
        try:
            with np.load(path, allow_pickle=False) as data:
                meta = json.loads(str(data["meta"]))
                arrays = {name: np.array(data[name]) for name in _ARRAY_FIELDS}
        except (OSError, KeyError, ValueError) as e:
            logger.warning(f"Corrupted profile cache {path}: {e}. Recomputing.")
            return None
        moments = meta.pop("moments", None)
        table = ProfileTable(**arrays, **meta)
        if moments is not None:
            table.moments = MomentRecord(**moments)
        logger.info(f"Profiles loaded from cache {path}")
        return table

    def save(self, key: str, table: ProfileTable) -> Path:
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        meta = {name: getattr(table, name) for name in _SCALAR_FIELDS}
        meta["moments"] = table.moments.model_dump() if table.moments else None
        path = self.path(key)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(
            tmp,
            meta=np.array(json.dumps(meta, sort_keys=True)),
            **{name: getattr(table, name) for name in _ARRAY_FIELDS},
        )
        os.replace(tmp, path)
        logger.info(f"Profiles cached to {path}")
        return path


def to_jsonable(obj: Any) -> Any:
    """numpy и pydantic объекты → чистый JSON (списки, float, int)."""
    if isinstance(obj, BaseModel):
        return to_jsonable(obj.model_dump())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True)
    path.write_text(text + "\n")
    return path


def digest(payload: Dict[str, Any]) -> str:
    text = json.dumps(to_jsonable(payload), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]
