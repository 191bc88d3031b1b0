from src.kirchhoff.kirchhoff import KirchhoffRouth, canonical_order
from src.kirchhoff.seeding import grid_seeds, lobe_candidates

__all__ = ["KirchhoffRouth", "canonical_order", "grid_seeds", "lobe_candidates"]
