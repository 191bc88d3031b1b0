from src.pde.centering import CenterRefiner
from src.pde.export import eigenvalue_table, load_snapshot, ray_profiles, save_snapshot, write_table
from src.pde.fem import FieldInterpolator, P1Space, positive_power
from src.pde.identities import GreenQuadraticForms, LocalIdentities
from src.pde.mesh import Mesh, MeshBuilder
from src.pde.solver import LaneEmdenSolver
from src.pde.spectrum import SpectrumSolver

__all__ = [
    "CenterRefiner",
    "Mesh",
    "MeshBuilder",
    "P1Space",
    "FieldInterpolator",
    "positive_power",
    "LaneEmdenSolver",
    "SpectrumSolver",
    "LocalIdentities",
    "GreenQuadraticForms",
    "save_snapshot",
    "load_snapshot",
    "ray_profiles",
    "eigenvalue_table",
    "write_table",
]
