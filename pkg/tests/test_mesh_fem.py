import numpy as np
import pytest
import scipy.sparse.linalg as spla
from omegaconf import DictConfig

from src.domain import DomainModel
from src.pde import FieldInterpolator, Mesh, MeshBuilder, P1Space, positive_power


@pytest.fixture(scope="module")
def disc_mesh(disc: DomainModel, cfg: DictConfig) -> Mesh:
    return MeshBuilder(cfg).build(disc)


@pytest.fixture(scope="module")
def spike_mesh(disc: DomainModel, cfg: DictConfig) -> Mesh:
    return MeshBuilder(cfg).build(disc, np.array([[0.1, -0.05]]), np.array([1e-3]))


def test_background_mesh(disc_mesh: Mesh) -> None:
    assert np.all(disc_mesh.areas > 0.0)
    assert disc_mesh.areas.sum() == pytest.approx(np.pi, rel=5e-3)
    radii = np.linalg.norm(disc_mesh.nodes[disc_mesh.boundary], axis=-1)
    assert radii == pytest.approx(np.ones_like(radii), abs=1e-12)


def test_rosette_mesh(spike_mesh: Mesh) -> None:
    center = np.array([0.1, -0.05])
    assert np.all(spike_mesh.areas > 0.0)
    assert spike_mesh.areas.sum() == pytest.approx(np.pi, rel=5e-3)
    # узел в центре розетки и мелкий шаг внутри ε̄
    assert np.min(np.linalg.norm(spike_mesh.nodes - center, axis=-1)) < 1e-14
    assert spike_mesh.nodes_within(center, 1e-3).size >= 7 * 32
    assert spike_mesh.core_spacing[0] == pytest.approx(1e-3 / 8)


def test_p1_operators(disc_mesh: Mesh) -> None:
    space = P1Space(disc_mesh)
    ones = np.ones(disc_mesh.n_nodes)
    assert np.max(np.abs(space.stiffness @ ones)) < 1e-10
    assert ones @ (space.mass @ ones) == pytest.approx(disc_mesh.areas.sum(), rel=1e-12)

    x, y = disc_mesh.nodes[:, 0], disc_mesh.nodes[:, 1]
    linear = 2.0 * x + 3.0 * y
    assert space.gradients(linear) == pytest.approx(np.tile([2.0, 3.0], (disc_mesh.triangles.shape[0], 1)))
    assert space.recovered_gradient(linear) == pytest.approx(np.tile([2.0, 3.0], (disc_mesh.n_nodes, 1)))
    assert space.energy(linear) == pytest.approx(13.0 * disc_mesh.areas.sum(), rel=1e-10)
    assert space.integrate(space.at_quad(x**2)) == pytest.approx(np.pi / 4.0, rel=2e-2)

    assert positive_power(np.array([-1.0, 0.0, 4.0]), 0.5, 1e-300) == pytest.approx([0.0, 0.0, 2.0])


def test_poisson_solve(disc_mesh: Mesh) -> None:
    # −Δu = 4, u = 0 на границе: u = 1 − |x|²
    space = P1Space(disc_mesh)
    interior = disc_mesh.interior
    rhs = space.load(np.full_like(space.quad_weights, 4.0))[interior]
    K = space.stiffness[interior][:, interior].tocsc()
    u = np.zeros(disc_mesh.n_nodes)
    u[interior] = spla.spsolve(K, rhs)
    exact = 1.0 - np.sum(disc_mesh.nodes**2, axis=-1)
    assert np.max(np.abs(u - exact)) < 2e-2


def test_interpolator(disc_mesh: Mesh) -> None:
    interpolate = FieldInterpolator(disc_mesh)
    rng = np.random.default_rng(3)
    r, phi = rng.uniform(0.0, 0.9, 50), rng.uniform(0.0, 2.0 * np.pi, 50)
    points = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
    values = 1.0 + disc_mesh.nodes[:, 0] - 2.0 * disc_mesh.nodes[:, 1]
    assert interpolate(values, points) == pytest.approx(1.0 + points[:, 0] - 2.0 * points[:, 1], abs=1e-10)
    tri, _ = interpolate.locate(points)
    assert np.all(tri >= 0)
