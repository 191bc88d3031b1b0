import numpy as np
import pytest
from omegaconf import DictConfig, OmegaConf

from src.core.exceptions import CoincidentPoints, InvalidDomain, PointOutsideDomain
from src.core.schemas import DomainSpec, RadiusCoeffs
from src.domain import DomainModel, GreenFunction


def disc_h(x: np.ndarray, y: np.ndarray) -> float:
    return -np.log(1.0 - 2.0 * x @ y + (x @ x) * (y @ y)) / (4.0 * np.pi)


@pytest.fixture(scope="module")
def integral_green(disc: DomainModel, cfg: DictConfig) -> GreenFunction:
    raw = OmegaConf.to_container(cfg, resolve=True)
    raw["domain"]["force_integral"] = True
    return GreenFunction(disc, OmegaConf.create(raw))


def test_geometry(disc: DomainModel, two_lobe: DomainModel) -> None:
    assert disc.contains(np.array([[0.5, 0.0], [1.1, 0.0]])).tolist() == [True, False]
    assert disc.diameter == pytest.approx(2.0, rel=1e-3)
    assert two_lobe.contains(np.array([[1.5, 0.0], [0.0, 0.5]])).tolist() == [True, False]

    lobes = np.sort(np.mod(two_lobe.lobe_directions(), 2.0 * np.pi))
    assert lobes == pytest.approx([0.0, np.pi], abs=1e-2)

    with pytest.raises(InvalidDomain):
        DomainModel.from_spec(DomainSpec(kind="star", radius_coeffs=RadiusCoeffs(cos=[0.5, 0.0, 0.7])))


def test_disc_closed_form(disc_green: GreenFunction) -> None:
    x, y = np.array([0.3, 0.2]), np.array([-0.4, 0.1])
    g = disc_green.green(x, y)
    expected = -np.log(np.linalg.norm(x - y)) / (2.0 * np.pi) - disc_h(x, y)
    assert g.value == pytest.approx(expected, abs=1e-13)
    assert g.value == pytest.approx(disc_green.green(y, x).value, abs=1e-13)

    robin = disc_green.robin(x)
    r2 = x @ x
    assert robin.value == pytest.approx(-np.log(1.0 - r2) / (2.0 * np.pi), abs=1e-13)
    assert robin.grad == pytest.approx(x / (np.pi * (1.0 - r2)), abs=1e-12)

    # D²R(0) = I/π
    assert disc_green.robin(np.zeros(2)).hess == pytest.approx(np.eye(2) / np.pi, abs=1e-12)


def test_integral_matches_disc(disc_green: GreenFunction, integral_green: GreenFunction) -> None:
    rng = np.random.default_rng(0)
    for _ in range(5):
        x, y = rng.uniform(-0.5, 0.5, size=(2, 2))
        assert integral_green.green(x, y).value == pytest.approx(disc_green.green(x, y).value, abs=1e-6)
        exact, numeric = disc_green.robin(x), integral_green.robin(x)
        assert numeric.value == pytest.approx(exact.value, abs=1e-6)
        assert numeric.grad == pytest.approx(exact.grad, abs=1e-6)
        assert numeric.hess == pytest.approx(exact.hess, abs=1e-5)


def test_star_green_symmetric(lobe_green: GreenFunction) -> None:
    x, y = np.array([0.8, 0.1]), np.array([-0.6, -0.05])
    assert lobe_green.green(x, y).value == pytest.approx(lobe_green.green(y, x).value, abs=1e-8)
    # G > 0 внутри области
    assert lobe_green.green(x, y).value > 0.0


def test_harmonic_solve_reproduces_linear(disc_green: GreenFunction) -> None:
    h = disc_green.harmonic_solve(lambda t: t[:, 0] + 2.0 * t[:, 1])
    pts = np.array([[0.1, 0.2], [-0.3, 0.4]])
    assert h(pts) == pytest.approx(pts[:, 0] + 2.0 * pts[:, 1], abs=1e-10)


def test_errors(disc_green: GreenFunction) -> None:
    with pytest.raises(PointOutsideDomain):
        disc_green.robin(np.array([1.5, 0.0]))
    with pytest.raises(CoincidentPoints):
        disc_green.green(np.array([0.2, 0.2]), np.array([0.2, 0.2]))
