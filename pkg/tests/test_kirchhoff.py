import numpy as np
import pytest
from omegaconf import DictConfig

from src.core.exceptions import NoConvergence, PointOutsideDomain, PointsTooClose
from src.core.schemas import SpikeConfiguration
from src.domain import GreenFunction
from src.kirchhoff import KirchhoffRouth, canonical_order, grid_seeds, lobe_candidates


@pytest.fixture(scope="module")
def disc_kr(disc_green: GreenFunction, cfg: DictConfig) -> KirchhoffRouth:
    return KirchhoffRouth(disc_green, cfg)


@pytest.fixture(scope="module")
def lobe_kr(lobe_green: GreenFunction, cfg: DictConfig) -> KirchhoffRouth:
    return KirchhoffRouth(lobe_green, cfg)


@pytest.fixture(scope="module")
def lobe_critical(lobe_kr: KirchhoffRouth, cfg: DictConfig) -> SpikeConfiguration:
    return lobe_kr.find_critical(2, grid_seeds(lobe_kr, 2, cfg))


def test_psi_single_spike_is_robin(disc_kr: KirchhoffRouth, disc_green: GreenFunction) -> None:
    x = np.array([0.3, -0.2])
    conf = disc_kr.psi_eval(x)
    assert conf.psi == pytest.approx(disc_green.robin(x).value, abs=1e-14)
    assert conf.grad == pytest.approx(disc_green.robin(x).grad, abs=1e-14)


def test_psi_pair_gradient_matches_differences(disc_kr: KirchhoffRouth) -> None:
    points = np.array([[0.3, 0.1], [-0.2, -0.25]])
    conf = disc_kr.psi_eval(points)
    h = 1e-6
    numeric = np.zeros(4)
    for q in range(4):
        shift = np.zeros(4)
        shift[q] = h
        up = disc_kr.psi_eval((points.ravel() + shift).reshape(2, 2)).psi
        down = disc_kr.psi_eval((points.ravel() - shift).reshape(2, 2)).psi
        numeric[q] = (up - down) / (2.0 * h)
    assert conf.grad == pytest.approx(numeric, abs=1e-7)
    assert np.allclose(conf.hess, conf.hess.T)


def test_disc_single_spike(disc_kr: KirchhoffRouth) -> None:
    crit = disc_kr.find_critical(1, [np.array([[0.3, 0.2]])])
    assert np.max(np.abs(crit.points)) < 1e-8
    assert crit.hess == pytest.approx(np.eye(2) / np.pi, abs=1e-10)
    assert crit.morse == 0 and crit.nondegenerate
    assert disc_kr.theta_spectrum(crit) == pytest.approx([1.0 / np.pi] * 2, abs=1e-10)
    assert disc_kr.degree_sign(crit) == -1


def test_two_lobe_pair(lobe_critical: SpikeConfiguration, lobe_kr: KirchhoffRouth) -> None:
    points = lobe_critical.points
    assert lobe_critical.grad_norm < 1e-9
    assert lobe_critical.nondegenerate
    # по точке в каждом лепестке, симметрично относительно центра
    assert points[0, 0] < 0.0 < points[1, 0]
    assert points[0] == pytest.approx(-points[1], abs=1e-6)
    assert lobe_kr.degree_sign(lobe_critical) == (-1) ** (2 + lobe_critical.morse)


def test_seeding(lobe_kr: KirchhoffRouth, cfg: DictConfig) -> None:
    candidates = lobe_candidates(lobe_kr.domain, 0.0, 4)
    assert candidates.shape == (12, 2)
    assert lobe_kr.domain.contains(candidates).all()

    seeds = grid_seeds(lobe_kr, 2, cfg)
    assert 0 < len(seeds) <= cfg.kirchhoff.n_seeds
    for seed in seeds:
        assert np.array_equal(canonical_order(seed), np.arange(2))


def test_errors(disc_kr: KirchhoffRouth) -> None:
    with pytest.raises(PointsTooClose):
        disc_kr.psi_eval(np.array([[0.1, 0.1], [0.1, 0.1 + 1e-5]]))
    with pytest.raises(PointOutsideDomain):
        disc_kr.psi_eval(np.array([[1.5, 0.0]]))
    with pytest.raises(NoConvergence):
        disc_kr.find_critical(2, [np.array([[0.3, 0.2]])])
