import numpy as np
import pytest
from omegaconf import DictConfig

from src.core.exceptions import BallOutsideDomain
from src.domain import GreenFunction
from src.pde import GreenQuadraticForms
from src.pde.identities import circle


@pytest.fixture(scope="module")
def disc_forms(disc_green: GreenFunction, cfg: DictConfig) -> GreenQuadraticForms:
    return GreenQuadraticForms(disc_green, cfg)


def test_circle_quadrature() -> None:
    pts, nu, ds = circle(np.array([0.2, 0.1]), 0.5, 64)
    assert ds * 64 == pytest.approx(np.pi)
    assert np.linalg.norm(pts - np.array([0.2, 0.1]), axis=-1) == pytest.approx(np.full(64, 0.5))
    assert np.linalg.norm(nu, axis=-1) == pytest.approx(np.ones(64))


def test_single_point_forms(disc_forms: GreenQuadraticForms) -> None:
    rows = disc_forms.check(np.array([[0.3, 0.2]]), 0.1)
    by_name = {row.name: row for row in rows}
    assert by_name["P0(G0,G0)"].computed == pytest.approx(-1.0 / (2.0 * np.pi), abs=1e-5)
    assert all(row.passed for row in rows if row.gating)


def test_pair_forms(lobe_green: GreenFunction, cfg: DictConfig) -> None:
    forms = GreenQuadraticForms(lobe_green, cfg)
    rows = forms.check(np.array([[-0.9, 0.05], [0.8, -0.1]]), 0.15)
    failed = [row.name for row in rows if row.gating and not row.passed]
    assert not failed
    # строки с производными второго порядка только диагностические
    assert any(not row.gating for row in rows)


def test_ball_must_fit(disc_forms: GreenQuadraticForms) -> None:
    with pytest.raises(BallOutsideDomain):
        disc_forms.check(np.array([[0.8, 0.0]]), 0.15)
    with pytest.raises(BallOutsideDomain):
        disc_forms.check(np.array([[0.1, 0.0], [-0.1, 0.0]]), 0.15)
