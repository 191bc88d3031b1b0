import numpy as np
import pytest
from omegaconf import DictConfig

from src.construct import (
    SQRT_E,
    ParameterSolver,
    SpikeAssembler,
    limit_mu_bar,
    predict,
    reduced_map,
)
from src.core.exceptions import DegenerateCriticalPoint, InvalidExponent, MeshTooCoarse
from src.core.schemas import ProfileTable, SpikeConfiguration
from src.domain import GreenFunction
from src.kirchhoff import KirchhoffRouth
from src.pde import MeshBuilder
from src.profiles import ProfileEvaluator


@pytest.fixture(scope="module")
def disc_critical(disc_green: GreenFunction, cfg: DictConfig) -> SpikeConfiguration:
    return KirchhoffRouth(disc_green, cfg).find_critical(1, [np.array([[0.2, -0.1]])])


@pytest.fixture(scope="module")
def solver(disc_green: GreenFunction, cfg: DictConfig) -> ParameterSolver:
    return ParameterSolver(disc_green, cfg)


@pytest.fixture(scope="module")
def assembler(disc_green: GreenFunction, profile_table: ProfileTable, cfg: DictConfig) -> SpikeAssembler:
    return SpikeAssembler(disc_green, ProfileEvaluator(profile_table), cfg)


def test_single_spike_parameters(
    solver: ParameterSolver, profile_table: ProfileTable, disc_critical: SpikeConfiguration
) -> None:
    xi = disc_critical.points
    limit = limit_mu_bar(disc_critical.psi_parts, profile_table.c0)
    gaps = []
    for p in (20.0, 40.0, 80.0):
        params = solver.solve_F(profile_table, xi, p)
        assert params.f_residual < 1e-12
        closed = solver.closed_form_single(profile_table, xi[0], p)
        assert params.mu_bar[0] == pytest.approx(closed, rel=1e-10)
        assert params.eps_bar[0] == pytest.approx(params.mu_bar[0] * np.exp(-p / 4.0), rel=1e-12)
        gaps.append(abs(params.mu_bar[0] - limit[0]))
    # μ̄ → μ̄∞ со скоростью O(1/p)
    assert gaps[2] < gaps[0]


def test_pair_parameters(
    lobe_green: GreenFunction, profile_table: ProfileTable, cfg: DictConfig
) -> None:
    xi = np.array([[-0.9, 0.0], [0.9, 0.0]])
    params = ParameterSolver(lobe_green, cfg).solve_F(profile_table, xi, 40.0)
    assert params.f_residual < 1e-12
    # симметричная пара: одинаковые масштабы
    assert params.mu_bar[0] == pytest.approx(params.mu_bar[1], rel=1e-8)


def test_predictions(disc_critical: SpikeConfiguration) -> None:
    pred = predict(disc_critical, 20.0)
    eps_p = np.exp(-5.0 - 1.5 * np.log(2.0) - 0.75)
    assert pred.eps_p == pytest.approx(eps_p, rel=1e-12)
    assert pred.eps_ratio == pytest.approx([1.0])
    assert pred.peak_pred == pytest.approx(SQRT_E)
    assert pred.energy_pred == pytest.approx(8.0 * np.pi * np.e)
    assert pred.lambda_top == pytest.approx(1.3)
    assert pred.lambda_low == pytest.approx(0.05)
    assert pred.morse_pred == 1
    assert pred.degree_pred == -1
    assert all(lam > 1.0 for lam in pred.lambda_mid)

    with pytest.raises(InvalidExponent):
        predict(disc_critical, 0.5)


def test_reduced_map(disc_critical: SpikeConfiguration) -> None:
    values, jac, sign = reduced_map(disc_critical, 20.0)
    assert np.max(np.abs(values)) < 1e-8
    assert jac.shape == (3, 3)
    assert sign == predict(disc_critical, 20.0).degree_pred

    shifted, _, _ = reduced_map(disc_critical, 20.0, alpha=np.array([1.001]))
    assert shifted[0] < 0.0


def test_degenerate_point_rejected(disc_critical: SpikeConfiguration) -> None:
    flat = disc_critical.model_copy(update={"nondegenerate": False})
    with pytest.raises(DegenerateCriticalPoint):
        predict(flat, 20.0)


def test_projection_checks(
    solver: ParameterSolver,
    assembler: SpikeAssembler,
    profile_table: ProfileTable,
    disc_critical: SpikeConfiguration,
) -> None:
    params = solver.solve_F(profile_table, disc_critical.points, 20.0)
    assert assembler.pu_expansion_check(params, 0).passed
    far = assembler.far_field_check(params, 0)
    assert far.computed < 1e-2


def test_assemble(
    solver: ParameterSolver,
    assembler: SpikeAssembler,
    profile_table: ProfileTable,
    disc_critical: SpikeConfiguration,
    disc_green: GreenFunction,
    cfg: DictConfig,
) -> None:
    params = solver.solve_F(profile_table, disc_critical.points, 20.0)
    builder = MeshBuilder(cfg)
    mesh = builder.build(disc_green.domain, params.xi, params.eps_bar)
    approx = assembler.assemble(params, mesh.nodes, mesh.boundary)
    assert approx.components.shape == (1, mesh.n_nodes)
    assert np.all(approx.field[mesh.boundary] == 0.0)
    peak = approx.field[np.argmin(np.linalg.norm(mesh.nodes - params.xi[0], axis=-1))]
    assert peak == pytest.approx(SQRT_E, rel=0.2)

    coarse = builder.build(disc_green.domain)
    with pytest.raises(MeshTooCoarse):
        assembler.assemble(params, coarse.nodes, coarse.boundary)
