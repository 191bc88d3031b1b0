from pathlib import Path

import numpy as np
import pytest

from src.core.exceptions import BallOutsideDomain
from src.core.schemas import DiscreteSolution, SpectrumReport
from src.pde import LocalIdentities, eigenvalue_table, load_snapshot, save_snapshot
from src.pipeline import ConstructionService, RunState
from src.toolkit import load_run_config

P = 10.0


@pytest.fixture(scope="module")
def state(construction: ConstructionService) -> RunState:
    path = Path("tests/data/runs/disc_k1.yaml")
    run = load_run_config(path)
    return RunState(
        run,
        construction.config,
        construction.load_profiles,
        construction.mesh_builder,
        base_dir=path.parent,
    )


@pytest.fixture(scope="module")
def solution(state: RunState) -> DiscreteSolution:
    return state.solution(P)


@pytest.fixture(scope="module")
def spectrum(state: RunState) -> SpectrumReport:
    return state.spectrum(P)


def test_newton_solution(state: RunState, solution: DiscreteSolution) -> None:
    solver = state.solver(P)
    assert solution.residual_norm < 1e-10
    assert solver.dual_norm(solver.residual(solution.u, P)) < 1e-10
    solver.check_positive(solution.u, P)
    assert np.all(solution.u[state.mesh(P).boundary] == 0.0)

    # один пик в центре круга
    assert np.linalg.norm(solution.peak_points[0]) < 0.05
    # при p = 10 поправки O(1/p) еще велики
    assert 1.4 < solution.peak_values[0] < 2.5
    assert solution.energy == pytest.approx(8.0 * np.pi * np.e, rel=0.5)
    assert solution.eps_measured[0] == pytest.approx(state.params(P).eps_bar[0], rel=0.5)


def test_spectrum(spectrum: SpectrumReport) -> None:
    lam = spectrum.eigenvalues
    assert lam.size == 5
    assert np.all(np.diff(lam) >= 0.0)
    assert spectrum.morse == 1
    assert 0.5 < lam[0] * P < 1.5
    assert lam[3] > 1.05
    assert spectrum.orthogonality < 1e-8


def test_local_identities(state: RunState, solution: DiscreteSolution, spectrum: SpectrumReport) -> None:
    local = LocalIdentities(state.domain, state.solver(P).space, state.cfg)
    records = local.pohozaev_check(solution, spectrum, 0, 0)
    names = [r.identity for r in records]
    assert names == [
        "green_second_identity",
        "pohozaev_dilation",
        "pohozaev_translation_x1",
        "pohozaev_translation_x2",
    ]
    assert all(np.isfinite(r.relative_residual) for r in records)
    assert records[0].relative_residual < 0.1

    with pytest.raises(BallOutsideDomain):
        local.pohozaev_check(solution, spectrum, 0, 0, d=2.0)

    # v_2, v_3 живут в span{∂_1U, ∂_2U, Z0} масштабированного профиля
    assert local.span_fraction(solution, spectrum.eigenvectors[:, 1]) > 0.8

    sups = local.limit_profile_check(solution, state.evaluator(), 0)
    assert set(sups) == {"sup_w_minus_U", "sup_first_order", "sup_second_order"}
    assert all(np.isfinite(v) for v in sups.values())
    assert sups["sup_w_minus_U"] < 2.0


def test_exports(tmp_path: Path, state: RunState, solution: DiscreteSolution, spectrum: SpectrumReport) -> None:
    path = save_snapshot(tmp_path / "u.npz", state.mesh(P), solution, {"run": "disc"})
    data = load_snapshot(path)
    assert np.array_equal(data["u"], solution.u)
    assert data["meta"]["p"] == P and data["meta"]["run"] == "disc"

    table = eigenvalue_table({P: spectrum})
    assert list(table.columns) == ["p", "index", "lambda", "p_times_lambda_minus_1"]
    assert len(table) == spectrum.eigenvalues.size
