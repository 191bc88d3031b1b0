from pathlib import Path

import numpy as np
import pytest

from src.construct import predict
from src.core.schemas import CheckRow, IdentityResidual, StageResult
from src.pde import LocalIdentities
from src.pipeline import (
    ConstructionService,
    RunState,
    VerificationService,
    identity_orders,
    order_rows,
    richardson_limit,
    top_coefficient_fit,
)
from src.toolkit import load_run_config

P_LOBE = 40.0


def make_state(construction: ConstructionService, path: Path, **overrides) -> RunState:
    run = load_run_config(path, overrides)
    return RunState(
        run,
        construction.config,
        construction.load_profiles,
        construction.mesh_builder,
        base_dir=path.parent,
    )


def by_name(stage: StageResult) -> dict[str, CheckRow]:
    return {row.name: row for row in stage.rows}


@pytest.fixture(scope="module")
def verification(config_path: str) -> VerificationService:
    return VerificationService(config_path)


@pytest.fixture(scope="module")
def sweep(construction: ConstructionService) -> RunState:
    return make_state(construction, Path("tests/data/runs/disc_k1.yaml"), p_values=[10, 20])


@pytest.fixture(scope="module")
def lobe_state(construction: ConstructionService) -> RunState:
    return make_state(construction, Path("tests/data/runs/two_lobe_k2.yaml"))


# -------------------------------------------------------------- helpers


def test_richardson_limit() -> None:
    p = [10.0, 20.0, 40.0]
    values = [5.0 + 3.0 / q for q in p]
    assert richardson_limit(p, values) == pytest.approx(5.0, abs=1e-12)


def test_top_coefficient_fit() -> None:
    p = [10.0, 20.0, 40.0, 80.0]
    c, stderr = top_coefficient_fit(p, [1.0 + 6.0 / q for q in p])
    assert c == pytest.approx(6.0, abs=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-10)

    # одна точка: коэффициент есть, ошибки нет
    c, stderr = top_coefficient_fit([20.0], [1.0 + 3.0 / 20.0])
    assert c == pytest.approx(3.0)
    assert np.isnan(stderr)


def residual(identity: str, value: float, l: int = 0) -> IdentityResidual:
    return IdentityResidual(
        identity=identity, spike=0, eigen_index=l, radius=0.1, lhs=1.0, rhs=1.0, relative_residual=value
    )


def test_identity_orders() -> None:
    # pohozaev: r ~ h², green: r ~ h
    residuals = {
        res: [
            residual("pohozaev_dilation", 0.4 / res**2),
            residual("pohozaev_translation_x1", 0.2 / res**2, l=1),
            residual("green_second_identity", 0.1 / res),
        ]
        for res in (1.0, 2.0, 4.0)
    }
    orders = identity_orders(residuals)
    assert len(orders) == 9
    fine = orders.dropna(subset=["order"])
    assert len(fine) == 6
    by_identity = fine.groupby("identity")["order"].median()
    assert by_identity["pohozaev_dilation"] == pytest.approx(2.0)
    assert by_identity["green_second_identity"] == pytest.approx(1.0)

    rows = {row.name: row for row in order_rows(orders, 1.5)}
    assert rows["order[pohozaev_dilation]"].passed and rows["order[pohozaev_dilation]"].gating
    assert rows["order[pohozaev_translation_x1]"].passed
    green = rows["order[green_second_identity]"]
    assert not green.passed and green.gating

    # порядок 1 для тождества Похожаева не проходит и гейтит
    slow = identity_orders({res: [residual("pohozaev_dilation", 0.4 / res)] for res in (1.0, 2.0)})
    (row,) = order_rows(slow, 1.5)
    assert row.gating and not row.passed

    assert identity_orders({}).empty
    assert order_rows(identity_orders({}), 1.5) == []


# -------------------------------------------------------------- disc sweep


def test_disc_sweep_solve(verification: VerificationService, sweep: RunState) -> None:
    stage = verification.solve_stage(sweep)
    assert stage.status == "done"
    rows = by_name(stage)
    for p in (10, 20):
        assert rows[f"newton_residual[p={p}]"].passed
        # ниже порога p строка только диагностическая
        assert not rows[f"u_minus_W[p={p}]"].gating
    assert rows["peak_trend"].gating and rows["peak_trend"].passed
    assert rows["u_minus_W_trend"].gating

    energy = rows["energy_extrapolated"]
    assert energy.gating
    assert energy.computed == pytest.approx(8.0 * np.pi * np.e, rel=0.1)
    assert stage.data["10"]["energy"] != stage.data["20"]["energy"]


def test_disc_sweep_spectrum(verification: VerificationService, sweep: RunState) -> None:
    stage = verification.spectrum_stage(sweep)
    assert stage.status == "done"
    rows = by_name(stage)
    for p in (10, 20):
        assert rows[f"count_below[p={p}]"].passed
        assert rows[f"mid_cluster_count[p={p}]"].passed
        assert rows[f"morse_index[p={p}]"].passed
        assert not rows[f"top_eigenvalue[p={p}]"].gating
    assert not rows["mid_sign[p=10]"].gating

    top = rows["top_coefficient"]
    assert top.gating
    fit = stage.data["top_coefficient"]
    assert fit["p"] == [10.0, 20.0]
    assert top.passed == (4.0 < fit["c"] < 8.0)
    assert 0.0 < fit["c"] < 20.0


def test_kernel_span_gates(verification: VerificationService, sweep: RunState) -> None:
    stage = verification.identities_stage(sweep)
    rows = by_name(stage)
    assert rows["kernel_span[p=10]"].gating
    assert all(not row.gating for name, row in rows.items() if name.startswith("pohozaev"))


def test_disc_centres_stay_put(sweep: RunState) -> None:
    centred = sweep.centred(20.0)
    assert np.linalg.norm(centred.params.xi) < 0.05
    assert np.array_equal(centred.mesh.spike_centers, centred.params.xi)
    assert centred.history == sorted(centred.history, reverse=True)


# -------------------------------------------------------------- two lobes


def test_two_lobe_solution(lobe_state: RunState) -> None:
    sol = lobe_state.solution(P_LOBE)
    solver = lobe_state.solver(P_LOBE)
    assert sol.residual_norm < 1e-10
    solver.check_positive(sol.u, P_LOBE)

    # по пику в каждом лепестке, рядом с центрами розеток
    peaks = sol.peak_points
    assert peaks[0, 0] < 0.0 < peaks[1, 0]
    centres = lobe_state.centred(P_LOBE).params.xi
    assert np.max(np.linalg.norm(peaks - centres, axis=-1)) < 0.05

    history = lobe_state.centred(P_LOBE).history
    assert history == sorted(history, reverse=True)
    assert np.array_equal(lobe_state.mesh(P_LOBE).spike_centers, centres)


def test_two_lobe_morse(lobe_state: RunState) -> None:
    crit = lobe_state.crit()
    spec = lobe_state.spectrum(P_LOBE)
    pred = predict(crit, P_LOBE)
    assert pred.morse_pred == 2 + crit.morse
    assert spec.morse == pred.morse_pred
    assert int(np.sum(spec.eigenvalues < 0.9)) == 2


def test_two_lobe_uniqueness(verification: VerificationService, lobe_state: RunState) -> None:
    stage = verification.uniqueness_stage(lobe_state)
    assert stage.status == "done"
    assert stage.data["p"] == P_LOBE
    assert stage.data["converged"] == 20
    assert stage.data["spread"] <= 1e-6
    assert stage.passed


def test_identity_refinement(construction: ConstructionService) -> None:
    residuals = {}
    for resolution in (1.0, 2.0):
        state = make_state(construction, Path("tests/data/runs/disc_k1.yaml"), resolution=resolution)
        local = LocalIdentities(state.domain, state.solver(10.0).space, state.cfg)
        residuals[resolution] = local.pohozaev_check(state.solution(10.0), state.spectrum(10.0), 0, 0)
    orders = identity_orders(residuals).dropna(subset=["order"]).set_index("identity")["order"]
    # невязки убывают при сгущении
    assert orders["green_second_identity"] > 0.0
    assert orders["pohozaev_dilation"] > 0.0
