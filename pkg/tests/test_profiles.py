import numpy as np
import pytest
from omegaconf import DictConfig, OmegaConf

from src.core.schemas import ProfileTable
from src.pipeline import ConstructionService
from src.profiles import (
    B0_EXACT,
    C0_EXACT,
    ProfileEvaluator,
    ProfileSolver,
    eval_U,
    exp_U,
    kernel_residuals,
    reference_moments,
)
from src.profiles.series import eval_series, launch_series


def test_liouville_profile() -> None:
    r = np.array([0.0, 1.0, 8.0])
    assert eval_U(r) == pytest.approx(-2.0 * np.log1p(r**2 / 8.0))
    assert exp_U(r) == pytest.approx(np.exp(eval_U(r)))
    res_z0, res_grad = kernel_residuals(np.geomspace(0.05, 100.0, 200))
    assert np.max(np.abs(res_z0)) < 1e-10
    assert np.max(np.abs(res_grad)) < 1e-10


def test_launch_series_regular() -> None:
    coef = launch_series(4)
    # w0(0) = 0 и f0(0) = 0: ряд начинается с t²
    assert coef[0] == 0.0 and coef[1] == 0.0
    value, deriv = eval_series(coef, np.array([0.0]))
    assert value[0] == 0.0 and deriv[0] == 0.0


def test_far_field_constants(profile_table: ProfileTable) -> None:
    assert profile_table.c0 == pytest.approx(C0_EXACT, rel=1e-6)
    assert profile_table.b0 == pytest.approx(B0_EXACT, rel=1e-6)
    assert profile_table.c0_moment == pytest.approx(profile_table.c0, rel=1e-6)
    assert profile_table.c1_moment == pytest.approx(profile_table.c1, rel=1e-6)


def test_far_field_tail_insensitive(cfg: DictConfig, profile_table: ProfileTable) -> None:
    r_max = 0.5 * float(cfg.profiles.r_max)
    short = OmegaConf.merge(OmegaConf.to_container(cfg), {"profiles": {"r_max": r_max}})
    table = ProfileSolver(short).build_table()
    assert abs(table.c0 - profile_table.c0) < 1e-5
    assert abs(table.c1 - profile_table.c1) < 1e-5


def test_moments(profile_table: ProfileTable) -> None:
    reference = reference_moments(
        profile_table.c0, profile_table.c1, profile_table.b0, profile_table.b1
    )
    moments = profile_table.moments.model_dump()
    for name in ("mass", "log_mass", "pi_twelfth", "eight_pi_third", "log_f0", "log_f1"):
        assert moments[name] == pytest.approx(reference[name], rel=1e-7), name


def test_evaluator_pieces_join(profile_table: ProfileTable) -> None:
    evaluator = ProfileEvaluator(profile_table)
    for which in ("w0", "w1"):
        for edge in (profile_table.r_launch, profile_table.r_max):
            inner, outer = evaluator.value(which, np.array([edge * (1 - 1e-9), edge * (1 + 1e-9)]))
            assert abs(inner - outer) < 1e-7 * max(1.0, abs(inner))

    r = 10.0 * profile_table.r_max
    c, b = profile_table.c0, profile_table.b0
    assert evaluator.w0(np.array([r]))[0] == pytest.approx(c * np.log(r) + b, rel=1e-6)


def test_profile_cache(construction: ConstructionService, profile_table: ProfileTable) -> None:
    pc = construction.config.profiles
    key = construction.cache.key(pc.r_max, pc.grid_size, pc.taylor_terms, pc.rtol)
    cached = construction.cache.load(key)
    assert cached is not None
    assert cached.c0 == profile_table.c0
    assert np.array_equal(cached.w0_vals, profile_table.w0_vals)


def test_profiles_stage(construction: ConstructionService) -> None:
    stage = construction.profiles_stage()
    assert stage.status == "done"
    rows = {row.name: row for row in stage.rows}
    for name in ("moment[mass]", "moment[log_mass]", "moment[pi_twelfth]", "C0[exact]", "B0[exact]"):
        assert rows[name].passed, name
