import json
from pathlib import Path

import pytest

from src.cli import EXIT_OK, EXIT_SETUP, main
from src.core.exceptions import ConfigError, InvalidExponent
from src.toolkit import load_run_config

DISC_RUN = "tests/data/runs/disc_k1.yaml"


def read_report(path: Path) -> dict:
    return json.loads(path.read_text())


def test_load_run_config() -> None:
    run = load_run_config(DISC_RUN, {"p_values": [12.0], "resolution": None})
    assert run.p_values == [12.0]
    assert run.resolution == 1.0
    assert run.domain_path(Path(DISC_RUN).parent).exists()

    with pytest.raises(InvalidExponent):
        load_run_config(DISC_RUN, {"p_values": [0.5]})
    with pytest.raises(ConfigError):
        load_run_config(DISC_RUN, {"k": 0})
    with pytest.raises(ConfigError):
        load_run_config("tests/data/runs/missing.yaml")


def test_invalid_exponent_exit(tmp_path: Path, config_path: str) -> None:
    code = main(
        [
            "verify",
            "--config",
            "tests/data/runs/bad_exponent.yaml",
            "--service-config",
            config_path,
            "--out",
            str(tmp_path),
        ]
    )
    assert code == EXIT_SETUP
    report = read_report(tmp_path / "report_verify.json")
    assert report["stages"][0]["status"] == "error"
    assert "InvalidExponent" in report["stages"][0]["description_error"]


def test_critpoints(tmp_path: Path, config_path: str) -> None:
    args = ["critpoints", "--config", DISC_RUN, "--service-config", config_path, "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    report = read_report(tmp_path / "report_critpoints.json")
    stage = report["stages"][0]
    assert stage["name"] == "critical" and stage["status"] == "done"
    assert stage["data"]["degree_sign"] == -1
    assert max(abs(v) for v in stage["data"]["points"][0]) < 1e-8

    # повторный запуск дает тот же отчет
    first = (tmp_path / "report_critpoints.json").read_text()
    assert main(args) == EXIT_OK
    assert (tmp_path / "report_critpoints.json").read_text() == first


def test_construct_command(tmp_path: Path, config_path: str) -> None:
    args = [
        "construct",
        "--config",
        DISC_RUN,
        "--service-config",
        config_path,
        "--out",
        str(tmp_path),
        "--p",
        "20",
        "40",
    ]
    assert main(args) == EXIT_OK
    report = read_report(tmp_path / "report_construct.json")
    assert [s["name"] for s in report["stages"]] == ["critical", "construct", "reduced_map"]
    rows = {row["name"]: row for stage in report["stages"] for row in stage["rows"]}
    assert rows["F_residual[p=20]"]["passed"]
    assert rows["reduced_map_degree[p=40]"]["computed"] == -1
