import logging
from pathlib import Path

from src.utils.logger import LOGGER_PREFIX, RUN_LOG_NAME, LoggerSetup, get_logger


def run_handlers(path: Path) -> list[logging.FileHandler]:
    return [
        h
        for h in logging.getLogger(LOGGER_PREFIX).handlers
        if isinstance(h, logging.FileHandler) and Path(h.baseFilename) == path
    ]


def test_run_log(tmp_path: Path) -> None:
    LoggerSetup.setup("configs/logging.yaml")
    path = LoggerSetup.attach_run_log(tmp_path / "sweep")
    assert path.name == RUN_LOG_NAME
    # повторное подключение того же каталога
    assert LoggerSetup.attach_run_log(tmp_path / "sweep") == path
    (handler,) = run_handlers(path)

    logger = get_logger("LaneEmdenSolver")
    assert logger.name == "SpikeCore.LaneEmdenSolver"
    logger.debug("Newton p=40 step 3")
    handler.flush()
    assert "SpikeCore.LaneEmdenSolver | Newton p=40 step 3" in path.read_text(encoding="utf-8")

    logging.getLogger(LOGGER_PREFIX).removeHandler(handler)
    handler.close()


def test_env_level(monkeypatch) -> None:
    LoggerSetup.setup("configs/logging.yaml")
    root = logging.getLogger(LOGGER_PREFIX)
    before = root.level
    console = [h for h in root.handlers if h.get_name() == "spike_console"]
    assert console
    monkeypatch.setenv("SPIKE_LOG_LEVEL", "warning")
    LoggerSetup._apply_env_level()
    assert root.level == logging.WARNING
    assert not get_logger("cli").isEnabledFor(logging.INFO)
    assert console[0].level == logging.WARNING
    root.setLevel(before)
    console[0].setLevel(logging.INFO)
