import os
import yaml
import logging
import logging.config
from pathlib import Path

LOGGER_PREFIX = "SpikeCore"
RUN_LOG_NAME = "spikecore.log"
LEVEL_ENV = "SPIKE_LOG_LEVEL"
_SWEEP_FALLBACK = "%(asctime)s %(levelname)-7s %(name)s | %(message)s"


class LoggerSetup:
    """
    Логгеры SpikeCore: консоль из YAML и файл прогона в каталоге отчета.
    """

    _configured_from: str | None = None
    _formatters: dict = {}

    @staticmethod
    def setup(config_path: str = "configs/logging.yaml", default_level=logging.INFO):
        """
        Загружает конфиг логгера. Если файла нет, использует базовую настройку.
        Повторный вызов с тем же путем ничего не делает (сервисов несколько).
        Уровень SpikeCore можно переопределить через SPIKE_LOG_LEVEL.
        """
        if LoggerSetup._configured_from == config_path:
            return
        if os.path.exists(config_path):
            with open(config_path, "rt") as f:
                try:
                    config = yaml.safe_load(f.read())
                    logging.config.dictConfig(config)
                    LoggerSetup._configured_from = config_path
                    LoggerSetup._formatters = config.get("formatters", {})
                    LoggerSetup._apply_env_level()
                    get_logger("logger").debug(f"Logging configured via {config_path}")
                    return
                except Exception as e:
                    print(
                        "Error in SpikeCore logging configuration. "
                        f"Using basic config. Error: {e}"
                    )
        else:
            print(
                f"Logging config file not found at {config_path}. Using basic config."
            )

        logging.basicConfig(level=default_level)
        LoggerSetup._apply_env_level()

    @staticmethod
    def _apply_env_level():
        level = os.getenv(LEVEL_ENV)
        if not level:
            return
        logger = logging.getLogger(LOGGER_PREFIX)
        logger.setLevel(level.upper())
        for handler in logger.handlers:
            if handler.get_name() == "spike_console":
                handler.setLevel(level.upper())

    @staticmethod
    def attach_run_log(out_dir: Path, level=logging.DEBUG) -> Path:
        """
        Дублирует записи SpikeCore в <out_dir>/spikecore.log форматом sweep.
        Один файл на каталог: повторное подключение не создает второй обработчик.
        """
        path = (Path(out_dir) / RUN_LOG_NAME).resolve()
        path.parent.mkdir(parents=True, exist_ok=True)
        logger = logging.getLogger(LOGGER_PREFIX)
        for handler in logger.handlers:
            if isinstance(handler, logging.FileHandler) and Path(handler.baseFilename) == path:
                return path

        sweep = LoggerSetup._formatters.get("sweep", {})
        handler = logging.FileHandler(path, encoding="utf-8")
        handler.set_name(f"spike_run_file:{path.parent.name}")
        handler.setLevel(level)
        handler.setFormatter(logging.Formatter(sweep.get("format", _SWEEP_FALLBACK), sweep.get("datefmt")))
        logger.addHandler(handler)
        if logger.getEffectiveLevel() > level:
            # консольный обработчик сам отсекает DEBUG
            logger.setLevel(level)
        return path


def get_logger(name: str) -> logging.Logger:
    """
    from src.utils.logger import get_logger
    logger = get_logger(self.__class__.__name__)
    """
    return logging.getLogger(f"{LOGGER_PREFIX}.{name}")
