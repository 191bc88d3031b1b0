from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from omegaconf import OmegaConf
from pydantic import ValidationError

from src.construct import check_exponent
from src.core.exceptions import ConfigError, InvalidDomain
from src.core.schemas import Report, RunConfig, StageResult
from src.pipeline import ConstructionService, RunState, VerificationService
from src.utils.logger import get_logger
from src.utils.storage import digest

STAGE_ORDER = [
    "profiles",
    "green",
    "quadform",
    "critical",
    "construct",
    "reduced_map",
    "solve",
    "spectrum",
    "identities",
    "limit_profile",
    "uniqueness",
]

COMMAND_STAGES = {
    "critpoints": ["critical"],
    "construct": ["critical", "construct", "reduced_map"],
    "solve": ["critical", "construct", "solve"],
    "spectrum": ["critical", "solve", "spectrum"],
}


def load_run_config(path: str | Path, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """YAML → RunConfig. Ошибки разбора и валидации превращаются в ошибки тулкита."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Run config not found: {path}")
    try:
        with open(path, "rt") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from e
    data.update({key: value for key, value in (overrides or {}).items() if value is not None})
    for p in data.get("p_values", []):
        check_exponent(float(p))
    try:
        run = RunConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e
    if run.k < 1:
        raise ConfigError(f"k must be at least 1, got {run.k}")
    domain_path = run.domain_path(path.parent)
    if domain_path is not None and not domain_path.exists():
        raise InvalidDomain(f"Domain file not found: {domain_path}")
    return run


class SpikeToolkit:
    """Фасад: команды CLI → стадии сервисов → Report."""

    def __init__(self, service_cfg_path: str = "configs/toolkit_config.yaml"):
        self.logger = get_logger(self.__class__.__name__)

        self.construction = ConstructionService(service_cfg_path)
        self.verification = VerificationService(service_cfg_path)

    def profiles(self, force: bool = False) -> Report:
        "Таблица профилей и моменты."
        stage = self.construction.profiles_stage(force=force)
        return Report(command="profiles", config_digest=digest({}), run={}, stages=[stage])

    def run(
        self,
        command: str,
        run: RunConfig,
        base_dir: Optional[Path] = None,
        out_dir: Optional[Path] = None,
    ) -> Report:
        "Запуск подкоманды по конфигурации RunConfig."
        if command == "verify":
            names = [name for name in STAGE_ORDER if name in run.checks]
        elif command in COMMAND_STAGES:
            names = COMMAND_STAGES[command]
        else:
            raise ConfigError(f"Unknown command: {command}")

        state = RunState(
            run,
            self.construction.config,
            self.construction.load_profiles,
            self.construction.mesh_builder,
            base_dir=base_dir,
        )
        stages: List[StageResult] = [self._stage(name, state, out_dir) for name in names]
        report = Report(
            command=command,
            config_digest=digest(
                {"run": run.model_dump(), "service": OmegaConf.to_container(self.construction.config)}
            ),
            run=run.model_dump(),
            stages=stages,
        )
        self.logger.info(f"{command}: {'PASS' if report.passed else 'FAIL'}")
        return report

    def _stage(self, name: str, state: RunState, out_dir: Optional[Path]) -> StageResult:
        construction, verification = self.construction, self.verification
        if name == "profiles":
            return construction.profiles_stage()
        if name == "green":
            return construction.green_stage(state)
        if name == "quadform":
            return construction.quadform_stage(state)
        if name == "critical":
            return construction.critical_stage(state)
        if name == "construct":
            return construction.construct_stage(state)
        if name == "reduced_map":
            return construction.reduced_map_stage(state)
        if name == "solve":
            return verification.solve_stage(state, out_dir)
        if name == "spectrum":
            return verification.spectrum_stage(state, out_dir)
        if name == "identities":
            return verification.identities_stage(state)
        if name == "limit_profile":
            return verification.limit_profile_stage(state)
        return verification.uniqueness_stage(state)
