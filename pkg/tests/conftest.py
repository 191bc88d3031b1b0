import pytest
from omegaconf import DictConfig

from src.core.schemas import ProfileTable
from src.core.service import load_service_config
from src.domain import DomainModel, GreenFunction
from src.pipeline import ConstructionService


@pytest.fixture(scope="session")
def config_path() -> str:
    return "tests/data/test_toolkit_config.yaml"


@pytest.fixture(scope="session")
def cfg(config_path: str) -> DictConfig:
    return load_service_config(config_path)


@pytest.fixture(scope="session")
def disc(cfg: DictConfig) -> DomainModel:
    return DomainModel.from_file("tests/data/domains/disc.yaml", cfg)


@pytest.fixture(scope="session")
def two_lobe(cfg: DictConfig) -> DomainModel:
    return DomainModel.from_file("tests/data/domains/two_lobe.yaml", cfg)


@pytest.fixture(scope="session")
def disc_green(disc: DomainModel, cfg: DictConfig) -> GreenFunction:
    return GreenFunction(disc, cfg)


@pytest.fixture(scope="session")
def lobe_green(two_lobe: DomainModel, cfg: DictConfig) -> GreenFunction:
    return GreenFunction(two_lobe, cfg)


@pytest.fixture(scope="session")
def construction(config_path: str) -> ConstructionService:
    return ConstructionService(config_path)


@pytest.fixture(scope="session")
def profile_table(construction: ConstructionService) -> ProfileTable:
    return construction.load_profiles()
