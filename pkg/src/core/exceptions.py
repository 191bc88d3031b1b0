"""Иерархия ошибок тулкита. Все стадии ловят SpikeCoreError и пишут статус в отчет."""


class SpikeCoreError(Exception):
    """Базовая ошибка."""


class ConfigError(SpikeCoreError):
    pass


class InvalidDomain(SpikeCoreError):
    pass


# domain
class CoincidentPoints(SpikeCoreError):
    pass


class PointOutsideDomain(SpikeCoreError):
    pass


class SolverDiverged(SpikeCoreError):
    pass


# profiles
class ODEIntegrationFailed(SpikeCoreError):
    pass


class SlopeNotConverged(SpikeCoreError):
    pass


class QuadratureNotConverged(SpikeCoreError):
    pass


# kirchhoff
class PointsTooClose(SpikeCoreError):
    pass


class NoConvergence(SpikeCoreError):
    pass


class DegenerateCriticalPoint(SpikeCoreError):
    """Гессиан почти вырожден. Результат можно достать из `configuration`."""

    def __init__(self, message: str, configuration=None):
        super().__init__(message)
        self.configuration = configuration


# construct
class InvalidExponent(SpikeCoreError):
    pass


class MeshTooCoarse(SpikeCoreError):
    pass


# pde
class NewtonDiverged(SpikeCoreError):
    pass


class NegativeSolution(SpikeCoreError):
    pass


class EigenSolverFailed(SpikeCoreError):
    pass


class WeightDegenerate(SpikeCoreError):
    pass


class BallOutsideDomain(SpikeCoreError):
    pass
