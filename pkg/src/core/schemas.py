from pathlib import Path
from typing import List, Optional, Literal, Dict, Any, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = "1.0"

Point = Tuple[float, float]


class ArrayModel(BaseModel):
    """Базовая модель для объектов с numpy-массивами внутри."""

    model_config = ConfigDict(arbitrary_types_allowed=True)


# ---------------------------------------------------------------- domain


class RadiusCoeffs(BaseModel):
    """Коэффициенты Фурье радиальной функции r(θ) звездной области."""

    cos: List[float] = Field(
        default_factory=lambda: [1.0],
        description="a_0, a_1, ...: r(θ) = a_0 + Σ a_n cos(nθ) + Σ b_n sin(nθ).",
    )
    sin: List[float] = Field(
        default_factory=list, description="b_1, b_2, ... (без нулевого члена)."
    )


class DomainSpec(BaseModel):
    """Описание области из файла (структурированный текст)."""

    kind: Literal["disc", "star"]
    radius_coeffs: Optional[RadiusCoeffs] = None
    nodes: Optional[int] = Field(
        None, description="Число узлов Нистрема. Если не задано, берется из конфига."
    )
    center: Point = Field((0.0, 0.0), description="Центр звездности.")
    name: Optional[str] = None


class GreenEval(ArrayModel):
    """Значение G(x,y) и все производные, нужные Ψ_k и квадратичным формам."""

    value: float
    grad_x: np.ndarray = Field(..., description="∂G/∂x_i (первый аргумент).")
    grad_y: np.ndarray = Field(..., description="D_i G = ∂G/∂y_i (второй аргумент).")
    hess_xx: np.ndarray = Field(..., description="∂²G/∂x_i∂x_q.")
    hess_xy: np.ndarray = Field(..., description="[i, q] = ∂²G/∂x_i∂y_q.")
    h_value: float = Field(..., description="Регулярная часть H(x,y).")
    h_grad_x: np.ndarray
    h_hess_xx: np.ndarray = Field(..., description="∂²H/∂x_i∂x_q.")


class RobinEval(ArrayModel):
    value: float
    grad: np.ndarray
    hess: np.ndarray


# ---------------------------------------------------------------- profiles


class MomentRecord(BaseModel):
    """Интегралы по R² от профилей (радиальная квадратура)."""

    mass: float = Field(..., description="∫e^U, ожидается 8π.")
    log_mass: float = Field(..., description="(1/2π)∫log(1/|y|)e^U, ожидается −log 64.")
    mass_f0: float = Field(..., description="∫e^U f_0 = −2πC_0.")
    mass_f1: float = Field(..., description="∫e^U f_1 = −2πC_1.")
    log_f0: float = Field(..., description="∫log(1/|y|)e^U f_0 = −2πB_0.")
    log_f1: float = Field(..., description="∫log(1/|y|)e^U f_1 = −2πB_1.")
    pi_twelfth: float = Field(..., description="∫e^U y_q²/(8+|y|²)², ожидается π/12.")
    eight_pi_third: float = Field(
        ..., description="∫e^U ((8−|y|²)/(8+|y|²))², ожидается 8π/3."
    )


class ProfileTable(ArrayModel):
    """
    Радиальные профили U, w0, w1 и их асимптотические константы.

    Значения в произвольной точке r дает ProfileEvaluator (src.profiles).
    """

    radii: np.ndarray
    u_vals: np.ndarray
    w0_vals: np.ndarray
    w1_vals: np.ndarray
    w0_deriv: np.ndarray
    w1_deriv: np.ndarray
    c0: float
    c1: float
    b0: float
    b1: float
    c0_moment: Optional[float] = None
    c1_moment: Optional[float] = None
    r_launch: float
    r_max: float
    w0_series: np.ndarray = Field(..., description="Коэффициенты ряда по t = r².")
    w1_series: np.ndarray
    moments: Optional[MomentRecord] = None


# ---------------------------------------------------------------- kirchhoff


class SpikeConfiguration(ArrayModel):
    k: int
    points: np.ndarray = Field(..., description="Массив (k, 2).")
    psi: float
    psi_parts: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    hess_eigenvalues: Optional[np.ndarray] = None
    morse: Optional[int] = None
    morse0: Optional[int] = None
    theta: Optional[np.ndarray] = None
    nondegenerate: Optional[bool] = None

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.grad))

    def summary(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "points": self.points.tolist(),
            "psi": self.psi,
            "psi_parts": self.psi_parts.tolist(),
            "grad_norm": self.grad_norm,
            "hess": self.hess.tolist(),
            "theta": None if self.theta is None else self.theta.tolist(),
            "morse": self.morse,
            "morse0": self.morse0,
            "nondegenerate": self.nondegenerate,
        }


# ---------------------------------------------------------------- construct


class SpikeParameters(ArrayModel):
    p: float
    xi: np.ndarray
    mu_bar: np.ndarray
    alpha: np.ndarray
    f_residual: float = Field(..., description="‖F(μ̄, ξ)‖_∞ в найденной точке.")

    @property
    def k(self) -> int:
        return int(self.xi.shape[0])

    @property
    def log_eps_bar(self) -> np.ndarray:
        return np.log(self.mu_bar) - self.p / 4.0

    @property
    def eps_bar(self) -> np.ndarray:
        return np.exp(self.log_eps_bar)

    @property
    def log_amplitude(self) -> np.ndarray:
        """log(1/(p^{p/(p−1)} ε̄^{2/(p−1)})), считается в логарифмах."""
        p = self.p
        return -(p / (p - 1.0)) * np.log(p) - (2.0 / (p - 1.0)) * self.log_eps_bar

    @property
    def amplitude(self) -> np.ndarray:
        return np.exp(self.log_amplitude)


class ApproxSolution(ArrayModel):
    """Приближенное решение W_{α,p} = Σ α_j PW̄_{p,j} в узлах сетки."""

    params: SpikeParameters
    nodes: np.ndarray = Field(..., description="Узлы сетки (n, 2).")
    field: np.ndarray = Field(..., description="W_{α,p} в узлах.")
    components: np.ndarray = Field(..., description="PW̄_{p,j} в узлах, массив (k, n).")
    boundary_residual: float = Field(
        ..., description="max |PW̄_{p,j}| на граничных узлах до обнуления."
    )
    corrections: List[Any] = Field(
        default_factory=list,
        exclude=True,
        description="Гармонические поправки h_j = W̄_j на границе (HarmonicFunction).",
    )


class PredictionSet(BaseModel):
    p: float
    k: int
    eps_pred: List[float]
    eps_ratio: List[float]
    eps_p: float
    peak_pred: float
    energy_pred: float
    lambda_low: float
    lambda_mid: List[float]
    lambda_top: float
    morse_pred: int
    degree_pred: int


class IdentityResidual(BaseModel):
    identity: str
    spike: int
    eigen_index: Optional[int] = None
    radius: float
    lhs: float
    rhs: float
    relative_residual: float


class DiscreteSolution(ArrayModel):
    """Решение дискретной задачи −Δu = u^p (P1), пики и интегральные величины."""

    u: np.ndarray
    p: float
    residual_norm: float = Field(..., description="sqrt(FᵀK⁻¹F) на последней итерации.")
    iterations: int
    peak_points: np.ndarray = Field(..., description="x_{p,j}, массив (k, 2).")
    peak_values: np.ndarray
    eps_measured: np.ndarray = Field(..., description="(p·u(x_{p,j})^{p−1})^{−1/2}.")
    energy: float = Field(..., description="p∫|∇u|².")
    p_path: List[float] = Field(default_factory=list, description="Шаги продолжения по p.")


class SpectrumReport(ArrayModel):
    """Собственные пары −Δv = λ p u^{p−1} v (по возрастанию λ)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = Field(..., description="Узловые значения, массив (n, m).")
    morse: int = Field(..., description="#{λ < 1}.")
    morse0: int = Field(..., description="#{λ ≤ 1 + tol}.")
    orthogonality: float = Field(..., description="max |⟨v_l, v_m⟩_w − δ_lm|.")
    identity_residuals: List[IdentityResidual] = Field(default_factory=list)

    def summary(self) -> Dict[str, Any]:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "morse": self.morse,
            "morse0": self.morse0,
            "orthogonality": self.orthogonality,
            "identity_residuals": [r.model_dump() for r in self.identity_residuals],
        }


# ---------------------------------------------------------------- reports


class CheckRow(BaseModel):
    """Строка отчета: предсказание, вычисленное значение, допуск, результат."""

    name: str
    predicted: Optional[float] = None
    computed: Optional[float] = None
    tolerance: Optional[float] = None
    passed: bool
    gating: bool = Field(True, description="Влияет ли строка на код возврата.")
    note: Optional[str] = None


class StageResult(BaseModel):
    name: str
    status: Literal["done", "error", "skipped"] = "done"
    description_error: Optional[str] = None
    rows: List[CheckRow] = Field(default_factory=list)
    data: Dict[str, Any] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status != "error" and all(r.passed for r in self.rows if r.gating)


class RunConfig(BaseModel):
    """Входная конфигурация одного запуска."""

    name: str = "run"
    domain: Union[str, DomainSpec] = Field(
        ..., description="Путь к файлу области или само описание."
    )
    k: int = Field(1, description="Число пиков.")
    p_values: List[float] = Field(default_factory=lambda: [10.0, 20.0, 40.0, 80.0])
    resolution: float = Field(1.0, gt=0.0, description="Множитель плотности сетки.")
    seeds: Optional[List[List[Point]]] = Field(
        None, description="Начальные конфигурации для поиска критических точек."
    )
    checks: List[
        Literal[
            "profiles",
            "green",
            "quadform",
            "critical",
            "construct",
            "solve",
            "spectrum",
            "identities",
            "limit_profile",
            "uniqueness",
            "reduced_map",
        ]
    ] = Field(
        default_factory=lambda: [
            "profiles",
            "green",
            "quadform",
            "critical",
            "construct",
            "solve",
            "spectrum",
            "identities",
            "limit_profile",
            "reduced_map",
        ]
    )
    tolerances: Dict[str, float] = Field(default_factory=dict)
    perturbations: int = Field(20, description="Число возмущений для проверки единственности.")
    seed: int = 0
    output_dir: str = "outputs"

    def domain_path(self, base: Optional[Path] = None) -> Optional[Path]:
        if isinstance(self.domain, DomainSpec):
            return None
        path = Path(self.domain)
        if not path.is_absolute() and base is not None and not path.exists():
            path = base / path
        return path


class Report(BaseModel):
    schema_version: str = SCHEMA_VERSION
    command: str
    config_digest: str
    run: Dict[str, Any]
    stages: List[StageResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(stage.passed for stage in self.stages)
