from typing import Callable

import numpy as np
from omegaconf import DictConfig
from scipy.integrate import quad

from src.core.exceptions import QuadratureNotConverged
from src.core.schemas import MomentRecord
from src.profiles.profiles import ProfileEvaluator, exp_U
from src.utils.logger import get_logger


class MomentSuite:
    """
    Радиальные интегралы ∫_{R²} F(|y|) dy = 2π ∫_0^∞ r F(r) dr.
    Отрезок [0, r_tail] делится по декадам, хвост берется заменой s = 1/r.
    """

    def __init__(self, cfg: DictConfig):
        self.logger = get_logger(self.__class__.__name__)
        pc = cfg.profiles
        self.r_tail = float(pc.tail_switch)
        self.limit = int(pc.quad_limit)
        self.epsabs = float(pc.quad_epsabs)
        self.epsrel = float(pc.quad_epsrel)

    def radial(self, density: Callable[[np.ndarray], np.ndarray], label: str) -> float:
        """∫_{R²} density(|y|) dy."""

        def integrand(r):
            return r * density(r)

        def tail_integrand(s):
            return integrand(1.0 / s) / s**2

        breaks = [0.0, 0.01, 0.1, 1.0, 3.0, 10.0, 30.0, self.r_tail]
        total = 0.0
        pieces = [(integrand, a, b) for a, b in zip(breaks[:-1], breaks[1:])]
        pieces += [(tail_integrand, 0.0, 1.0 / self.r_tail)]
        for func, a, b in pieces:
            value, err = quad(func, a, b, limit=self.limit, epsabs=self.epsabs, epsrel=self.epsrel)
            if not np.isfinite(value) or err > max(1e3 * self.epsabs, 1e2 * self.epsrel * abs(value)):
                raise QuadratureNotConverged(
                    f"{label}: piece [{a:g}, {b:g}] error estimate {err:.2e}"
                )
            total += value
        return 2.0 * np.pi * total

    def compute(self, evaluator: ProfileEvaluator) -> MomentRecord:
        eu = exp_U

        def log_inv(r):
            return -np.log(r)

        record = MomentRecord(
            mass=self.radial(eu, "mass"),
            log_mass=self.radial(lambda r: log_inv(r) * eu(r), "log_mass") / (2.0 * np.pi),
            mass_f0=self.radial(lambda r: eu(r) * evaluator.f0(r), "mass_f0"),
            mass_f1=self.radial(lambda r: eu(r) * evaluator.f1(r), "mass_f1"),
            log_f0=self.radial(lambda r: log_inv(r) * eu(r) * evaluator.f0(r), "log_f0"),
            log_f1=self.radial(lambda r: log_inv(r) * eu(r) * evaluator.f1(r), "log_f1"),
            pi_twelfth=self.radial(lambda r: eu(r) * 0.5 * r**2 / (8.0 + r**2) ** 2, "pi_12"),
            eight_pi_third=self.radial(
                lambda r: eu(r) * ((8.0 - r**2) / (8.0 + r**2)) ** 2, "8pi_3"
            ),
        )
        self.logger.info(
            f"Moments: mass={record.mass:.12f}, log_mass={record.log_mass:.12f}"
        )
        return record


def reference_moments(c0: float, c1: float, b0: float, b1: float) -> dict:
    """Ожидаемые значения моментов: константы теории и тождества через C_i, B_i."""
    return {
        "mass": 8.0 * np.pi,
        "log_mass": -np.log(64.0),
        "mass_f0": -2.0 * np.pi * c0,
        "mass_f1": -2.0 * np.pi * c1,
        "log_f0": -2.0 * np.pi * b0,
        "log_f1": -2.0 * np.pi * b1,
        "pi_twelfth": np.pi / 12.0,
        "eight_pi_third": 8.0 * np.pi / 3.0,
    }


# w0 через понижение порядка по Z0 = (1 − t)/(1 + t), t = r²/8
C0_EXACT = 12.0
B0_EXACT = -(18.0 * np.log(2.0) + 10.0 + 2.0 * np.pi**2 / 3.0)
