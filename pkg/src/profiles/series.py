"""Источники f_0, f_1 и степенные ряды профилей в нуле (по t = r²)."""

import numpy as np
from numpy.polynomial import Polynomial


def source_f0(w0, u):
    """f_0 = w_0 − U²/2; работает и для массивов, и для Polynomial."""
    return w0 - 0.5 * u**2


def source_f1(w1, w0, u):
    return w1 - u * w0 + u**3 / 3.0 + 0.5 * w0**2 + u**4 / 8.0 - 0.5 * u**2 * w0


def liouville_series(n_terms: int) -> tuple[Polynomial, Polynomial]:
    """U = −2log(1 + t/8) и e^U = (1 + t/8)^{−2} как ряды по t до степени n_terms."""
    k = np.arange(1, n_terms + 1)
    u = np.concatenate([[0.0], -2.0 * (-1.0) ** (k + 1) * (1.0 / 8.0) ** k / k])
    k = np.arange(0, n_terms + 1)
    eu = (k + 1.0) * (-1.0 / 8.0) ** k
    return Polynomial(u), Polynomial(eu)


def launch_series(n_terms: int, w0_coef: np.ndarray | None = None) -> np.ndarray:
    """
    Коэффициенты a_n регулярного решения Δw = −e^U f с w(0) = 0.
    Δ(t^n) = 4n² t^{n−1}, поэтому a_n = [−e^U f]_{n−1} / (4n²).
    Без w0_coef считается ряд для w_0, иначе для w_1.
    """
    u, eu = liouville_series(n_terms)
    w0 = None if w0_coef is None else Polynomial(w0_coef)
    a = np.zeros(n_terms + 1)
    for n in range(1, n_terms + 1):
        w = Polynomial(a.copy())
        f = source_f0(w, u) if w0 is None else source_f1(w, w0, u)
        rhs = (-(eu * f)).cutdeg(n_terms)
        coef = rhs.coef
        a[n] = (coef[n - 1] if n - 1 < coef.size else 0.0) / (4.0 * n**2)
    return a


def eval_series(coef: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Значение и производная по r ряда Σ a_n r^{2n}."""
    t = np.asarray(r, dtype=float) ** 2
    poly = Polynomial(coef)
    return poly(t), 2.0 * np.asarray(r) * poly.deriv()(t)
