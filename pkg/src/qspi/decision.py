"""Decision-error analytics for the threshold problem |beta| < beta_th."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import QuadratureNotConverged
from .response import ResponseSpectrum


@dataclass(frozen=True)
class DecisionProblem:
    kappa: float
    beta_th: float
    degree: int = 1

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not (0 < self.beta_th < self.half_period):
            raise ValueError(f"beta_th must lie in (0, pi/(2 kappa)) = (0, {self.half_period})")
        if self.degree < 0:
            raise ValueError("degree must be non-negative")

    @property
    def half_period(self) -> float:
        return math.pi / (2 * self.kappa)

    @classmethod
    def quarter_period(cls, kappa: float, degree: int = 1) -> "DecisionProblem":
        """Threshold at pi/(4 kappa), the middle of the sensing range."""
        return cls(kappa, math.pi / (4 * kappa), degree)


@dataclass(frozen=True)
class ErrorBreakdown:
    p_err: float
    p_fn: float
    p_fp: float


def reduce_beta(beta: float, kappa: float) -> float:
    """Map beta into the fundamental period [-pi/2k, pi/2k) of the response."""
    period = math.pi / kappa
    k = round(beta / period)  # round-half-even keeps half-period inputs deterministic
    return beta - k * period


def ideal_response(beta: float, dp: DecisionProblem) -> int:
    return 1 if abs(reduce_beta(beta, dp.kappa)) < dp.beta_th else 0


def ideal_sign_sin_response(beta: float, dp: DecisionProblem) -> float:
    k, b = dp.kappa, dp.beta_th
    return (np.sign(math.sin(k * (b - beta))) + np.sign(math.sin(k * (b + beta)))) / 2


def sinc(x: float) -> float:
    """Unnormalised sinc, sin(x)/x with sinc(0) = 1."""
    return 1.0 if x == 0 else math.sin(x) / x


def h_s(s: int, dp: DecisionProblem) -> float:
    kb = dp.kappa * dp.beta_th
    return 2 * kb / math.pi + sinc(math.pi * s) - (4 * kb / math.pi) * sinc(2 * s * kb)


def perr_analytic(rs: ResponseSpectrum, dp: DecisionProblem) -> float:
    """Decision error as sum_s c_s H_s."""
    if rs.degree != dp.degree:
        raise ValueError(f"spectrum degree {rs.degree} != problem degree {dp.degree}")
    if not math.isclose(rs.kappa, dp.kappa, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError(f"spectrum kappa {rs.kappa} != problem kappa {dp.kappa}")
    H = np.array([h_s(int(s), dp) for s in rs.indices])
    return float(rs.c @ H)


def perr_quadrature(response, dp: DecisionProblem, tol: float = 1e-9) -> ErrorBreakdown:
    """False-negative and false-positive integrals of a response callable.

    ``response`` maps beta in [0, pi/(2 kappa)] to P(down | beta).
    """
    scale = 2 * dp.kappa / math.pi

    def _quad(fn, a, b, label):
        value, err = integrate.quad(fn, a, b, epsabs=tol / 10, epsrel=0.0, limit=400)
        if not err <= tol / scale:
            raise QuadratureNotConverged(label, err * scale, tol)
        return value

    fn = _quad(lambda b: 1.0 - response(b), 0.0, dp.beta_th, "false-negative integral")
    fp = _quad(response, dp.beta_th, dp.half_period, "false-positive integral")
    p_fn, p_fp = scale * fn, scale * fp
    return ErrorBreakdown(p_fn + p_fp, p_fn, p_fp)


def cat_perr(theta0: float, dp: DecisionProblem) -> float:
    """Closed-form degree-1 decision error as a function of the first angle."""
    kb = dp.kappa * dp.beta_th
    t4 = 4 * theta0
    return (
        math.sin(2 * kb - t4)
        + math.sin(2 * kb + t4)
        + (math.pi - 4 * kb) * math.cos(t4)
        - 4 * kb
        - 2 * math.sin(2 * kb)
        + 3 * math.pi
    ) / (4 * math.pi)


def bisect(fn, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    flo = fn(lo)
    if flo == 0:
        return lo
    if flo * fn(hi) > 0:
        raise ValueError("bisection bracket does not change sign")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0 or hi - lo < tol:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def crossover_chi() -> float:
    """Root of pi/2 - x + sin(x) on (0, pi)."""
    return bisect(lambda x: math.pi / 2 - x + math.sin(x), 0.0, math.pi, tol=1e-15)


def crossover_threshold(kappa: float) -> float:
    """Threshold above which the cat protocol loses to always answering 'below'."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return crossover_chi() / (2 * kappa)


def lambert_w(x: float, rel_tol: float = 1e-15, max_iter: int = 100) -> float:
    """Principal branch of the Lambert W function for x >= 0 (Halley iteration)."""
    if x < 0:
        raise ValueError("lambert_w is implemented for x >= 0 only")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return math.inf
    # starting point: log-asymptotic for large x, log1p for small
    if x > math.e:
        lx = math.log(x)
        w = lx - math.log(lx)
    else:
        w = math.log1p(x) * 0.75 if x > 0.5 else x * (1 - x)
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1
        denom = ew * wp1 - (wp1 + 1) * f / (2 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= rel_tol * max(abs(w), 1e-300):
            break
    return w


def degree_bound(epsilon: float, sigma: float) -> int:
    """Degree sufficient for an epsilon-accurate sign approximation outside a width-sigma gap."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    w_a = lambert_w(8 / (math.pi * epsilon**2))
    w_b = lambert_w(512 / (math.e**2 * math.pi) / epsilon**2)
    first = math.e / sigma * math.sqrt(w_a * w_b)
    second = math.sqrt(2) * lambert_w(
        8 * math.sqrt(2) / (math.sqrt(math.pi) * sigma * epsilon) * math.sqrt(w_a)
    )
    return 2 * math.ceil(max(first, second)) + 1


def predicted_perr(d: int, kappa: float, prefactor: float) -> float:
    """Large-degree error model prefactor * log(d) / (kappa d)."""
    if d < 2:
        raise ValueError("the log-corrected model needs d >= 2")
    return prefactor * math.log(d) / (kappa * d)
