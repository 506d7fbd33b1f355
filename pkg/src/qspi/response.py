"""Qubit response P(down | beta) of a QSPI protocol.

The response is a Laurent polynomial in nu = exp(2 i kappa beta) with real,
symmetric coefficients c_s.  Three routes are provided: the closed-form
spectrum, Gauss-Hermite quadrature of the overlap integral, and (for
diagnostics) the interference weights C_nm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite

from .errors import InvariantViolation, QuadratureNotConverged
from .laurent import LaurentPair, evaluate_fg

SPECTRUM_TOL = 1e-8
PROB_IMAG_TOL = 1e-9
PROB_CLAMP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ResponseSpectrum:
    degree: int
    kappa: float
    c: np.ndarray = field(repr=False)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.degree, self.degree + 1)

    def coefficient(self, s: int) -> float:
        return float(self.c[s + self.degree]) if abs(s) <= self.degree else 0.0


@dataclass(frozen=True, eq=False)
class ElementaryWeights:
    """``blocks[n + d, m + d]`` is the 2x2 weight C_nm."""

    degree: int
    blocks: np.ndarray = field(repr=False)
    lower_right: str = "sum"

    def block(self, n: int, m: int) -> np.ndarray:
        return self.blocks[n + self.degree, m + self.degree]


def _kernel(lp: LaurentPair) -> np.ndarray:
    # K[n, n'] = f_n f_n' + h_n h_n' with h_n = g_{-n}; the overlap integral of
    # f(beta - x) f(x) + g(x - beta) g(-x) pairs F with G(1/w), not G(w).
    h = lp.g_reflected()
    return np.outer(lp.f, lp.f) + np.outer(h, h)


def _decay(kappa: float, d: int) -> np.ndarray:
    # e^{-kappa^2 k^2} for k = -2d..2d
    k = np.arange(-2 * d, 2 * d + 1)
    return np.exp(-(kappa**2) * k.astype(float) ** 2)


def response_coefficients(lp: LaurentPair, kappa: float) -> ResponseSpectrum:
    """Spectrum c_s, s = -d..d, of the response polynomial.

    c_s = sum_{n,n',r} K[n,n'] K[n+2s, n'+2r] exp(-kappa^2 (r-s)^2).  K is
    rank two (K = U U^T with U = [f, h]), so the 2-D autocorrelation factors
    into four 1-D lagged products and the whole sum costs O(d^2).
    """
    c = _spectrum(lp.f, lp.g_reflected(), kappa)
    _check_spectrum(c)
    c.setflags(write=False)
    return ResponseSpectrum(lp.degree, float(kappa), c)


def _spectrum(f: np.ndarray, h: np.ndarray, kappa: float) -> np.ndarray:
    d = (f.size - 1) // 2
    cols = (f, h)
    # lag[p, s + d] = sum_n U_i[n] U_j[n + 2s] for the pair p = (i, j)
    lag = np.array([np.correlate(b, a, "full")[::2] for a in cols for b in cols])
    s = np.arange(-d, d + 1)
    weights = _decay(kappa, d)[(s[None, :] - s[:, None]) + 2 * d]  # e^{-kappa^2 (r-s)^2}
    return np.einsum("ps,ps->s", lag, lag @ weights.T)


def _check_spectrum(c: np.ndarray) -> None:
    sym = float(np.max(np.abs(c - c[::-1])))
    if sym > SPECTRUM_TOL:
        raise InvariantViolation("spectrum symmetry c_s = c_-s", sym, SPECTRUM_TOL)
    norm = abs(float(np.sum(c)) - 1.0)
    if norm > SPECTRUM_TOL:
        raise InvariantViolation("spectrum normalisation sum c_s = 1", norm, SPECTRUM_TOL)


def response_coefficients_bruteforce(lp: LaurentPair, kappa: float) -> np.ndarray:
    """Four-index A-tensor sum regrouped by s; O(d^4) reference used by tests.

    A[n,n',m,m'] = K[n,n'] K[m,m'] exp(-kappa^2 (n-n'-m+m')^2 / 4) nu^{(m-n)/2};
    each term with m = n + 2s contributes to c_s.  Returns the complex
    coefficient sums so callers can inspect the imaginary residual.
    """
    d = lp.degree
    K = _kernel(lp)
    idx = range(-d, d + 1)
    c = np.zeros(2 * d + 1, dtype=complex)
    for n in idx:
        for n2 in idx:
            knn = K[n + d, n2 + d]
            if knn == 0.0:
                continue
            for m in idx:
                if (m - n) % 2:
                    continue
                s = (m - n) // 2
                for m2 in idx:
                    kmm = K[m + d, m2 + d]
                    if kmm == 0.0 or (m2 - n2) % 2:
                        continue
                    c[s + d] += knn * kmm * math.exp(-(kappa**2) * (n - n2 - m + m2) ** 2 / 4)
    return c


def response_probability(rs: ResponseSpectrum, beta):
    """Evaluate sum_s c_s exp(2 i kappa beta s); scalar or array ``beta``."""
    beta_arr = np.asarray(beta, dtype=float)
    phase = np.exp(2j * rs.kappa * np.multiply.outer(beta_arr, rs.indices))
    values = phase @ rs.c
    imag = float(np.max(np.abs(values.imag), initial=0.0))
    if imag > PROB_IMAG_TOL:
        raise InvariantViolation("response imaginary part", imag, PROB_IMAG_TOL)
    p = _clamp_probability(values.real)
    return float(p) if beta_arr.ndim == 0 else p


def _clamp_probability(p):
    p = np.asarray(p, dtype=float)
    low = float(np.min(p, initial=0.0))
    high = float(np.max(p, initial=1.0))
    if low < -PROB_CLAMP_TOL:
        raise InvariantViolation("probability below 0", -low, PROB_CLAMP_TOL)
    if high > 1.0 + PROB_CLAMP_TOL:
        raise InvariantViolation("probability above 1", high - 1.0, PROB_CLAMP_TOL)
    return np.clip(p, 0.0, 1.0)


@lru_cache(maxsize=32)
def _hermite_rule(order: int):
    x, w = roots_hermite(order)
    return x, w / math.sqrt(math.pi)


def overlap_amplitude(lp: LaurentPair, kappa: float, beta: float, x):
    """f(beta - x) f(x) + g(x - beta) g(-x): the <down|..|down> block in position space."""
    f_shift, _ = evaluate_fg(lp, kappa, beta - x)
    f_x, _ = evaluate_fg(lp, kappa, x)
    _, g_shift = evaluate_fg(lp, kappa, x - beta)
    _, g_neg = evaluate_fg(lp, kappa, -x)
    return f_shift * f_x + g_shift * g_neg


def response_by_quadrature(
    lp: LaurentPair,
    kappa: float,
    beta: float,
    tol: float = 1e-10,
    min_order: int = 16,
    max_order: int = 4096,
) -> float:
    """Integrate |overlap(x)|^2 |psi_0(x)|^2 over the real line.

    The integrand is a Gaussian times a trigonometric polynomial, so
    Gauss-Hermite converges quickly; the order doubles until two successive
    estimates agree to ``tol``.
    """
    order = min_order
    prev = None
    while order <= max_order:
        x, w = _hermite_rule(order)
        amp = overlap_amplitude(lp, kappa, beta, x)
        value = float(np.sum(w * np.abs(amp) ** 2))
        if prev is not None and abs(value - prev) <= tol:
            return float(_clamp_probability(value))
        prev = value
        order *= 2
    raise QuadratureNotConverged(
        f"Gauss-Hermite response at beta={beta}", abs(value - prev), tol
    )


LOWER_RIGHT_VARIANTS = ("sum", "product")


def elementary_weights(lp: LaurentPair, lower_right: str = "sum") -> ElementaryWeights:
    """Interference weights C_nm of the QSPI operator expansion.

    ``lower_right`` selects how the (1,1) entry combines ``g_n g_m`` with
    ``f_-n f_-m``: ``"sum"`` adds them, ``"product"`` multiplies them.  Only
    ``"sum"`` reconstructs the identity at zero signal; see
    :func:`lower_right_diagnostic`.
    """
    if lower_right not in LOWER_RIGHT_VARIANTS:
        raise ValueError(f"lower_right must be one of {LOWER_RIGHT_VARIANTS}")
    d = lp.degree
    f, g = lp.f, lp.g
    fr, gr = f[::-1], g[::-1]  # index n holds f_{-n}, g_{-n}
    blocks = np.zeros((2 * d + 1, 2 * d + 1, 2, 2), dtype=complex)
    blocks[:, :, 0, 0] = np.outer(f, f) + np.outer(gr, gr)
    blocks[:, :, 0, 1] = 1j * (np.outer(f, g) - np.outer(gr, fr))
    blocks[:, :, 1, 0] = 1j * (np.outer(fr, gr) - np.outer(g, f))
    if lower_right == "sum":
        blocks[:, :, 1, 1] = np.outer(g, g) + np.outer(fr, fr)
    else:
        blocks[:, :, 1, 1] = np.outer(g, g) * np.outer(fr, fr)
    return ElementaryWeights(d, blocks, lower_right)


def reconstruct_zero_signal(weights: ElementaryWeights, omega: complex) -> np.ndarray:
    """sum_nm C_nm w^{m-n}: the QSPI operator at beta = 0 on one eigenvalue w."""
    idx = np.arange(-weights.degree, weights.degree + 1)
    phase = omega ** (idx[None, :] - idx[:, None]).astype(float)
    return np.einsum("nm,nmab->ab", phase, weights.blocks)


def lower_right_diagnostic(lp: LaurentPair, samples: int = 64) -> dict:
    """Identity residual at zero signal for each lower-right candidate.

    With no signal Q^-1 Q = I, so the correct weights must sum to the identity
    for every unit-modulus w.  Returns ``{variant: max residual}``.
    """
    omegas = np.exp(1j * np.linspace(0.0, 2 * math.pi, samples, endpoint=False))
    out = {}
    for variant in LOWER_RIGHT_VARIANTS:
        weights = elementary_weights(lp, variant)
        out[variant] = max(
            float(np.max(np.abs(reconstruct_zero_signal(weights, w) - np.eye(2))))
            for w in omegas
        )
    return out
