"""Bosonic QSP block-encodings as Laurent polynomial pairs.

A phase sequence ``theta_0 .. theta_d`` defines the 2x2 operator-valued matrix

    Q(w) = R(theta_d) W R(theta_{d-1}) ... W R(theta_0),
    R(t) = exp(i t sigma_x),  W = diag(w, 1/w),  w = exp(i kappa x)

whose blocks are ``[[F(w), i G(w)], [i G(1/w), F(1/w)]]``.  ``theta_0`` is the
innermost rotation, i.e. the first one applied to ``|down>|0>``.  With this
ordering the response is independent of ``theta_d``, as it must be.

Coefficients are stored densely: array index ``k`` holds the coefficient of
``w**(k - d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PhaseFileError

PHASE_FILE_MAGIC = "qspi-phases v1"


@dataclass(frozen=True)
class PhaseSequence:
    """QSPI rotation angles plus the coupling and threshold they target."""

    angles: tuple
    kappa: float
    beta_th: float

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles)
        object.__setattr__(self, "angles", angles)
        if len(angles) < 1:
            raise ValueError("a phase sequence needs at least one angle")
        if not all(math.isfinite(a) for a in angles):
            raise ValueError("angles must be finite")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not (0 < self.beta_th < math.pi / (2 * self.kappa)):
            raise ValueError(
                f"beta_th={self.beta_th} outside (0, pi/(2 kappa)) for kappa={self.kappa}"
            )

    @property
    def degree(self) -> int:
        return len(self.angles) - 1

    def with_angles(self, angles) -> "PhaseSequence":
        return PhaseSequence(tuple(angles), self.kappa, self.beta_th)


@dataclass(frozen=True, eq=False)
class LaurentPair:
    """Real coefficient arrays of F and G, indexed n = -d..d."""

    degree: int
    f: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)

    def __post_init__(self):
        size = 2 * self.degree + 1
        f = np.asarray(self.f, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if f.shape != (size,) or g.shape != (size,):
            raise ValueError(f"coefficient arrays must have length {size}")
        f.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.degree, self.degree + 1)

    def f_at(self, n: int) -> float:
        return float(self.f[n + self.degree]) if abs(n) <= self.degree else 0.0

    def g_at(self, n: int) -> float:
        return float(self.g[n + self.degree]) if abs(n) <= self.degree else 0.0

    def g_reflected(self) -> np.ndarray:
        """Coefficients of G(1/w), i.e. ``g_{-n}`` at position ``n``."""
        return self.g[::-1].copy()


def _rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 1j * s], [1j * s, c]])


def build_laurent_direct(phases: PhaseSequence) -> LaurentPair:
    """Expand the QSP product symbolically as a matrix polynomial in w."""
    d = phases.degree
    # poly[k] is the 2x2 matrix coefficient of w**(k - d)
    poly = np.zeros((2 * d + 1, 2, 2), dtype=complex)
    poly[d] = _rotation(phases.angles[0])
    for theta in phases.angles[1:]:
        shifted = np.zeros_like(poly)
        shifted[1:, 0, :] = poly[:-1, 0, :]  # top row picks up w
        shifted[:-1, 1, :] = poly[1:, 1, :]  # bottom row picks up 1/w
        poly = np.einsum("ab,kbc->kac", _rotation(theta), shifted)
    f = poly[:, 0, 0]
    g = -1j * poly[:, 0, 1]
    # exact products of real cos/sin with powers of i: imaginary parts are rounding only
    assert np.max(np.abs(f.imag), initial=0.0) < 1e-9
    assert np.max(np.abs(g.imag), initial=0.0) < 1e-9
    return LaurentPair(d, f.real, g.real)


def build_laurent_recursive(phases: PhaseSequence) -> LaurentPair:
    """Build (F, G) with the three-term coefficient recursion.

    The recursion propagates ``f_r`` together with ``h_r = g_{-r}`` (the
    coefficients of G(1/w)); in terms of h it reads

        f_r <- cos(t) f_{r-1} - sin(t) h_{r+1}
        h_r <- sin(t) f_{r-1} + cos(t) h_{r+1}

    with out-of-range entries zero, which covers the printed edge branches.
    The final h is reflected back into g so the result matches
    ``build_laurent_direct`` coefficient for coefficient.
    """
    f, h = recursive_coefficients(phases.angles)
    return LaurentPair(phases.degree, f, h[::-1])


def recursive_coefficients(angles):
    """Run the recursion on raw angles; returns ``(f, h)`` with ``h_n = g_{-n}``."""
    d = len(angles) - 1
    f = np.zeros(2 * d + 3)  # one guard cell on each side
    h = np.zeros(2 * d + 3)
    f[d + 1] = math.cos(angles[0])
    h[d + 1] = math.sin(angles[0])
    for theta in angles[1:]:
        c, s = math.cos(theta), math.sin(theta)
        f_left = np.roll(f, 1)  # f_{r-1}; guard cells keep the wrap-around at zero
        h_right = np.roll(h, -1)  # h_{r+1}
        f = c * f_left - s * h_right
        h = s * f_left + c * h_right
        f[0] = f[-1] = h[0] = h[-1] = 0.0
    return f[1:-1], h[1:-1]


def unitarity_residual(lp: LaurentPair) -> float:
    """Largest coefficient of F(w)F(1/w) + G(w)G(1/w) - 1."""
    prod = np.convolve(lp.f, lp.f[::-1]) + np.convolve(lp.g, lp.g[::-1])
    prod[2 * lp.degree] -= 1.0
    return float(np.max(np.abs(prod)))


def evaluate_fg(lp: LaurentPair, kappa: float, x):
    """Return ``(f(x), g(x))`` with f(x) = sum_n f_n exp(i kappa x n).

    ``x`` may be a scalar or an array; the result has the same shape.
    """
    x_arr = np.asarray(x, dtype=float)
    phase = np.exp(1j * kappa * np.multiply.outer(x_arr, lp.indices))
    fx = phase @ lp.f
    gx = phase @ lp.g
    if x_arr.ndim == 0:
        return complex(fx), complex(gx)
    return fx, gx


def write_phase_file(path, phases: PhaseSequence) -> str:
    """Serialise ``phases`` to the text phase-file format; returns the text.

    If ``path`` is None nothing is written.
    """
    lines = [
        PHASE_FILE_MAGIC,
        f"d={phases.degree} kappa={phases.kappa!r} beta_th={phases.beta_th!r}",
    ]
    lines.extend(f"{a:.17g}" for a in phases.angles)
    text = "\n".join(lines) + "\n"
    if path is not None:
        from .io import atomic_write_text

        atomic_write_text(path, text)
    return text


def parse_phase_text(text: str) -> PhaseSequence:
    lines = [ln.strip() for ln in text.strip().splitlines()]
    if not lines or lines[0] != PHASE_FILE_MAGIC:
        raise PhaseFileError(f"missing '{PHASE_FILE_MAGIC}' header")
    if len(lines) < 2:
        raise PhaseFileError("missing parameter line")
    try:
        params = dict(item.split("=", 1) for item in lines[1].split())
        d = int(params["d"])
        kappa = float(params["kappa"])
        beta_th = float(params["beta_th"])
    except (KeyError, ValueError) as exc:
        raise PhaseFileError(f"bad parameter line {lines[1]!r}") from exc
    if d < 0:
        raise PhaseFileError(f"negative degree {d}")
    body = lines[2:]
    if len(body) != d + 1:
        raise PhaseFileError(f"expected {d + 1} angle lines for d={d}, found {len(body)}")
    try:
        angles = [float(b) for b in body]
    except ValueError as exc:
        raise PhaseFileError("angle lines must hold one decimal each") from exc
    values = angles + [kappa, beta_th]
    if not all(math.isfinite(v) for v in values):
        raise PhaseFileError("non-finite value in phase file")
    try:
        return PhaseSequence(tuple(angles), kappa, beta_th)
    except ValueError as exc:
        raise PhaseFileError(str(exc)) from exc


def read_phase_file(path) -> PhaseSequence:
    return parse_phase_text(Path(path).read_text(encoding="utf-8"))
