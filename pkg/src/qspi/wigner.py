"""Wigner quasiprobability of a single-mode pure state from Fock amplitudes.

Coordinates are the quadratures x = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)),
so the vacuum is W = exp(-x^2 - p^2)/pi.  The ``alpha`` unit option instead
labels the axes by Re(alpha) and Im(alpha) with alpha = (x + i p)/sqrt(2); the
values are rescaled so the function still integrates to the state norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .io import atomic_write_text, fmt

DEFAULT_STEP = 0.2
SUPPORT_TOL = 1e-24
UNITS = ("quadrature", "alpha")


@dataclass(frozen=True, eq=False)
class WignerGrid:
    x_min: float
    x_max: float
    p_min: float
    p_max: float
    step: float = DEFAULT_STEP
    units: str = "quadrature"
    values: np.ndarray = field(default=None, repr=False)  # shape (len(p), len(x))

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if self.x_max < self.x_min or self.p_max < self.p_min:
            raise ValueError("grid bounds are inverted")
        if self.units not in UNITS:
            raise ValueError(f"units must be one of {UNITS}")

    @property
    def xs(self) -> np.ndarray:
        return _axis(self.x_min, self.x_max, self.step)

    @property
    def ps(self) -> np.ndarray:
        return _axis(self.p_min, self.p_max, self.step)

    def integral(self) -> float:
        """Riemann sum of the values times the cell area."""
        return float(np.sum(self.values) * self.step**2)


def _axis(lo, hi, step):
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def _support(psi: np.ndarray) -> int:
    # drop the negligible Fock tail; the kernel is O(n^2) per grid point
    weight = np.abs(psi) ** 2
    tail = np.cumsum(weight[::-1])[::-1]
    keep = np.nonzero(tail > SUPPORT_TOL * max(float(weight.sum()), 1e-300))[0]
    return int(keep[-1]) + 1 if keep.size else 1


def parity_kernel(m: int, n: int, alpha: np.ndarray) -> np.ndarray:
    """<m| D(alpha) Pi D(alpha)^dag |n> for m >= n (Pi is photon-number parity)."""
    if m < n:
        raise ValueError("parity_kernel expects m >= n; conjugate for the other half")
    k = m - n
    a2 = np.abs(alpha) ** 2
    # sqrt(n!/m!) |2 alpha|^k exp(-2|alpha|^2) in log form to survive large k
    log_mag = 0.5 * (gammaln(n + 1) - gammaln(m + 1)) - 2 * a2
    if k:
        with np.errstate(divide="ignore"):
            log_mag = log_mag + k * np.log(2 * np.abs(alpha))
    phase = np.exp(1j * k * np.angle(alpha))
    return (-1) ** n * np.exp(log_mag) * phase * eval_genlaguerre(n, k, 4 * a2)


def wigner_values(psi, xs, ps) -> np.ndarray:
    """W(x, p) on the outer grid ``ps x xs`` for the pure state ``psi``.

    W = (1/pi) sum_{m,n} psi_m conj(psi_n) <n| D Pi D^dag |m>; only m >= n is
    evaluated, the rest follows from Hermiticity.
    """
    psi = np.asarray(psi, dtype=complex)
    M = _support(psi)
    psi = psi[:M]
    X, P = np.meshgrid(np.asarray(xs, float), np.asarray(ps, float))
    alpha = (X + 1j * P) / math.sqrt(2)
    W = np.zeros(alpha.shape)
    for n in range(M):
        if psi[n] == 0:
            continue
        for m in range(n, M):
            rho_mn = psi[m] * np.conj(psi[n])
            if rho_mn == 0:
                continue
            term = rho_mn * np.conj(parity_kernel(m, n, alpha))
            W += term.real if m == n else 2 * term.real
    return W / math.pi


def wigner(psi, x_min=-6.0, x_max=6.0, p_min=-6.0, p_max=6.0, step=DEFAULT_STEP, units="quadrature"):
    """Evaluate the Wigner function on a uniform grid.

    With ``units="alpha"`` the bounds and step refer to Re/Im alpha.
    """
    grid = WignerGrid(x_min, x_max, p_min, p_max, step, units)
    scale = math.sqrt(2) if units == "alpha" else 1.0
    values = wigner_values(psi, grid.xs * scale, grid.ps * scale) * scale**2
    return WignerGrid(x_min, x_max, p_min, p_max, step, units, values)


def vacuum_wigner(x, p):
    return np.exp(-np.asarray(x) ** 2 - np.asarray(p) ** 2) / math.pi


def fock1_wigner(x, p):
    r2 = np.asarray(x) ** 2 + np.asarray(p) ** 2
    return (2 * r2 - 1) * np.exp(-r2) / math.pi


def fringe_frequency(psi, p: float = 0.0, half_width: float = 3.0, samples: int = 4001, units="quadrature") -> float:
    """Spatial frequency of the interference fringes along x at fixed p.

    Estimated from the spacing of sign changes of W(x, p) on |x| <= half_width.
    """
    xs = np.linspace(-half_width, half_width, samples)
    scale = math.sqrt(2) if units == "alpha" else 1.0
    w = wigner_values(psi, xs * scale, [p * scale])[0]
    sign = np.signbit(w)
    idx = np.nonzero(sign[1:] != sign[:-1])[0]
    if idx.size < 3:
        raise ValueError("fewer than three sign changes; no fringes to measure")
    # linear interpolation of each crossing
    roots = xs[idx] - w[idx] * (xs[idx + 1] - xs[idx]) / (w[idx + 1] - w[idx])
    period = 2 * (roots[-1] - roots[0]) / (roots.size - 1)
    return 1.0 / period


def expected_fringe_frequency(degree: int, kappa: float, units: str = "alpha") -> float:
    """Fringe frequency of a cat whose halves sit at p = +-degree*kappa.

    sqrt(2) d kappa / pi in Re(alpha) units, d kappa / pi in quadrature units.
    """
    base = degree * kappa / math.pi
    return base * math.sqrt(2) if units == "alpha" else base


def grid_csv(grid: WignerGrid) -> str:
    lines = ["x,p,w"]
    for i, p in enumerate(grid.ps):
        for j, x in enumerate(grid.xs):
            lines.append(f"{fmt(x)},{fmt(p)},{fmt(grid.values[i, j])}")
    return "\n".join(lines) + "\n"


def branch_csv(psi) -> str:
    lines = ["n,re,im"]
    lines.extend(f"{n},{fmt(a.real)},{fmt(a.imag)}" for n, a in enumerate(np.asarray(psi, complex)))
    return "\n".join(lines) + "\n"


def write_grid_csv(path, grid: WignerGrid) -> None:
    atomic_write_text(path, grid_csv(grid))


def symlog_metadata(grid: WignerGrid, linthresh: float = 1e-3) -> dict:
    """Axis names and symmetric-log colour-scale parameters for plotters."""
    vmax = float(np.max(np.abs(grid.values))) if grid.values is not None else 0.0
    names = ("Re alpha", "Im alpha") if grid.units == "alpha" else ("x", "p")
    return {
        "x_axis": names[0],
        "y_axis": names[1],
        "value": "W",
        "step": grid.step,
        "colour_scale": {"type": "symlog", "linthresh": linthresh, "vmin": -vmax, "vmax": vmax},
    }
