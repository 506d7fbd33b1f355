"""Fock-truncated state-vector simulation of the QSPI protocol.

The joint state is a ``(2, N)`` amplitude array: row 0 is the qubit |down>
branch, row 1 is |up>.  |down> is the +1 eigenvector of sigma_z, so the
conditional displacement exp(i kappa x sigma_z) kicks the |down> branch by
exp(+i kappa x) and the block structure matches (F, G) of the Laurent pair.

Displacements are exact exponentials of the *truncated* generators.  The
truncated position operator is diagonalised once per N (it is tridiagonal),
and momentum is the same matrix rotated by diag(i^n), so every gate is a
pair of dense mat-vecs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .errors import InvariantViolation, LeakageExceeded, TruncationWarning
from .laurent import PhaseSequence

DEFAULT_N = 500
NORM_TOL = 1e-9
LEAKAGE_TOL = 1e-6
LEAKAGE_FRACTION = 0.05
TRUNCATION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class HybridFockState:
    amplitudes: np.ndarray = field(repr=False)
    max_leakage: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 2 or amps.shape[0] != 2 or amps.shape[1] < 2:
            raise ValueError("amplitudes must have shape (2, N) with N >= 2")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def truncation(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def leakage(self) -> float:
        """Population in the top 5% of Fock levels."""
        top = max(1, int(math.ceil(LEAKAGE_FRACTION * self.truncation)))
        return float(np.sum(np.abs(self.amplitudes[:, -top:]) ** 2))

    def prob_down(self) -> float:
        return float(np.sum(np.abs(self.amplitudes[0]) ** 2))

    @classmethod
    def ground(cls, N: int = DEFAULT_N) -> "HybridFockState":
        amps = np.zeros((2, N), dtype=complex)
        amps[0, 0] = 1.0
        return cls(amps)


@lru_cache(maxsize=8)
def _position_eigensystem(N: int):
    off = np.sqrt(np.arange(1, N) / 2.0)
    lam, vecs = eigh_tridiagonal(np.zeros(N), off)
    return lam, vecs


def position_operator(N: int) -> np.ndarray:
    off = np.sqrt(np.arange(1, N) / 2.0)
    return np.diag(off, 1) + np.diag(off, -1)


def momentum_operator(N: int) -> np.ndarray:
    off = np.sqrt(np.arange(1, N) / 2.0)
    return -1j * np.diag(off, 1) + 1j * np.diag(off, -1)


@lru_cache(maxsize=64)
def position_exponential(N: int, kappa: float) -> np.ndarray:
    """exp(i kappa x) on the N-level truncation."""
    lam, V = _position_eigensystem(N)
    return (V * np.exp(1j * kappa * lam)) @ V.T


def momentum_exponential(N: int, beta: float) -> np.ndarray:
    """exp(i beta p) on the N-level truncation (p = R x R^dag, R = diag(i^n))."""
    lam, V = _position_eigensystem(N)
    r = 1j ** (np.arange(N) % 4)
    core = (V * np.exp(1j * beta * lam)) @ V.T
    return (r[:, None] * core) * r.conj()[None, :]


def _checked(amps: np.ndarray, prev: HybridFockState, check_leakage: bool) -> HybridFockState:
    norm = float(np.sqrt(np.sum(np.abs(amps) ** 2)))
    if abs(norm - prev.norm) > NORM_TOL:
        raise InvariantViolation("norm drift per gate", abs(norm - prev.norm), NORM_TOL)
    state = HybridFockState(amps, prev.max_leakage)
    leak = state.leakage()
    if check_leakage and leak > LEAKAGE_TOL:
        raise LeakageExceeded("population in top Fock levels", leak, LEAKAGE_TOL)
    object.__setattr__(state, "max_leakage", max(prev.max_leakage, leak))
    return state


def gate_qubit_rotation(state: HybridFockState, theta: float) -> HybridFockState:
    """Apply exp(i theta sigma_x) to the qubit."""
    c, s = math.cos(theta), math.sin(theta)
    a = state.amplitudes
    out = np.empty_like(a)
    out[0] = c * a[0] + 1j * s * a[1]
    out[1] = 1j * s * a[0] + c * a[1]
    return _checked(out, state, check_leakage=False)


def gate_conditional_displacement(state: HybridFockState, kappa: float, sign: int = 1) -> HybridFockState:
    """Apply exp(i sign kappa x sigma_z): momentum kick +kappa on |down>, -kappa on |up>."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    N = state.truncation
    k = sign * kappa
    plus = position_exponential(N, k)
    minus = position_exponential(N, -k)
    a = state.amplitudes
    out = np.stack([plus @ a[0], minus @ a[1]])
    return _checked(out, state, check_leakage=True)


def apply_momentum_exponential(amps: np.ndarray, beta: float) -> np.ndarray:
    """Rows of ``amps`` times exp(i beta p), applied in the eigenbasis: O(N^2)."""
    N = amps.shape[-1]
    lam, V = _position_eigensystem(N)
    r = 1j ** (np.arange(N) % 4)
    return (((amps * r.conj()) @ V) * np.exp(1j * beta * lam)) @ V.T * r


def gate_signal_displacement(state: HybridFockState, beta: float) -> HybridFockState:
    """Apply exp(i beta p) to the oscillator (position shift x -> x - beta)."""
    out = apply_momentum_exponential(state.amplitudes, beta)
    return _checked(out, state, check_leakage=True)


def prepare_sensing_state(phases: PhaseSequence, N: int = DEFAULT_N) -> HybridFockState:
    state = HybridFockState.ground(N)
    state = gate_qubit_rotation(state, phases.angles[0])
    for theta in phases.angles[1:]:
        state = gate_conditional_displacement(state, phases.kappa, +1)
        state = gate_qubit_rotation(state, theta)
    return state


def decode(state: HybridFockState, phases: PhaseSequence) -> HybridFockState:
    for theta in reversed(phases.angles[1:]):
        state = gate_qubit_rotation(state, -theta)
        state = gate_conditional_displacement(state, phases.kappa, -1)
    return gate_qubit_rotation(state, -phases.angles[0])


def final_state(phases: PhaseSequence, beta: float, N: int = DEFAULT_N) -> HybridFockState:
    state = prepare_sensing_state(phases, N)
    state = gate_signal_displacement(state, beta)
    return decode(state, phases)


def _protocol_probability(phases, beta, N):
    state = final_state(phases, beta, N)
    # total drift budget per run
    if abs(state.norm - 1.0) > 1e-7:
        raise InvariantViolation("norm drift per protocol run", abs(state.norm - 1.0), 1e-7)
    p = state.prob_down()
    return min(max(p, 0.0), 1.0)


def run_protocol(
    phases: PhaseSequence, beta: float, N: int = DEFAULT_N, check_truncation: bool = True
) -> float:
    """Probability of reading |down> after prepare / signal / decode.

    With ``check_truncation`` the run is repeated at 2N and a
    :class:`TruncationWarning` is issued if the two disagree by more than 1e-6.
    """
    p = _protocol_probability(phases, beta, N)
    if check_truncation:
        p2 = _protocol_probability(phases, beta, 2 * N)
        if abs(p2 - p) > TRUNCATION_TOL:
            warnings.warn(
                f"probability moved by {abs(p2 - p):.2e} when doubling N={N}",
                TruncationWarning,
                stacklevel=2,
            )
    return p


def response_curve(phases: PhaseSequence, betas, N: int = DEFAULT_N) -> np.ndarray:
    """Simulated P(down | beta) over a grid; the sensing state is prepared once."""
    prepared = prepare_sensing_state(phases, N)
    out = np.empty(len(betas))
    for i, beta in enumerate(betas):
        state = decode(gate_signal_displacement(prepared, float(beta)), phases)
        out[i] = state.prob_down()
    return np.clip(out, 0.0, 1.0)


def sensing_state_branches(phases: PhaseSequence, N: int = DEFAULT_N):
    """Unnormalised oscillator vectors of the |down> and |up> branches."""
    state = prepare_sensing_state(phases, N)
    return state.amplitudes[0].copy(), state.amplitudes[1].copy()


def coherent_state(alpha: complex, N: int) -> np.ndarray:
    """Fock amplitudes exp(-|a|^2/2) a^n / sqrt(n!)."""
    out = np.zeros(N, dtype=complex)
    if alpha == 0:
        out[0] = 1.0
        return out
    n = np.arange(N)
    log_mag = -abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def cat_phases(degree: int, kappa: float, beta_th: float) -> PhaseSequence:
    """Cat-state protocol with ``degree`` conditional kicks: (pi/4, 0, ..., 0)."""
    return PhaseSequence((math.pi / 4,) + (0.0,) * degree, kappa, beta_th)


@dataclass(frozen=True)
class Table1Row:
    label: str
    p_below: float  # P(down | beta = beta_th / 2)
    p_above: float  # P(down | beta = 3 beta_th / 2)


def table1_probabilities(phases_by_degree: dict, kappa: float, beta_th: float, N: int = DEFAULT_N):
    """Readout probabilities at half and one-and-a-half times the threshold.

    The first row is the degree-1 cat state; then one row per supplied degree.
    """
    rows = []
    cat = cat_phases(1, kappa, beta_th)
    entries = [("cat", cat)] + [(f"qspi-{d}", phases_by_degree[d]) for d in sorted(phases_by_degree)]
    for label, phases in entries:
        rows.append(
            Table1Row(
                label,
                run_protocol(phases, beta_th / 2, N),
                run_protocol(phases, 1.5 * beta_th, N),
            )
        )
    return rows
