import math
import warnings

import numpy as np
import pytest

import qspi.simulator as sim
from qspi.errors import LeakageExceeded
from qspi.laurent import PhaseSequence, build_laurent_recursive
from qspi.response import response_coefficients, response_probability
from qspi.simulator import (
    HybridFockState,
    cat_phases,
    coherent_state,
    gate_conditional_displacement,
    gate_qubit_rotation,
    gate_signal_displacement,
    position_exponential,
    position_operator,
    run_protocol,
    sensing_state_branches,
    table1_probabilities,
)

from conftest import random_phases

N = 120


def random_state(rng, n_active=15, n=N):
    amps = np.zeros((2, n), complex)
    amps[:, :n_active] = rng.normal(size=(2, n_active)) + 1j * rng.normal(size=(2, n_active))
    return HybridFockState(amps / np.linalg.norm(amps))


def test_rotation_examples(rng):
    s = random_state(rng)
    assert np.allclose(gate_qubit_rotation(s, 0.0).amplitudes, s.amplitudes, atol=0)
    flipped = gate_qubit_rotation(HybridFockState.ground(N), math.pi / 2).amplitudes
    assert abs(flipped[1, 0] - 1j) < 1e-15 and abs(flipped[0, 0]) < 1e-15
    back = gate_qubit_rotation(gate_qubit_rotation(s, 0.83), -0.83)
    assert np.max(np.abs(back.amplitudes - s.amplitudes)) <= 1e-12


def test_conditional_displacement_identity_and_inverse(rng):
    s = random_state(rng)
    assert np.allclose(gate_conditional_displacement(s, 0.0).amplitudes, s.amplitudes, atol=1e-14)
    there = gate_conditional_displacement(s, 0.4, +1)
    back = gate_conditional_displacement(there, 0.4, -1)
    assert np.max(np.abs(back.amplitudes - s.amplitudes)) <= 1e-10


def test_conditional_displacement_makes_coherent_branches():
    kappa = 0.6
    down = HybridFockState.ground(N)
    out = gate_conditional_displacement(down, kappa).amplitudes
    # |down> is the +1 sigma_z eigenvector: momentum kick +kappa, alpha = +i kappa / sqrt(2)
    assert np.max(np.abs(out[0] - coherent_state(1j * kappa / math.sqrt(2), N))) <= 1e-12
    up = HybridFockState(np.flipud(HybridFockState.ground(N).amplitudes))
    out = gate_conditional_displacement(up, kappa).amplitudes
    assert np.max(np.abs(out[1] - coherent_state(-1j * kappa / math.sqrt(2), N))) <= 1e-12


def test_sign_must_be_unit():
    with pytest.raises(ValueError):
        gate_conditional_displacement(HybridFockState.ground(N), 0.1, 2)


def test_signal_displacement_shifts_position():
    s = HybridFockState.ground(N)
    assert np.allclose(gate_signal_displacement(s, 0.0).amplitudes, s.amplitudes, atol=1e-12)
    beta = 0.9
    psi = gate_signal_displacement(s, beta).amplitudes[0]
    mean_x = np.vdot(psi, position_operator(N) @ psi).real
    assert mean_x == pytest.approx(-beta, abs=1e-8)


def test_displacement_commutation(rng):
    kappa, beta = 0.7, 0.45
    for _ in range(3):
        psi = random_state(rng, 12, 200).amplitudes[0]
        psi = psi / np.linalg.norm(psi)
        ex = position_exponential(200, kappa)
        lhs = ex @ sim.apply_momentum_exponential(psi, beta)
        rhs = sim.apply_momentum_exponential(ex @ psi, beta) * np.exp(-1j * kappa * beta)
        assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_leakage_detected():
    with pytest.raises(LeakageExceeded):
        gate_conditional_displacement(HybridFockState.ground(20), 4.0)


def test_cat_protocol_is_cos_squared():
    ph = PhaseSequence((math.pi / 4, 0.0), 1.0, 0.7)
    assert run_protocol(ph, 0.6) == pytest.approx(math.cos(0.6) ** 2, abs=1e-6)


def test_zero_signal_gives_one(rng):
    ph = random_phases(rng, 5, kappa=0.3)
    assert run_protocol(ph, 0.0, N=200) == pytest.approx(1.0, abs=1e-9)


def test_matches_series_over_sweep(rng):
    ph = random_phases(rng, 5, kappa=0.2)
    rs = response_coefficients(build_laurent_recursive(ph), ph.kappa)
    betas = np.linspace(-math.pi / 0.4, math.pi / 0.4, 9)
    simulated = sim.response_curve(ph, betas)
    assert np.max(np.abs(simulated - response_probability(rs, betas))) <= 1e-6


def test_truncation_warning(monkeypatch):
    ph = PhaseSequence((0.3, 0.2), 0.5, 1.0)
    monkeypatch.setattr(sim, "_protocol_probability", lambda phases, beta, n: 0.5 if n == 50 else 0.6)
    with pytest.warns(sim.TruncationWarning):
        run_protocol(ph, 0.1, N=50)


def test_no_warning_when_converged():
    ph = PhaseSequence((0.3, 0.2, -0.4), 0.5, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run_protocol(ph, 0.8, N=100)


def test_branches_trivial():
    down, up = sensing_state_branches(PhaseSequence((0.0,), 1.0, 0.5), N)
    assert down[0] == 1 and np.count_nonzero(down) == 1 and not np.any(up)


def test_branches_norm(rng):
    down, up = sensing_state_branches(random_phases(rng, 7, kappa=0.3), 200)
    assert np.linalg.norm(down) ** 2 + np.linalg.norm(up) ** 2 == pytest.approx(1.0, abs=1e-10)


def test_branches_are_cat_halves():
    kappa = 0.5
    down, up = sensing_state_branches(PhaseSequence((math.pi / 4, 0.0), kappa, 1.0), N)
    a = 1j * kappa / math.sqrt(2)
    assert np.max(np.abs(down - coherent_state(a, N) / math.sqrt(2))) <= 1e-12
    assert np.max(np.abs(up - 1j * coherent_state(-a, N) / math.sqrt(2))) <= 1e-12


def test_cat_phases_shape():
    ph = cat_phases(5, 0.2, 1.0)
    assert ph.angles == (math.pi / 4, 0, 0, 0, 0, 0)


def test_table1_cat_row_is_exact():
    kappa = 0.15 * math.sqrt(2)
    beta_th = math.pi / (4 * kappa)
    rows = table1_probabilities({}, kappa, beta_th, N=200)
    assert rows[0].label == "cat"
    assert rows[0].p_below == pytest.approx(math.cos(math.pi / 8) ** 2, abs=1e-9)
    assert rows[0].p_above == pytest.approx(math.cos(3 * math.pi / 8) ** 2, abs=1e-9)


def test_coherent_state_normalised():
    assert np.linalg.norm(coherent_state(1.5 - 0.5j, 80)) == pytest.approx(1.0, abs=1e-12)
    assert coherent_state(0, 4).tolist() == [1, 0, 0, 0]
