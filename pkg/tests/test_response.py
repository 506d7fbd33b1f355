import math

import numpy as np
import pytest

from qspi.errors import InvariantViolation
from qspi.laurent import LaurentPair, PhaseSequence, build_laurent_direct, build_laurent_recursive
from qspi.response import (
    ResponseSpectrum,
    elementary_weights,
    lower_right_diagnostic,
    response_by_quadrature,
    response_coefficients,
    response_coefficients_bruteforce,
    response_probability,
)

from conftest import random_phases


def spectrum(theta, kappa=0.5):
    ph = PhaseSequence(tuple(theta), kappa, math.pi / (4 * kappa))
    return build_laurent_recursive(ph), response_coefficients(build_laurent_recursive(ph), kappa)


@pytest.mark.parametrize("kappa", [1e-3, 0.4, 1.3])
def test_degree_one_closed_form(kappa):
    t0 = 0.37
    _, rs = spectrum((t0, -0.8), kappa)
    c, s = math.cos(t0), math.sin(t0)
    assert rs.coefficient(0) == pytest.approx(c**4 + s**4, abs=1e-12)
    assert rs.coefficient(1) == pytest.approx(c**2 * s**2, abs=1e-12)
    assert rs.coefficient(-1) == pytest.approx(c**2 * s**2, abs=1e-12)


def test_identity_protocol():
    _, rs = spectrum((0.0,))
    assert rs.c.tolist() == [1.0]


def test_against_four_index_sum(rng):
    ph = random_phases(rng, 3, kappa=0.7)
    lp = build_laurent_direct(ph)
    brute = response_coefficients_bruteforce(lp, 0.7)
    assert np.max(np.abs(brute.imag)) <= 1e-12
    assert np.max(np.abs(response_coefficients(lp, 0.7).c - brute.real)) <= 1e-12


@pytest.mark.parametrize("d", [0, 2, 5, 8])
def test_against_four_index_sum_other_degrees(rng, d):
    kappa = float(rng.uniform(0.05, 1.5))
    lp = build_laurent_recursive(random_phases(rng, d, kappa))
    assert np.allclose(response_coefficients(lp, kappa).c, response_coefficients_bruteforce(lp, kappa).real, atol=1e-12)


def test_spectrum_invariants(rng):
    for _ in range(100):
        ph = random_phases(rng, int(rng.integers(0, 11)), kappa=float(rng.uniform(0.01, 1.5)))
        c = response_coefficients(build_laurent_recursive(ph), ph.kappa).c
        assert np.max(np.abs(c - c[::-1])) <= 1e-10
        assert abs(c.sum() - 1) <= 1e-10


def test_broken_spectrum_is_rejected():
    lp = LaurentPair(0, [0.5], [0.0])  # not unitary
    with pytest.raises(InvariantViolation):
        response_coefficients(lp, 1.0)


def test_cat_response_is_cos_squared():
    _, rs = spectrum((math.pi / 4, 0.3), 0.8)
    betas = np.linspace(-3, 3, 41)
    assert np.allclose(response_probability(rs, betas), np.cos(0.8 * betas) ** 2, atol=1e-12)


def test_zero_signal_periodic_and_even(rng):
    ph = random_phases(rng, 6, kappa=0.35)
    rs = response_coefficients(build_laurent_recursive(ph), ph.kappa)
    assert response_probability(rs, 0.0) == pytest.approx(1.0, abs=1e-12)
    for beta in rng.uniform(-4, 4, 10):
        p = response_probability(rs, beta)
        assert abs(p - response_probability(rs, beta + math.pi / ph.kappa)) <= 1e-12
        assert p == response_probability(rs, -beta)


def test_probability_out_of_range_is_rejected():
    rs = ResponseSpectrum(1, 1.0, np.array([0.6, -0.2, 0.6]))
    with pytest.raises(InvariantViolation):
        response_probability(rs, math.pi / 2)


def test_quadrature_trivial():
    lp = LaurentPair(0, [1.0], [0.0])
    assert response_by_quadrature(lp, 0.9, 1.7) == pytest.approx(1.0, abs=1e-12)


def test_quadrature_cat_half():
    lp, _ = spectrum((math.pi / 4, 0.0), 1.0)
    assert response_by_quadrature(lp, 1.0, math.pi / 4) == pytest.approx(0.5, abs=1e-9)


def test_quadrature_matches_series_degree_five(rng):
    ph = random_phases(rng, 5, kappa=1 / 8)
    lp = build_laurent_recursive(ph)
    rs = response_coefficients(lp, ph.kappa)
    assert abs(response_by_quadrature(lp, ph.kappa, 2.0) - response_probability(rs, 2.0)) <= 1e-8


def test_series_quadrature_triangle(rng):
    for _ in range(50):
        kappa = float(rng.uniform(0.01, 1.5))
        ph = random_phases(rng, int(rng.integers(0, 9)), kappa)
        lp = build_laurent_recursive(ph)
        beta = float(rng.uniform(-math.pi / (2 * kappa), math.pi / (2 * kappa)))
        series = response_probability(response_coefficients(lp, kappa), beta)
        assert abs(series - response_by_quadrature(lp, kappa, beta)) <= 1e-8


def test_small_kappa_limit(rng):
    ph = random_phases(rng, 6, kappa=1e-4)
    lp = build_laurent_recursive(ph)
    small = response_coefficients(lp, 1e-4).c
    # kappa = 0 limit: every decay factor is one
    f, h = lp.f, lp.g_reflected()
    d = lp.degree
    K = np.outer(f, f) + np.outer(h, h)
    limit = np.zeros(2 * d + 1)
    for s in range(-d, d + 1):
        for r in range(-d, d + 1):
            for n in range(-d, d + 1):
                for n2 in range(-d, d + 1):
                    a, b = n + 2 * s, n2 + 2 * r
                    if abs(a) <= d and abs(b) <= d:
                        limit[s + d] += K[n + d, n2 + d] * K[a + d, b + d]
    assert np.max(np.abs(small - limit)) <= 1e-6


def test_weights_identity_block():
    w = elementary_weights(LaurentPair(0, [1.0], [0.0]))
    assert np.allclose(w.block(0, 0), np.eye(2))


@pytest.mark.parametrize("theta", [0.2, 1.0, -2.2])
def test_weights_degree_zero_upper_left(theta):
    lp = build_laurent_direct(PhaseSequence((theta,), 1.0, 0.5))
    assert elementary_weights(lp).block(0, 0)[0, 0] == pytest.approx(1.0)


def test_weights_upper_left_sum_degree_one():
    lp = build_laurent_direct(PhaseSequence((math.pi / 4, 0.0), 1.0, 0.5))
    assert elementary_weights(lp).blocks[:, :, 0, 0].sum() == pytest.approx(1.0)


def test_lower_right_variants(rng):
    lp = build_laurent_recursive(random_phases(rng, 4))
    diag = lower_right_diagnostic(lp)
    assert diag["sum"] <= 1e-12
    assert diag["product"] > 1e-2
    with pytest.raises(ValueError):
        elementary_weights(lp, lower_right="other")
