import json
import math

import numpy as np
import pytest

from qspi.laurent import PhaseSequence
from qspi.simulator import coherent_state, sensing_state_branches
from qspi.wigner import (
    WignerGrid,
    branch_csv,
    expected_fringe_frequency,
    fock1_wigner,
    fringe_frequency,
    grid_csv,
    parity_kernel,
    symlog_metadata,
    vacuum_wigner,
    wigner,
    wigner_values,
)

XS = np.linspace(-3, 3, 13)


def test_vacuum_closed_form():
    psi = np.zeros(10, complex)
    psi[0] = 1
    w = wigner_values(psi, XS, XS)
    X, P = np.meshgrid(XS, XS)
    assert np.max(np.abs(w - vacuum_wigner(X, P))) <= 1e-12
    assert w[6, 6] == pytest.approx(1 / math.pi, abs=1e-15)


def test_fock1_closed_form():
    psi = np.zeros(10, complex)
    psi[1] = 1
    w = wigner_values(psi, XS, XS)
    X, P = np.meshgrid(XS, XS)
    assert np.max(np.abs(w - fock1_wigner(X, P))) <= 1e-12
    assert w[6, 6] == pytest.approx(-1 / math.pi, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.8, 1.2 - 0.7j, 2.5j])
def test_coherent_state_is_shifted_vacuum(alpha):
    w = wigner_values(coherent_state(alpha, 80), XS, XS)
    X, P = np.meshgrid(XS, XS)
    a = complex(alpha)
    x0, p0 = math.sqrt(2) * a.real, math.sqrt(2) * a.imag
    assert np.max(np.abs(w - vacuum_wigner(X - x0, P - p0))) <= 1e-10


def test_kernel_rejects_lower_half():
    with pytest.raises(ValueError):
        parity_kernel(1, 2, np.array([0.1]))


def test_kernel_finite_at_origin():
    assert np.all(np.isfinite(parity_kernel(3, 1, np.array([0.0, 0.3j]))))


@pytest.mark.parametrize("units", ["quadrature", "alpha"])
def test_integral_is_norm(units):
    psi = coherent_state(0.6 + 0.3j, 60) + coherent_state(-0.6 - 0.3j, 60)
    psi /= np.linalg.norm(psi)
    lim = 6.0 if units == "quadrature" else 6 / math.sqrt(2)
    grid = wigner(psi, -lim, lim, -lim, lim, step=0.1, units=units)
    assert grid.integral() == pytest.approx(1.0, rel=1e-2)


def test_cat_fringe_frequency():
    degree, kappa = 5, 0.4
    ph = PhaseSequence((math.pi / 4,) + (0.0,) * degree, kappa, 1.0)
    down, up = sensing_state_branches(ph, 200)
    psi = down + up  # both branches superposed in the x-p plane
    for units in ("quadrature", "alpha"):
        f = fringe_frequency(psi, units=units, half_width=2.0 if units == "alpha" else 3.0)
        assert f == pytest.approx(expected_fringe_frequency(degree, kappa, units), rel=0.05)


def test_fringe_needs_fringes():
    psi = np.zeros(5, complex)
    psi[0] = 1
    with pytest.raises(ValueError):
        fringe_frequency(psi)


def test_grid_validation():
    with pytest.raises(ValueError):
        WignerGrid(0, 1, 0, 1, step=0)
    with pytest.raises(ValueError):
        WignerGrid(1, 0, 0, 1)
    with pytest.raises(ValueError):
        WignerGrid(0, 1, 0, 1, units="furlongs")


def test_grid_csv_layout():
    psi = np.array([1, 0], complex)
    grid = wigner(psi, -0.2, 0.2, 0, 0.2, step=0.2)
    rows = grid_csv(grid).splitlines()
    assert rows[0] == "x,p,w"
    assert len(rows) == 1 + 3 * 2
    x, p, w = map(float, rows[1].split(","))
    assert (x, p) == (-0.2, 0.0) and w == pytest.approx(vacuum_wigner(-0.2, 0.0), rel=1e-12)


def test_branch_csv():
    text = branch_csv(np.array([1, 1j]))
    assert text.splitlines()[0] == "n,re,im"
    n, re, im = text.splitlines()[2].split(",")
    assert (int(n), float(re), float(im)) == (1, 0.0, 1.0)


def test_symlog_metadata():
    grid = wigner(np.array([0, 1], complex), -1, 1, -1, 1, step=0.5, units="alpha")
    meta = symlog_metadata(grid)
    json.dumps(meta)
    assert meta["x_axis"] == "Re alpha"
    assert meta["colour_scale"]["type"] == "symlog"
    assert meta["colour_scale"]["vmax"] == pytest.approx(np.max(np.abs(grid.values)))
