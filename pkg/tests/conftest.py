"""Shared independent oracles for the test-suite."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp


def ivp_scattering(field, eps, rtol=1e-12, atol=1e-14):
    """Scattering state by adaptive high-order shooting from x = 0.

    The outgoing (or decaying) datum is imposed at x = 0, the ODE
    eps^2 psi'' + a psi = 0 is integrated piece by piece with DOP853 and the
    result is scaled so that the injection condition holds at x = 1.
    Returns ``exact(x) -> (psi, eps psi')`` (right-sided at breakpoints).
    """
    a0, a1 = field.lead_values
    if a0 > 0.0:
        y = np.array([1.0, 0.0, 0.0, -math.sqrt(a0)])
    else:
        y = np.array([1.0, 0.0, math.sqrt(-a0), 0.0])
    pieces = []
    for piece in field.pieces:

        def rhs(x, v, piece=piece):
            a = piece.a(x)
            return np.array([v[2], v[3], -a * v[0], -a * v[1]]) / eps

        sol = solve_ivp(
            rhs, (piece.x_left, piece.x_right), y, method="DOP853",
            rtol=rtol, atol=atol, dense_output=True,
        )
        assert sol.success
        pieces.append(sol.sol)
        y = sol.y[:, -1]
    psi1 = y[0] + 1j * y[1]
    d1 = y[2] + 1j * y[3]
    r1 = math.sqrt(a1)
    c = -2j * r1 / (d1 - 1j * r1 * psi1)
    bps = np.asarray(field.breakpoints)

    def exact(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.clip(np.searchsorted(bps, x, side="right") - 1, 0, len(pieces) - 1)
        psi = np.empty(x.shape, complex)
        dpsi = np.empty(x.shape, complex)
        for i in np.unique(idx):
            m = idx == i
            v = pieces[i](x[m])
            psi[m] = c * (v[0] + 1j * v[1])
            dpsi[m] = c * (v[2] + 1j * v[3])
        return psi, dpsi

    return exact


@pytest.fixture
def ivp_oracle():
    return ivp_scattering
