import math

import numpy as np
import pytest

from wkbscatter.coupling import (
    alpha_from_psi,
    cells_for,
    current,
    reflection_transmission,
    solve,
)
from wkbscatter.errors import HypothesisViolation
from wkbscatter.field import CoefficientField, PotentialSegment
from wkbscatter.oracle import TransferMatrixModel, compare_exact, transfer_matrix_solve
from wkbscatter.presets import (
    example1_field,
    example2_field,
    fig1_field,
    linear_two_zone_field,
    step_three_zone_field,
    step_two_zone_field,
)


def test_cells_for_is_robust_to_rounding():
    assert cells_for(0.5, 2**-4) == 8
    assert cells_for(2**-5, 2**-4) == 1
    assert cells_for(0.1, 0.1 / 3) == 3


@pytest.mark.parametrize("factory", [step_two_zone_field, step_three_zone_field])
@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_piecewise_constant_matches_transfer_matrix(factory, eps):
    f = factory()
    sol = solve(f, eps, 2**-6)
    exact = transfer_matrix_solve(TransferMatrixModel.from_field(f), eps)
    e_psi, e_dd = compare_exact(sol, exact.eval)
    assert e_psi <= 1e-9 and e_dd <= 1e-9


@pytest.mark.parametrize(
    "factory,eps,tol",
    [
        (example1_field, 0.1, 1e-6),
        (example1_field, 0.01, 1e-6),
        (example2_field, 0.01, 1e-8),
        (linear_two_zone_field, 0.05, 1e-7),
        (fig1_field, 0.01, 1e-8),
    ],
)
def test_hybrid_matches_shooting_oracle(ivp_oracle, factory, eps, tol):
    f = factory()
    sol = solve(f, eps, 2**-10)
    e_psi, _ = compare_exact(sol, ivp_oracle(f, eps))
    assert e_psi <= tol


@pytest.mark.parametrize("factory", [example1_field, example2_field, linear_two_zone_field, fig1_field])
def test_boundary_condition_and_interface_continuity(factory):
    f = factory()
    sol = solve(f, 0.02, 2**-8)
    assert sol.right_bc_residual() <= 1e-12
    for left, right in zip(sol.zones, sol.zones[1:]):
        assert abs(left.psi[-1] - right.psi[0]) <= 1e-12 * abs(left.psi[-1])
        assert abs(left.eps_dpsi[-1] - right.eps_dpsi[0]) <= 1e-12 * abs(left.eps_dpsi[-1])


@pytest.mark.parametrize("factory", [example1_field, example2_field, linear_two_zone_field])
def test_current_is_nearly_constant(factory):
    f = factory()
    sol = solve(f, 0.01, 2**-9)
    x, j = sol.current_samples()
    j1 = current(sol.eps, *sol.psi_right)
    assert np.max(np.abs(j - j1)) <= 1e-6 * max(abs(j1), 1e-3)


def test_two_zone_total_reflection():
    sol = solve(linear_two_zone_field(), 0.01, 2**-8)
    r, t, res = reflection_transmission(sol)
    assert t is None
    assert abs(abs(r) - 1.0) <= 1e-8
    assert res["right"] <= 1e-12 and res["left"] <= 1e-6


def test_three_zone_flux_balance():
    f = example1_field()
    sol = solve(f, 0.01, 2**-10)
    r, t, _ = reflection_transmission(sol)
    a0, a1 = f.lead_values
    assert abs(r) ** 2 + math.sqrt(a0) / math.sqrt(a1) * abs(t) ** 2 == pytest.approx(1.0, abs=1e-6)
    assert 1e-3 < abs(t) ** 2 < 1.0


def test_scaling_forms_agree():
    f = example2_field()
    sol = solve(f, 0.02, 2**-7)
    z = sol.zones[-1]
    psi1, dpsi1 = z.psi[-1] / z.scale, z.eps_dpsi[-1] / z.scale
    assert alpha_from_psi(psi1, dpsi1, f) == pytest.approx(sol.alpha, rel=1e-12)


def test_solution_independent_of_auxiliary_datum():
    f = example2_field()
    a = solve(f, 0.02, 2**-7, neumann=1.0)
    b = solve(f, 0.02, 2**-7, neumann=-3.5)
    for za, zb in zip(a.zones, b.zones):
        assert np.allclose(za.psi, zb.psi, rtol=1e-11, atol=1e-13)


def test_hypothesis_violation_raised():
    f = CoefficientField(1.0, [PotentialSegment(0, 1, (0.0, 0.0, -100.0))])
    with pytest.raises(HypothesisViolation) as info:
        solve(f, 0.5, 2**-4)
    assert info.value.report.violations
    bad = CoefficientField(1.0, [PotentialSegment(0, 0.5, (0.0,)), PotentialSegment(0.5, 1, (2.0,))])
    with pytest.raises(HypothesisViolation):
        solve(bad, 0.01, 2**-4)


def test_one_zone_has_no_beta_scaling():
    sol = solve(fig1_field(), 0.01, 0.125)
    assert len(sol.zones) == 1 and sol.scaling.beta is None
    assert sol.zones[0].x.size == 9
    with pytest.raises(ValueError):
        sol.zones[0].eval(0.3)
