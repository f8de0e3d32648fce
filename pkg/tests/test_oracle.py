import math

import numpy as np
import pytest

from wkbscatter.coupling import solve
from wkbscatter.field import ZoneLayout
from wkbscatter.oracle import (
    ErrorReport,
    TransferMatrixModel,
    compare,
    fine_grid_reference,
    slope_fit,
    transfer_matrix_solve,
)
from wkbscatter.presets import example2_field, step_three_zone_field, step_two_zone_field


def test_model_validation():
    with pytest.raises(ValueError):
        TransferMatrixModel((0.0, 1.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        TransferMatrixModel((0.0, 0.5, 1.0), (1.0, 0.0))
    with pytest.raises(ValueError):
        TransferMatrixModel((0.0, 1.0), (-1.0,))
    with pytest.raises(ValueError):
        TransferMatrixModel.from_field(example2_field())


@pytest.mark.parametrize("factory", [step_two_zone_field, step_three_zone_field])
@pytest.mark.parametrize("eps", [0.1, 0.003])
def test_transfer_matrix_solution_solves_the_problem(factory, eps):
    f = factory()
    model = TransferMatrixModel.from_field(f)
    sol = transfer_matrix_solve(model, eps)
    a0, a1 = model.a_values[0], model.a_values[-1]
    (p0,), (d0,) = sol.eval(0.0)
    (p1,), (d1,) = sol.eval(1.0)
    assert abs(d1 - 1j * math.sqrt(a1) * p1 + 2j * math.sqrt(a1)) <= 1e-12
    if a0 > 0:
        assert abs(d0 + 1j * math.sqrt(a0) * p0) <= 1e-12 * max(1.0, abs(p0))
    else:
        assert abs(d0 - math.sqrt(-a0) * p0) <= 1e-12 * max(1e-300, abs(d0))
    for xb in model.breakpoints[1:-1]:
        pl, dl = sol.eval(np.nextafter(xb, 0.0))
        pr, dr = sol.eval(xb)
        assert abs(pl[0] - pr[0]) <= 1e-10 * abs(pr[0]) + 1e-300
        assert abs(dl[0] - dr[0]) <= 1e-10 * abs(dr[0]) + 1e-300


def test_transfer_matrix_matches_shooting(ivp_oracle):
    f = step_three_zone_field()
    eps = 0.02
    ex = ivp_oracle(f, eps)
    tm = transfer_matrix_solve(TransferMatrixModel.from_field(f), eps)
    x = np.linspace(0.0, 1.0, 301)
    assert np.max(np.abs(ex(x)[0] - tm.eval(x)[0])) <= 1e-9


def test_reference_guards():
    f = example2_field()
    lay = ZoneLayout.from_field(f)
    with pytest.raises(ValueError):
        fine_grid_reference(f, lay, 0.1, 3 * 2**14)
    with pytest.raises(ValueError):
        fine_grid_reference(f, lay, 0.1, 2**10)
    with pytest.raises(MemoryError):
        fine_grid_reference(f, lay, 0.1, 2**23)


def test_compare_identical_is_zero_and_counts_skipped_nodes():
    f = example2_field()
    a = solve(f, 0.05, 2**-6)
    rep = compare(a, a)
    assert rep.err_psi_inf == 0.0 and rep.err_eps_dpsi_inf == 0.0
    assert rep.extras["skipped_nodes"] == 0
    ref = solve(f, 0.05, 2**-9)
    rep = compare(a, ref)
    assert rep.extras["skipped_nodes"] == 0
    assert rep.err_psi_inf >= rep.err_psi_node_inf > 0.0
    assert rep.h == 2**-6
    # 3 cells on [0, 0.5] do not nest in a power-of-two mesh, so some nodes are skipped
    b = solve(f, 0.05, 0.2)
    rep = compare(b, ref)
    assert rep.extras["skipped_nodes"] > 0


def test_slope_fit_recovers_power_law():
    reps = [ErrorReport(0.1, h, 3.0 * h**1.5, 0.0, 0.0) for h in (2**-4, 2**-5, 2**-6, 2**-7)]
    fit = slope_fit(reps)
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert float(fit) == fit.slope
    assert math.isnan(slope_fit(reps[:2]).slope)
    reps[0].err_psi_inf = 0.0
    assert math.isnan(slope_fit(reps).slope)


def test_error_report_row_order():
    r = ErrorReport(0.1, 0.5, 1.0, 2.0, 3.0)
    assert r.row()[:5] == [0.1, 0.5, 1.0, 2.0, 3.0]
    assert len(r.row()) == len(ErrorReport.FIELDS)
