"""Zone coupling: evanescent FEM and oscillatory marching glued into one solution.

Every layout is solved left to right with an auxiliary normalisation and a
final complex scaling that enforces the injection condition at ``x = 1``:

* two-zone (evanescent, oscillatory): FEM with the decaying Robin datum at
  ``x = 0`` and ``eps chi'(x_d) = 1``, then march from ``A(x_d+) (chi_h(x_d), 1)``;
* three-zone (oscillatory, evanescent, oscillatory): march from the outgoing
  wave ``(1, -i sqrt(a(0)))``, hand ``zeta'/zeta`` at ``x_c`` to the FEM as a
  complex Robin datum, then march the right zone as in the two-zone case;
* one-zone (oscillatory): a single march from the outgoing wave.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import fem
from .errors import DegenerateError, HypothesisViolation
from .field import EVANESCENT, OSCILLATORY, CoefficientField, ZoneLayout, validate
from .marching import OscGrid, from_u, march, to_u


@dataclass
class ZoneResult:
    """Scaled output of one zone: nodal psi and eps*psi' (plus solver payloads)."""

    x_left: float
    x_right: float
    regime: str
    x: np.ndarray
    psi: np.ndarray
    eps_dpsi: np.ndarray
    scale: complex
    march: object = None
    fem_solution: object = None
    fem_system: object = None

    def eval(self, x):
        """Scaled (psi, eps psi') anywhere in an evanescent zone."""
        if self.fem_solution is None:
            raise ValueError("continuum evaluation is only available in evanescent zones")
        chi, dchi = self.fem_solution.eval(x)
        eps = self.fem_system.eps
        return self.scale * chi, self.scale * eps * dchi


@dataclass
class ScalingParams:
    alpha: complex
    beta: complex | None = None


@dataclass
class ScatteringSolution:
    field: CoefficientField
    layout: ZoneLayout
    eps: float
    zones: list
    scaling: ScalingParams
    neumann: float = 1.0
    extras: dict = dc_field(default_factory=dict)

    @property
    def alpha(self):
        return self.scaling.alpha

    def samples(self):
        """(x, psi, eps psi', zone index) over all zone nodes, interfaces duplicated."""
        xs, ps, ds, zs = [], [], [], []
        for i, z in enumerate(self.zones):
            xs.append(z.x)
            ps.append(z.psi)
            ds.append(z.eps_dpsi)
            zs.append(np.full(z.x.size, i))
        return np.concatenate(xs), np.concatenate(ps), np.concatenate(ds), np.concatenate(zs)

    @property
    def psi_right(self):
        z = self.zones[-1]
        return complex(z.psi[-1]), complex(z.eps_dpsi[-1])

    @property
    def psi_left(self):
        z = self.zones[0]
        return complex(z.psi[0]), complex(z.eps_dpsi[0])

    def right_bc_residual(self):
        a1 = self.field.lead_values[1]
        psi, dpsi = self.psi_right
        r1 = math.sqrt(a1)
        return abs(dpsi - 1j * r1 * psi + 2j * r1)

    def current_samples(self, n_ev=1000):
        """(x, j) at every node plus n_ev points in each evanescent zone."""
        xs, js = [], []
        for z in self.zones:
            xs.append(z.x)
            js.append(current(self.eps, z.psi, z.eps_dpsi))
            if z.regime == EVANESCENT and n_ev:
                xe = np.linspace(z.x_left, z.x_right, n_ev)
                p, d = z.eval(xe)
                xs.append(xe)
                js.append(current(self.eps, p, d))
        return np.concatenate(xs), np.concatenate(js)


def current(eps, psi, eps_dpsi):
    """Probability current Im(conj(psi) * eps psi')."""
    return np.imag(np.conj(psi) * eps_dpsi)


def scaling_alpha(U_M, field: CoefficientField, eps):
    """Scaling factor that turns the auxiliary solution into the scattering state."""
    a1 = field.eval_a(1.0, "left")
    da1 = field.eval_da(1.0, "left")
    den = U_M[1] - (1j + 0.25 * eps * a1**-1.5 * da1) * U_M[0]
    if den == 0 or not np.isfinite(den):
        raise DegenerateError("vanishing denominator in the scaling factor")
    return complex(-2j * a1**0.25 / den)


def alpha_from_psi(psi1, eps_dpsi1, field: CoefficientField):
    """Same scaling factor written with (phi(1), eps phi'(1))."""
    r1 = math.sqrt(field.eval_a(1.0, "left"))
    den = eps_dpsi1 - 1j * r1 * psi1
    if den == 0:
        raise DegenerateError("vanishing denominator in the scaling factor")
    return complex(-2j * r1 / den)


def reflection_transmission(sol: ScatteringSolution):
    """Lead amplitudes r = psi(1) - 1 and (left lead oscillatory) t = psi(0).

    Returns ``(r, t, residuals)``; residuals measure how well the lead plane
    wave forms hold at both ends.
    """
    a0, a1 = sol.field.lead_values
    psi1, dpsi1 = sol.psi_right
    r = psi1 - 1.0
    res = {"right": abs(dpsi1 - 1j * math.sqrt(a1) * (r - 1.0))}
    t = None
    psi0, dpsi0 = sol.psi_left
    if a0 > 0.0:
        t = psi0
        res["left"] = abs(dpsi0 + 1j * math.sqrt(a0) * psi0)
    else:
        res["left"] = abs(dpsi0 - math.sqrt(-a0) * psi0)
    return r, t, res


def _osc_zone(field, grid, res, scale, eps):
    psi, dpsi = from_u_many(field, grid, res.U, eps)
    return ZoneResult(
        grid.x[0], grid.x[-1], OSCILLATORY, grid.x, scale * psi, scale * dpsi, scale, march=res
    )


def from_u_many(field, grid, U, eps):
    """Vectorised inverse transform on the nodes of an oscillatory grid."""
    piece = grid.piece
    a = piece.a(grid.x)
    da = piece.da(grid.x)
    psi = a**-0.25 * U[:, 0]
    return psi, a**0.25 * U[:, 1] - 0.25 * eps * a**-1.25 * da * U[:, 0]


def _fem_zone(field, mesh, eps, rho, neumann):
    basis = fem.build_basis(field, mesh, eps)
    system = fem.assemble(field, mesh, basis, eps, rho, neumann)
    sol = fem.solve_bvp(system)
    return system, sol


def _fem_result(mesh, system, sol, scale, eps, neumann):
    chi, dchi = sol.eval(mesh.nodes)
    eps_dchi = eps * np.asarray(dchi, dtype=complex)
    # end fluxes are the boundary data the Galerkin system imposes weakly
    eps_dchi[0] = eps * system.rho * sol.z[0]
    eps_dchi[-1] = neumann
    return ZoneResult(
        mesh.nodes[0],
        mesh.nodes[-1],
        EVANESCENT,
        mesh.nodes,
        scale * np.asarray(sol.z, dtype=complex),
        scale * eps_dchi,
        scale,
        fem_solution=sol,
        fem_system=system,
    )


def solve_one_zone(field, layout, eps, grid_os):
    a0 = field.lead_values[0]
    U0 = to_u(field, 0.0, "right", 1.0, -1j * math.sqrt(a0), eps)
    res = march(field, grid_os, eps, U0)
    alpha = scaling_alpha(res.final, field, eps)
    zone = _osc_zone(field, grid_os, res, alpha, eps)
    return ScatteringSolution(field, layout, eps, [zone], ScalingParams(alpha))


def solve_two_zone(field, layout, eps, mesh_ev, grid_os, neumann=1.0):
    a0 = field.lead_values[0]
    rho = math.sqrt(-a0) / eps
    system, sol = _fem_zone(field, mesh_ev, eps, rho, neumann)
    x_d = mesh_ev.nodes[-1]
    U_N = to_u(field, x_d, "right", sol.z[-1], neumann, eps)
    res = march(field, grid_os, eps, U_N)
    alpha = scaling_alpha(res.final, field, eps)
    zones = [
        _fem_result(mesh_ev, system, sol, alpha, eps, neumann),
        _osc_zone(field, grid_os, res, alpha, eps),
    ]
    return ScatteringSolution(field, layout, eps, zones, ScalingParams(alpha), neumann)


def solve_three_zone(field, layout, eps, grid_os1, mesh_ev, grid_os2, neumann=1.0):
    a0 = field.lead_values[0]
    U0 = to_u(field, 0.0, "right", 1.0, -1j * math.sqrt(a0), eps)
    res1 = march(field, grid_os1, eps, U0)
    x_c = grid_os1.x[-1]
    zeta, eps_dzeta = from_u(field, x_c, "left", res1.final, eps)
    if abs(zeta) < 1e-300:
        raise DegenerateError(f"zeta(x_c) = {zeta!r} vanishes at the interface")
    rho_c = complex(eps_dzeta / zeta) / eps
    system, sol = _fem_zone(field, mesh_ev, eps, rho_c, neumann)
    x_d = mesh_ev.nodes[-1]
    U_N = to_u(field, x_d, "right", sol.z[-1], neumann, eps)
    res2 = march(field, grid_os2, eps, U_N)
    alpha = scaling_alpha(res2.final, field, eps)
    beta = alpha * sol.z[0] / zeta
    zones = [
        _osc_zone(field, grid_os1, res1, beta, eps),
        _fem_result(mesh_ev, system, sol, alpha, eps, neumann),
        _osc_zone(field, grid_os2, res2, alpha, eps),
    ]
    out = ScatteringSolution(field, layout, eps, zones, ScalingParams(alpha, complex(beta)), neumann)
    out.extras["rho_c"] = rho_c
    return out


def cells_for(length, h):
    """Uniform cell count for a zone: ceil(length / h), robust to rounding."""
    return max(1, int(math.ceil(length / h - 1e-9)))


def build_grids(field, layout, eps, h):
    """Uniform per-zone meshes/grids derived from a single target width h."""
    out = []
    for z in layout.zones:
        n = cells_for(z.length, h)
        if z.regime == EVANESCENT:
            out.append(fem.EvanescentMesh.uniform(z.x_left, z.x_right, n))
        else:
            out.append(OscGrid.uniform(field, z.x_left, z.x_right, n, eps))
    return out


def solve(field, eps, h, layout=None, neumann=1.0, check=True):
    """Validate, build uniform grids from h and run the matching layout solver."""
    layout = layout or ZoneLayout.from_field(field)
    if check:
        rep = validate(field, layout, eps)
        if not rep.passed:
            raise HypothesisViolation(rep)
    parts = build_grids(field, layout, eps, h)
    kind = layout.kind
    if kind == "one-zone":
        return solve_one_zone(field, layout, eps, *parts)
    if kind == "two-zone":
        return solve_two_zone(field, layout, eps, *parts, neumann=neumann)
    if kind == "three-zone":
        return solve_three_zone(field, layout, eps, *parts, neumann=neumann)
    raise HypothesisViolation(validate(field, layout, eps))
