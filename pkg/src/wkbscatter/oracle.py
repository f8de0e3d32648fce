"""Independent references and error metrics.

``transfer_matrix_solve`` gives the exact scattering state for piecewise-constant
``a``; ``fine_grid_reference`` re-runs the hybrid scheme on a fine uniform grid;
``compare`` and ``slope_fit`` turn solution pairs into error tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .coupling import ScatteringSolution, solve
from .errors import DomainError
from .field import EVANESCENT, CoefficientField

MAX_REF_NODES = 2**22


@dataclass(frozen=True)
class TransferMatrixModel:
    """Piecewise-constant a on breakpoints[0] = 0 < ... < breakpoints[-1] = 1."""

    breakpoints: tuple
    a_values: tuple

    def __post_init__(self):
        if len(self.breakpoints) != len(self.a_values) + 1:
            raise ValueError("need one a-value per piece")
        if any(a == 0.0 for a in self.a_values):
            raise ValueError("a = 0 on a piece (turning value) is not supported")
        if not self.a_values[-1] > 0.0:
            raise ValueError("a(1) must be positive")

    @classmethod
    def from_field(cls, field: CoefficientField):
        vals = []
        for piece in field.pieces:
            if piece.p1 != 0.0 or piece.p2 != 0.0:
                raise ValueError("transfer-matrix oracle needs a piecewise-constant potential")
            vals.append(float(piece.a_coeffs[0]))
        return cls(tuple(field.breakpoints), tuple(vals))

    def propagator(self, j, length, eps):
        """Scaled 2x2 map of (psi, eps psi') across ``length`` of piece j.

        Returns ``(M, log_scale)`` with the true matrix equal to ``exp(log_scale) M``.
        """
        a = self.a_values[j]
        if a > 0.0:
            ra = math.sqrt(a)
            th = ra * length / eps
            c, s = math.cos(th), math.sin(th)
            return np.array([[c, s / ra], [-ra * s, c]]), 0.0
        ra = math.sqrt(-a)
        k = ra * length / eps
        em = math.exp(-2.0 * k)
        ch = 0.5 * (1.0 + em)
        sh = -0.5 * math.expm1(-2.0 * k)
        return np.array([[ch, sh / ra], [ra * sh, ch]]), k


@dataclass
class TransferMatrixSolution:
    model: TransferMatrixModel
    eps: float
    starts: list  # per piece: (normalised state, log amplitude) at piece start
    coeff: complex  # scale applied to exp(log) * state
    log_ref: float

    def eval(self, x):
        """Exact (psi, eps psi') at x (right-sided at breakpoints)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise DomainError("x outside [0, 1]")
        b = np.asarray(self.model.breakpoints)
        idx = np.clip(np.searchsorted(b, x, side="right") - 1, 0, len(self.starts) - 1)
        psi = np.empty(x.shape, dtype=complex)
        dpsi = np.empty(x.shape, dtype=complex)
        for k, xv in enumerate(x):
            j = idx[k]
            y, lg = self.starts[j]
            M, ls = self.model.propagator(j, xv - b[j], self.eps)
            v = (M @ y) * (self.coeff * math.exp(lg + ls - self.log_ref))
            psi[k], dpsi[k] = v
        return psi, dpsi


def transfer_matrix_solve(model: TransferMatrixModel, eps, layout=None):
    """Exact scattering state for a piecewise-constant coefficient."""
    a0, a1 = model.a_values[0], model.a_values[-1]
    if a0 > 0.0:
        y = np.array([1.0, -1j * math.sqrt(a0)])
    else:
        y = np.array([1.0, math.sqrt(-a0)], dtype=complex)
    lg = 0.0
    starts = []
    b = model.breakpoints
    for j in range(len(model.a_values)):
        nrm = np.linalg.norm(y)
        y, lg = y / nrm, lg + math.log(nrm)
        starts.append((y, lg))
        M, ls = model.propagator(j, b[j + 1] - b[j], eps)
        y, lg = M @ y, lg + ls
    r1 = math.sqrt(a1)
    coeff = -2j * r1 / (y[1] - 1j * r1 * y[0])
    return TransferMatrixSolution(model, float(eps), starts, complex(coeff), lg)


def fine_grid_reference(field, layout, eps, N_ref=2**18) -> ScatteringSolution:
    """Self-reference: the hybrid scheme on a uniform grid of width 1/N_ref."""
    N_ref = int(N_ref)
    if N_ref < 2**14 or N_ref & (N_ref - 1):
        raise ValueError("N_ref must be a power of two >= 2**14")
    if N_ref > MAX_REF_NODES:
        raise MemoryError(f"N_ref={N_ref} exceeds the guard of {MAX_REF_NODES} nodes")
    return solve(field, eps, 1.0 / N_ref, layout=layout)


@dataclass
class ErrorReport:
    eps: float
    h: float
    err_psi_inf: float
    err_eps_dpsi_inf: float
    err_psi_l2: float
    err_psi_node_inf: float = float("nan")
    err_eps_dpsi_node_inf: float = float("nan")
    incremental_err: float = float("nan")
    slope: float = float("nan")
    slope_dpsi: float = float("nan")
    extras: dict = dc_field(default_factory=dict)

    FIELDS = (
        "eps",
        "h",
        "err_psi_inf",
        "err_eps_dpsi_inf",
        "err_psi_l2",
        "err_psi_node_inf",
        "err_eps_dpsi_node_inf",
        "incremental_err",
        "slope",
        "slope_dpsi",
    )

    def row(self):
        return [getattr(self, f) for f in self.FIELDS]


def _lookup(ref_x, x, tol=1e-12):
    """(indices into x, indices into ref_x) of the nodes the two grids share."""
    idx = np.clip(np.searchsorted(ref_x, x), 0, ref_x.size - 1)
    left = np.clip(idx - 1, 0, ref_x.size - 1)
    pick = np.where(np.abs(ref_x[left] - x) < np.abs(ref_x[idx] - x), left, idx)
    ok = np.abs(ref_x[pick] - x) <= tol
    if not np.any(ok):
        raise ValueError("the two grids share no nodes")
    return np.flatnonzero(ok), pick[ok]


def compare(sol_h: ScatteringSolution, reference: ScatteringSolution, eval_points=1000):
    """Max/RMS differences of psi and eps psi' between a solve and a reference.

    ``err_*_inf`` are maxima over the coarse node set of every zone plus
    ``eval_points`` uniformly spaced points per evanescent zone, where both
    solutions are evaluated as continua. ``err_*_node_inf`` use the nodes
    only. Reference values at nodes are looked up at the same abscissae;
    coarse nodes absent from the reference grid (non-nested zone widths) are
    skipped and counted in ``extras["skipped_nodes"]``.
    """
    if len(sol_h.zones) != len(reference.zones):
        raise ValueError("solutions cover different layouts")
    dpsi_all, dd_all = [], []
    sample_psi, sample_dd = [0.0], [0.0]
    skipped = 0
    for zc, zr in zip(sol_h.zones, reference.zones):
        own, pick = _lookup(zr.x, zc.x)
        skipped += zc.x.size - own.size
        dpsi_all.append(np.abs(zc.psi[own] - zr.psi[pick]))
        dd_all.append(np.abs(zc.eps_dpsi[own] - zr.eps_dpsi[pick]))
        if zc.regime == EVANESCENT and eval_points:
            xe = np.linspace(zc.x_left, zc.x_right, eval_points)
            pc, dc = zc.eval(xe)
            pr, dr = zr.eval(xe)
            sample_psi.append(np.max(np.abs(pc - pr)))
            sample_dd.append(np.max(np.abs(dc - dr)))
    dpsi_all = np.concatenate(dpsi_all)
    dd_all = np.concatenate(dd_all)
    e_psi = float(np.max(dpsi_all))
    e_dd = float(np.max(dd_all))
    return ErrorReport(
        eps=sol_h.eps,
        h=_mesh_width(sol_h),
        err_psi_inf=max(e_psi, float(np.max(sample_psi))),
        err_eps_dpsi_inf=max(e_dd, float(np.max(sample_dd))),
        err_psi_l2=float(np.sqrt(np.mean(dpsi_all**2))),
        err_psi_node_inf=e_psi,
        err_eps_dpsi_node_inf=e_dd,
        extras={"skipped_nodes": skipped},
    )


def _mesh_width(sol):
    return float(max(np.max(np.diff(z.x)) for z in sol.zones))


def compare_exact(sol_h: ScatteringSolution, exact, eval_points=1000):
    """Errors against an exact evaluator ``exact(x) -> (psi, eps psi')``."""
    e_psi, e_dd = 0.0, 0.0
    for z in sol_h.zones:
        p, d = exact(z.x)
        # one-sided exact values are continuous; interface nodes need no special care
        e_psi = max(e_psi, float(np.max(np.abs(z.psi - p))))
        e_dd = max(e_dd, float(np.max(np.abs(z.eps_dpsi - d))))
        if z.regime == EVANESCENT and eval_points:
            xe = np.linspace(z.x_left, z.x_right, eval_points)
            pc, dc = z.eval(xe)
            pe, de = exact(xe)
            e_psi = max(e_psi, float(np.max(np.abs(pc - pe))))
            e_dd = max(e_dd, float(np.max(np.abs(dc - de))))
    return e_psi, e_dd


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float

    def __float__(self):
        return self.slope


def slope_fit(reports, attr="err_psi_inf"):
    """Least-squares slope of log(error) against log(h).

    Returns a SlopeFit; ``slope`` is NaN when the data cannot define a slope
    (fewer than three distinct h, or a zero/non-finite error).
    """
    hs = np.array([r.h for r in reports], dtype=float)
    es = np.array([getattr(r, attr) for r in reports], dtype=float)
    if len(reports) < 3 or np.unique(hs).size < 3:
        return SlopeFit(math.nan, math.nan, math.nan)
    if np.any(es <= 0.0) or not np.all(np.isfinite(es)):
        return SlopeFit(math.nan, math.nan, math.nan)
    X = np.log(hs)
    Y = np.log(es)
    (k, c), res, *_ = np.linalg.lstsq(np.column_stack([X, np.ones_like(X)]), Y, rcond=None)
    resid = float(np.sqrt(res[0] / len(X))) if res.size else 0.0
    return SlopeFit(float(k), float(c), resid)
