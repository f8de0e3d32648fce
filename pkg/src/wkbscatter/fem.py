"""WKB finite elements for evanescent zones.

On each cell ``[x_n, x_{n+1}]`` the two local shape functions are
first-order evanescent WKB solutions,

    w_n = sinh(gamma_n - sigma_n(x)) / sinh(gamma_n) * (|a(x_n)| / |a(x)|)^{1/4}
    v_n = sinh(sigma_n(x)) / sinh(gamma_n) * (|a(x_{n+1})| / |a(x)|)^{1/4}

with ``sigma_n(x) = (1/eps) int_{x_n}^x sqrt|a|`` and ``gamma_n = sigma_n(x_{n+1})``.
Hyperbolic ratios are evaluated in shifted exponential form, so nothing
overflows however large ``gamma_n`` becomes.

The global problem is

    eps^2 int chi' theta' + int |a| chi theta + eps^2 rho chi(x_l) theta(x_l)
        = eps * neumann * theta(x_r)

whose solution satisfies ``chi'(x_l) = rho chi(x_l)`` and ``eps chi'(x_r) = neumann``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .errors import AssemblyError, DomainError, SolverError
from .field import EVANESCENT, CoefficientField

# graded quadrature breakpoints, in units of the local decay length
_GRADING = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0])
_GL_T, _GL_W = np.polynomial.legendre.leggauss(10)


def sinh_ratio(t, gamma):
    """sinh(t) / sinh(gamma) for 0 <= t <= gamma, without overflow."""
    return np.exp(t - gamma) * np.expm1(-2.0 * t) / np.expm1(-2.0 * gamma)


def cosh_ratio(t, gamma):
    """cosh(t) / sinh(gamma) for 0 <= t <= gamma, without overflow."""
    return np.exp(t - gamma) * (1.0 + np.exp(-2.0 * t)) / -np.expm1(-2.0 * gamma)


@dataclass(frozen=True)
class EvanescentMesh:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("an evanescent mesh needs at least two nodes")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, x_left, x_right, ncells):
        nodes = np.linspace(x_left, x_right, int(ncells) + 1)
        nodes[0], nodes[-1] = x_left, x_right
        return cls(nodes)

    @property
    def h(self):
        return float(np.max(np.diff(self.nodes)))

    @property
    def size(self):
        return self.nodes.size


class WkbHatBasis:
    """Per-cell data and evaluators for the WKB hat functions."""

    def __init__(self, field: CoefficientField, mesh: EvanescentMesh, eps: float):
        x = mesh.nodes
        piece = field._piece_for_interval(x[0], x[-1])
        if piece.regime != EVANESCENT:
            raise DomainError("WKB-FEM basis requires an evanescent zone")
        self.field = field
        self.mesh = mesh
        self.eps = float(eps)
        self.piece = piece
        self.p_nodes = piece.p(x)
        self.dp_nodes = piece.dp(x)
        self.gamma = piece.sqrt_integral(x[:-1], x[1:]) / self.eps
        self.r_zero = piece.p1 == 0.0 and piece.p2 == 0.0

    @property
    def ncells(self):
        return self.gamma.size

    def cell_of(self, x):
        """Index of the cell containing x (right-sided at interior nodes)."""
        nodes = self.mesh.nodes
        x = np.asarray(x, dtype=float)
        tol = 1e-12 * max(1.0, abs(nodes[-1]))
        if np.any(x < nodes[0] - tol) or np.any(x > nodes[-1] + tol):
            raise DomainError("evaluation point outside the evanescent zone")
        return np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, self.ncells - 1)

    def local(self, n, x):
        """(w, w', v, v') of cell(s) n at x; n and x broadcast together."""
        nodes = self.mesh.nodes
        xl, xr = nodes[n], nodes[n + 1]
        x = np.clip(x, xl, xr)
        gamma = self.gamma[n]
        piece = self.piece
        s = np.clip(piece.sqrt_integral(xl, x) / self.eps, 0.0, gamma)
        sr = np.clip(piece.sqrt_integral(x, xr) / self.eps, 0.0, gamma)
        p = piece.p(x)
        dlog = -0.25 * piece.dp(x) / p
        root = np.sqrt(p) / self.eps
        qn = (self.p_nodes[n] / p) ** 0.25
        qm = (self.p_nodes[n + 1] / p) ** 0.25
        alpha = sinh_ratio(sr, gamma)
        beta = sinh_ratio(s, gamma)
        dalpha = -cosh_ratio(sr, gamma) * root
        dbeta = cosh_ratio(s, gamma) * root
        w = alpha * qn
        v = beta * qm
        return w, (dalpha + alpha * dlog) * qn, v, (dbeta + beta * dlog) * qm

    def alpha_beta(self, n, x):
        """The bare ratios (alpha_n(x), beta_n(x)) on cell n."""
        nodes = self.mesh.nodes
        gamma = self.gamma[n]
        s = np.clip(self.piece.sqrt_integral(nodes[n], x) / self.eps, 0.0, gamma)
        sr = np.clip(self.piece.sqrt_integral(x, nodes[n + 1]) / self.eps, 0.0, gamma)
        return sinh_ratio(sr, gamma), sinh_ratio(s, gamma)

    def quadrature(self):
        """Graded Gauss-Legendre points and weights per cell, shape (ncells, m)."""
        nodes = self.mesh.nodes
        xl, xr = nodes[:-1], nodes[1:]
        L = xr - xl
        pmax = np.maximum(self.p_nodes[:-1], self.p_nodes[1:])
        ell = self.eps / np.sqrt(pmax)
        # drop grading levels that lie beyond the cell midpoint in every cell
        levels = int(np.searchsorted(_GRADING, np.max(0.5 * L / ell)))
        grading = np.append(_GRADING[: max(levels, 1)], np.inf)
        offs = np.minimum(grading[None, :] * ell[:, None], 0.5 * L[:, None])
        left = xl[:, None] + offs
        right = xr[:, None] - offs
        a = np.concatenate([left[:, :-1], right[:, 1:]], axis=1)
        b = np.concatenate([left[:, 1:], right[:, :-1]], axis=1)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        pts = mid[..., None] + half[..., None] * _GL_T
        wts = np.abs(half)[..., None] * _GL_W
        return pts.reshape(len(xl), -1), wts.reshape(len(xl), -1)


@dataclass(frozen=True)
class FemSystem:
    """Tridiagonal system ``M z = rhs``; ``M`` is symmetric (not Hermitian)."""

    diag: np.ndarray
    lower: np.ndarray
    rhs: np.ndarray
    eps: float
    rho: complex
    neumann: float
    basis: WkbHatBasis

    @property
    def upper(self):
        return self.lower

    @property
    def size(self):
        return self.diag.size

    def matvec(self, z):
        out = self.diag * z
        out[:-1] += self.lower * z[1:]
        out[1:] += self.lower * z[:-1]
        return out

    def to_sparse(self):
        return sp.diags([self.lower, self.diag, self.lower], [-1, 0, 1], format="csc")

    def to_dense(self):
        return self.to_sparse().toarray()


def build_basis(field, mesh, eps):
    return WkbHatBasis(field, mesh, eps)


def _cell_matrices(basis: WkbHatBasis):
    """Per-cell (K_ww, K_wv, K_vv) of eps^2 int u'v' + int |a| u v."""
    eps = basis.eps
    g = basis.gamma
    p, dp = basis.p_nodes, basis.dp_nodes
    em = np.exp(-2.0 * g)
    coth = (1.0 + em) / -np.expm1(-2.0 * g)
    csch = -2.0 * np.exp(-g) / np.expm1(-2.0 * g)
    rp = np.sqrt(p)
    kww = eps * rp[:-1] * coth + eps * eps * dp[:-1] / (4.0 * p[:-1])
    kvv = eps * rp[1:] * coth - eps * eps * dp[1:] / (4.0 * p[1:])
    kwv = -eps * (p[:-1] * p[1:]) ** 0.25 * csch
    if not basis.r_zero:
        pts, wts = basis.quadrature()
        n = np.broadcast_to(np.arange(basis.ncells)[:, None], pts.shape)
        w, _, v, _ = basis.local(n, pts)
        rw = basis.piece.r(pts) * wts
        e2 = eps * eps
        kww = kww - e2 * np.sum(rw * w * w, axis=1)
        kwv = kwv - e2 * np.sum(rw * w * v, axis=1)
        kvv = kvv - e2 * np.sum(rw * v * v, axis=1)
    return kww, kwv, kvv


def assemble(field, mesh, basis, eps, rho, neumann=1.0) -> FemSystem:
    """Assemble the Galerkin system with Robin datum ``rho`` at the left node."""
    if basis.mesh is not mesh or basis.eps != float(eps):
        raise AssemblyError("basis does not match the mesh/eps being assembled")
    kww, kwv, kvv = _cell_matrices(basis)
    N = mesh.size
    complex_rho = np.iscomplexobj(rho) and np.imag(rho) != 0.0
    dtype = complex if complex_rho else float
    diag = np.zeros(N, dtype=dtype)
    diag[:-1] += kww
    diag[1:] += kvv
    diag[0] += eps * eps * (rho if complex_rho else float(np.real(rho)))
    lower = kwv.astype(dtype)
    rhs = np.zeros(N, dtype=dtype)
    rhs[-1] = eps * neumann
    if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(lower))):
        raise AssemblyError("non-finite entries in the FEM matrix")
    return FemSystem(diag, lower, rhs, float(eps), rho, float(neumann), basis)


def _banded(system: FemSystem):
    N = system.size
    ab = np.zeros((4, N), dtype=system.diag.dtype)
    ab[1, 1:] = system.lower
    ab[2, :] = system.diag
    ab[3, :-1] = system.lower
    return ab


def _factor(system: FemSystem):
    ab = _banded(system)
    gbtrf, gbtrs = lapack.get_lapack_funcs(("gbtrf", "gbtrs"), (ab,))
    lu, piv, info = gbtrf(ab, 1, 1)
    if info != 0:
        raise SolverError("singular FEM matrix", condition=math.inf)

    def solve(b):
        x, info2 = gbtrs(lu, 1, 1, b, piv)
        if info2 != 0:
            raise SolverError(f"banded back-substitution failed (info={info2})")
        return x

    return solve


@dataclass(frozen=True)
class FemSolution:
    z: np.ndarray
    basis: WkbHatBasis
    residual: float

    @property
    def mesh(self):
        return self.basis.mesh

    @property
    def nodes(self):
        return self.basis.mesh.nodes

    def eval(self, x):
        """(chi_h(x), chi_h'(x)); the derivative is right-sided at interior nodes."""
        x = np.asarray(x, dtype=float)
        n = self.basis.cell_of(x)
        w, dw, v, dv = self.basis.local(n, x)
        z = self.z
        chi = z[n] * w + z[n + 1] * v
        dchi = z[n] * dw + z[n + 1] * dv
        if x.ndim == 0:
            return complex(chi), complex(dchi)
        return chi, dchi

    def eval_left(self, x):
        """Like eval but with the left-sided derivative at interior nodes."""
        x = np.asarray(x, dtype=float)
        n = self.basis.cell_of(x)
        nodes = self.nodes
        at_node = (n > 0) & (x == nodes[n])
        n = np.where(at_node, n - 1, n)
        w, dw, v, dv = self.basis.local(n, x)
        z = self.z
        chi = z[n] * w + z[n + 1] * v
        dchi = z[n] * dw + z[n + 1] * dv
        if x.ndim == 0:
            return complex(chi), complex(dchi)
        return chi, dchi

    def scaled(self, factor):
        return FemSolution(self.z * factor, self.basis, self.residual)


def solve_bvp(system: FemSystem) -> FemSolution:
    """Banded LU solve with one step of iterative refinement."""
    solve = _factor(system)
    z = solve(system.rhs.copy())
    res = system.rhs - system.matvec(z)
    z = z + solve(res)
    res = system.rhs - system.matvec(z)
    if not np.all(np.isfinite(z)):
        raise SolverError("non-finite FEM solution", condition=condition_number(system))
    scale = np.max(np.abs(system.rhs)) or 1.0
    return FemSolution(z, system.basis, float(np.max(np.abs(res)) / scale))


def eval_solution(sol: FemSolution, x):
    return sol.eval(x)


def condition_number(system: FemSystem, dense_limit=2000, iters=200, rtol=1e-12):
    """2-norm condition number of the FEM matrix."""
    N = system.size
    if N <= dense_limit:
        s = sla.svdvals(system.to_dense())
        return math.inf if s[-1] == 0.0 else float(s[0] / s[-1])
    A = system.to_sparse()
    v0 = np.full(N, 1.0 / math.sqrt(N), dtype=A.dtype)
    smax = spla.svds(A, k=1, which="LM", v0=v0, return_singular_vectors=False)[0]
    try:
        lu = spla.splu(A)
    except RuntimeError:
        return math.inf
    rng = np.random.default_rng(0)
    x = rng.standard_normal(N).astype(A.dtype)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = lu.solve(lu.solve(x), trans="H")
        nrm = np.linalg.norm(y)
        if nrm == 0.0 or not np.isfinite(nrm):
            return math.inf
        new = nrm
        x = y / nrm
        if lam and abs(new - lam) <= rtol * new:
            lam = new
            break
        lam = new
    return float(smax * math.sqrt(lam))
