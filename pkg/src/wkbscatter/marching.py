"""Second-order WKB marching scheme for oscillatory zones.

The wave function ``phi`` is carried as ``U = (a^{1/4} phi, eps (a^{1/4} phi)' / sqrt(a))``
and further as ``Z = exp(-i Phi / eps) P U`` with the exact phase
``phi_eps(x) = int (sqrt(a) - eps^2 beta)``. ``Z`` is slowly varying and is
advanced by ``Z_{n+1} = (I + A1_n + A2_n) Z_n``. When ``beta`` vanishes the
step matrices are zero and the scheme is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalFailure
from .field import OSCILLATORY, CoefficientField

_SQ2 = np.sqrt(0.5)
P = _SQ2 * np.array([[1j, 1.0], [1.0, 1j]])
P_INV = _SQ2 * np.array([[-1j, 1.0], [1.0, -1j]])

# (sin x - x) series coefficients for |x| < 1: -x^3/3! + x^5/5! - ...
_SIN_SERIES = [(-1.0) ** k / np.prod(np.arange(1.0, 2 * k + 2)) for k in range(1, 11)]


def stable_H(eta):
    """(H1, H2) = (e^{i eta} - 1, e^{i eta} - 1 - i eta) without cancellation."""
    eta = np.asarray(eta, dtype=float)
    half = np.sin(0.5 * eta)
    re = -2.0 * half * half
    s = np.sin(eta)
    small = np.abs(eta) < 1.0
    e2 = eta * eta
    ser = np.zeros_like(eta)
    for c in reversed(_SIN_SERIES):
        ser = ser * e2 + c
    ser = ser * e2 * eta
    im2 = np.where(small, ser, s - eta)
    H1 = re + 1j * s
    H2 = re + 1j * im2
    if eta.ndim == 0:
        return complex(H1), complex(H2)
    return H1, H2


def transform_matrix(field: CoefficientField, x, side, eps):
    """A(x) mapping (phi, eps phi') to U, with one-sided a, a'."""
    a = field.eval_a(x, side)
    if not a > 0.0:
        raise DomainError(f"a({x}{'+' if side == 'right' else '-'}) <= 0: not oscillatory")
    da = field.eval_da(x, side)
    return np.array([[a**0.25, 0.0], [0.25 * eps * a**-1.25 * da, a**-0.25]])


def to_u(field, x, side, psi, eps_dpsi, eps):
    A = transform_matrix(field, x, side, eps)
    return A @ np.array([psi, eps_dpsi], dtype=complex)


def from_u(field, x, side, U, eps):
    """Inverse of ``to_u``: returns (psi, eps psi')."""
    a = field.eval_a(x, side)
    if not a > 0.0:
        raise DomainError(f"a({x}) <= 0: not oscillatory")
    da = field.eval_da(x, side)
    u1, u2 = U[0], U[1]
    psi = a**-0.25 * u1
    return psi, a**0.25 * u2 - 0.25 * eps * a**-1.25 * da * u1


class OscGrid:
    """Nodes of one oscillatory zone with exact phases and beta jets."""

    def __init__(self, field: CoefficientField, nodes, eps):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0.0):
            raise ValueError("oscillatory grid needs >= 2 strictly increasing nodes")
        piece = field._piece_for_interval(nodes[0], nodes[-1])
        if piece.regime != OSCILLATORY:
            raise DomainError("marching grid must lie in an oscillatory zone")
        self.field = field
        self.piece = piece
        self.eps = float(eps)
        self.x = nodes
        e2 = self.eps**2
        x0 = np.full_like(nodes, nodes[0])
        self.phi = piece.sqrt_integral(x0, nodes) - e2 * piece.beta_integral(x0, nodes)
        self.S = piece.sqrt_integral(nodes[:-1], nodes[1:]) - e2 * piece.beta_integral(
            nodes[:-1], nodes[1:]
        )
        if np.any(self.S <= 0.0):
            raise NumericalFailure("non-positive phase increment: eps above threshold")
        self.beta = piece.beta(nodes)
        self.b0, self.b1, self.b2, self.b3 = piece.beta_jet(self.eps, nodes)

    @classmethod
    def uniform(cls, field, x_left, x_right, ncells, eps):
        nodes = np.linspace(x_left, x_right, int(ncells) + 1)
        nodes[0], nodes[-1] = x_left, x_right
        return cls(field, nodes, eps)

    @property
    def h(self):
        return float(np.max(np.diff(self.x)))

    @property
    def size(self):
        return self.x.size


def step_matrices(grid: OscGrid, eps=None, n=None):
    """A1_n and A2_n as arrays of shape (steps, 2, 2), or a single pair for index n."""
    eps = grid.eps if eps is None else float(eps)
    sl = slice(None) if n is None else slice(n, n + 1)
    phi = grid.phi
    E = np.exp(2j * phi / eps)
    En, Em = E[:-1][sl], E[1:][sl]
    b0n, b0m = grid.b0[:-1][sl], grid.b0[1:][sl]
    b1n, b1m = grid.b1[:-1][sl], grid.b1[1:][sl]
    b2m, b3m = grid.b2[1:][sl], grid.b3[1:][sl]
    h = np.diff(grid.x)[sl]
    bar = 0.5 * (grid.beta[1:][sl] * b0m + grid.beta[:-1][sl] * b0n)
    eta = 2.0 * grid.S[sl] / eps
    H1p, H2p = stable_H(eta)
    H1m, H2m = stable_H(-eta)
    e2, e3, e4, e5 = eps**2, eps**3, eps**4, eps**5
    Ec_n, Ec_m = np.conj(En), np.conj(Em)

    A1 = np.zeros(h.shape + (2, 2), dtype=complex)
    A1[:, 0, 1] = (
        -1j * e2 * (b0n * Ec_n - b0m * Ec_m)
        + e3 * (b1m * Ec_m - b1n * Ec_n)
        - 1j * e4 * b2m * Ec_n * H1m
        - e5 * b3m * Ec_n * H2m
    )
    A1[:, 1, 0] = (
        -1j * e2 * (b0m * Em - b0n * En)
        + e3 * (b1m * Em - b1n * En)
        + 1j * e4 * b2m * En * H1p
        - e5 * b3m * En * H2p
    )
    A2 = np.zeros_like(A1)
    c5 = b1m * (b0n - b0m)
    A2[:, 0, 0] = -1j * e3 * h * bar - e4 * b0n * b0m * H1m + 1j * e5 * c5 * H2m
    A2[:, 1, 1] = 1j * e3 * h * bar - e4 * b0n * b0m * H1p - 1j * e5 * c5 * H2p
    if n is not None:
        return A1[0], A2[0]
    return A1, A2


@dataclass(frozen=True)
class MarchResult:
    x: np.ndarray
    U: np.ndarray  # shape (nodes, 2), complex
    Z: np.ndarray
    norm_ratios: np.ndarray  # ||Z_{n+1}|| / ||Z_n||
    imag_residue: np.ndarray  # max |Im U_n| / ||U_n||
    step_norms: np.ndarray  # ||A1_n|| + ||A2_n|| (2-norm)

    @property
    def final(self):
        return self.U[-1]


def march(field, grid: OscGrid, eps, U_init) -> MarchResult:
    """Advance U_init from grid.x[0] through every node of the grid."""
    eps = float(eps)
    if eps != grid.eps:
        raise ValueError("grid was built for a different eps")
    A1, A2 = step_matrices(grid)
    B = A1 + A2
    B[:, 0, 0] += 1.0
    B[:, 1, 1] += 1.0
    b11, b12, b21, b22 = (B[:, i, j].tolist() for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
    Z0 = P @ np.asarray(U_init, dtype=complex)
    z1, z2 = complex(Z0[0]), complex(Z0[1])
    n = grid.size
    Zs1, Zs2 = [z1], [z2]
    for k in range(n - 1):
        z1, z2 = b11[k] * z1 + b12[k] * z2, b21[k] * z1 + b22[k] * z2
        Zs1.append(z1)
        Zs2.append(z2)
    Z = np.column_stack([np.array(Zs1), np.array(Zs2)])
    if not np.all(np.isfinite(Z)):
        bad = int(np.argmin(np.all(np.isfinite(Z), axis=1)))
        raise NumericalFailure("non-finite marching state", step=bad)
    rot = np.exp(1j * grid.phi / eps)
    W = np.column_stack([rot * Z[:, 0], np.conj(rot) * Z[:, 1]])
    U = W @ P_INV.T
    U[0] = np.asarray(U_init, dtype=complex)
    zn = np.linalg.norm(Z, axis=1)
    un = np.linalg.norm(U, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        imag = np.max(np.abs(U.imag), axis=1) / un
    step_norms = np.linalg.norm(A1, ord=2, axis=(1, 2)) + np.linalg.norm(A2, ord=2, axis=(1, 2))
    return MarchResult(grid.x, U, Z, zn[1:] / zn[:-1], imag, step_norms)
