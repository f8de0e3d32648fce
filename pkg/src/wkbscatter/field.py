"""Piecewise-polynomial potentials and the exact quantities derived from them.

The model coefficient is ``a(x) = E - V(x)`` where ``V`` is a polynomial of
degree at most two on each segment of a partition of ``[0, 1]``. Every
quantity the solvers need (``a`` and its derivatives, the second-order WKB
correction ``beta``, the FEM residual weight ``r`` and the phase integrals)
is evaluated in closed form. Interval integrals use cancellation-free
difference formulas so that very short cells keep full relative accuracy.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import minimize_scalar

from . import _taylor as ts
from .errors import AdmissibilityError, DomainError, SingularityError

OSCILLATORY = "oscillatory"
EVANESCENT = "evanescent"

_KINDS = {1: "constant", 2: "linear", 3: "quadratic"}
_TOL = 1e-12


@dataclass(frozen=True)
class PotentialSegment:
    """V(x) = sum(coeffs[k] * x**k) on the half-open interval [x_left, x_right)."""

    x_left: float
    x_right: float
    coeffs: tuple
    kind: str | None = None

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if not self.x_left < self.x_right:
            raise ValueError(f"empty segment [{self.x_left}, {self.x_right})")
        if len(coeffs) not in _KINDS:
            raise ValueError("segment polynomials must have degree <= 2")
        expected = _KINDS[len(coeffs)]
        if self.kind is None:
            object.__setattr__(self, "kind", expected)
        elif self.kind != expected:
            raise ValueError(
                f"segment kind {self.kind!r} does not match {len(coeffs)} coefficients"
            )


class _Piece:
    """|a| = p(x) > 0 on one segment, with sign(a) = sign."""

    def __init__(self, segment: PotentialSegment, E: float):
        self.segment = segment
        self.x_left = segment.x_left
        self.x_right = segment.x_right
        v = np.zeros(3)
        v[: len(segment.coeffs)] = segment.coeffs
        a = -v
        a[0] += E
        self.a_coeffs = a
        mid = 0.5 * (self.x_left + self.x_right)
        amid = a[0] + mid * (a[1] + mid * a[2])
        self.sign = float(np.sign(amid))
        s = self.sign if self.sign != 0 else 1.0
        self.p0, self.p1, self.p2 = s * a
        if self.p2 != 0.0:
            A = self.p2
            self.shift = self.p1 / (2.0 * A)
            k = self.p0 - self.p1 * self.p1 / (4.0 * A)
            umax = max(abs(self.x_left + self.shift), abs(self.x_right + self.shift))
            if abs(k) <= 1e-13 * abs(A) * umax * umax:
                k = 0.0
            self.k = k

    @property
    def regime(self):
        return OSCILLATORY if self.sign > 0 else EVANESCENT

    # polynomial evaluation -------------------------------------------------
    def p(self, x):
        return self.p0 + x * (self.p1 + x * self.p2)

    def dp(self, x):
        return self.p1 + 2.0 * self.p2 * x

    def d2p(self, x):
        return np.full_like(np.asarray(x, dtype=float), 2.0 * self.p2)

    def a(self, x):
        return self.sign * self.p(x)

    def da(self, x):
        return self.sign * self.dp(x)

    def d2a(self, x):
        return self.sign * self.d2p(x)

    def _check_nonzero(self, p):
        if np.any(p <= 0.0):
            raise SingularityError("evaluation at a zero of a(x) (turning point)")

    def beta(self, x):
        p = self.p(x)
        self._check_nonzero(p)
        dp = self.dp(x)
        return -5.0 / 32.0 * dp * dp * p**-2.5 + 0.125 * self.d2p(x) * p**-1.5

    def r(self, x):
        p = self.p(x)
        self._check_nonzero(p)
        dp = self.dp(x)
        return 5.0 / 16.0 * dp * dp / (p * p) - 0.25 * self.d2p(x) / p

    # closed-form integrals ---------------------------------------------------
    def sqrt_integral(self, x0, x1):
        """Integral of sqrt(|a|) over [x0, x1], cancellation free."""
        x0, x1 = np.broadcast_arrays(np.asarray(x0, float), np.asarray(x1, float))
        if self.p2 == 0.0:
            q0, q1 = self.p(x0), self.p(x1)
            self._check_nonzero(np.minimum(q0, q1))
            r0, r1 = np.sqrt(q0), np.sqrt(q1)
            return (2.0 / 3.0) * (x1 - x0) * (q1 + r0 * r1 + q0) / (r0 + r1)
        u0, u1 = x0 + self.shift, x1 + self.shift
        straddle = u0 * u1 < 0.0
        if not np.any(straddle):
            return self._sqrt_quad(u0, u1, x1 - x0)
        zero = np.zeros_like(u0)
        # straddling entries are split at the vertex u = 0
        right = np.where(straddle, zero, u0)
        out = self._sqrt_quad(right, u1, np.where(straddle, u1, x1 - x0))
        return out + self._sqrt_quad(u0, right, right - u0)

    def _sqrt_quad(self, u0, u1, du):
        A, k = self.p2, self.k
        q0, q1 = A * u0 * u0 + k, A * u1 * u1 + k
        self._check_nonzero(np.minimum(q0, q1))
        r0, r1 = np.sqrt(q0), np.sqrt(q1)
        term1 = 0.5 * du * (r1 + A * u0 * (u1 + u0) / (r0 + r1))
        if k == 0.0:
            return term1
        if A > 0.0:
            s = np.sign(u0 + u1)
            sa = np.sqrt(A)
            g0 = sa * np.abs(u0) + r0
            dg = s * du * sa * (1.0 + sa * (np.abs(u1) + np.abs(u0)) / (r0 + r1))
            return term1 + (k / (2.0 * sa)) * s * np.log1p(dg / g0)
        c = np.sqrt(-A)
        b0 = np.clip(c * u0 / np.sqrt(k), -1.0, 1.0)
        b1 = np.clip(c * u1 / np.sqrt(k), -1.0, 1.0)
        c0, c1 = np.sqrt(1.0 - b0 * b0), np.sqrt(1.0 - b1 * b1)
        same = (b0 * b1 > 0.0) & (b1 * c0 + b0 * c1 != 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            stable = np.arcsin(
                np.clip((c * du / np.sqrt(k)) * (b1 + b0) / (b1 * c0 + b0 * c1), -1.0, 1.0)
            )
        diff = np.where(same, stable, np.arcsin(b1) - np.arcsin(b0))
        return term1 + (k / (2.0 * c)) * diff

    def beta_integral(self, x0, x1):
        """Integral of beta over [x0, x1]."""
        x0, x1 = np.broadcast_arrays(np.asarray(x0, float), np.asarray(x1, float))
        if self.p2 == 0.0:
            if self.p1 == 0.0:
                return np.zeros_like(x0)
            q0, q1 = self.p(x0), self.p(x1)
            self._check_nonzero(np.minimum(q0, q1))
            r0, r1 = np.sqrt(q0), np.sqrt(q1)
            return (
                -(5.0 * self.p1**2 / 48.0)
                * (x1 - x0)
                * (q1 + r0 * r1 + q0)
                / ((r0 + r1) * (q0 * q1) ** 1.5)
            )
        A, k = self.p2, self.k
        u0, u1 = x0 + self.shift, x1 + self.shift
        if k == 0.0:
            s = np.sign(u0 + u1)
            return -(3.0 / 16.0) / np.sqrt(A) * s * (x1 - x0) * (u1 + u0) / (u0 * u0 * u1 * u1)
        straddle = u0 * u1 < 0.0
        if A > 0.0 and not np.any(straddle):
            s = np.sign(u0 + u1)
            out = self._beta_anti_stable(u1, s) - self._beta_anti_stable(u0, s)
        else:
            out = self._beta_anti(u1) - self._beta_anti(u0)
        # the antiderivative difference cancels on cells short relative to the
        # distance to the complex roots of p; Gauss-Legendre is exact there
        short = np.abs(x1 - x0) <= 0.05 * self._root_distance(0.5 * (x0 + x1))
        if np.any(short):
            out = np.where(short, self._beta_gauss(x0, x1), out)
        return out

    def _root_distance(self, x):
        roots = np.polynomial.Polynomial([self.p0, self.p1, self.p2]).roots()
        if len(roots) == 0:
            return np.full_like(x, np.inf)
        return np.min(np.abs(x[..., None] - roots[None, :].astype(complex)), axis=-1)

    def _beta_gauss(self, x0, x1):
        t, w = np.polynomial.legendre.leggauss(8)
        half = 0.5 * (x1 - x0)
        mid = 0.5 * (x1 + x0)
        pts = mid[..., None] + half[..., None] * t
        return half * np.sum(w * self.beta(pts), axis=-1)

    def _beta_anti(self, u):
        A, k = self.p2, self.k
        P = A * u * u + k
        self._check_nonzero(P)
        return A * u / (k * P**1.5) * (A * u * u / 24.0 + 0.25 * k)

    def _beta_anti_stable(self, u, s):
        A, k = self.p2, self.k
        P = A * u * u + k
        self._check_nonzero(P)
        with np.errstate(divide="ignore"):
                return A * u / (4.0 * P**1.5) + np.sqrt(A) * s / (24.0 * k) * np.expm1(
                1.5 * np.log1p(-k / P)
            )

    # derivative jets ---------------------------------------------------------
    def beta_jet(self, eps, x):
        """(beta0, beta1, beta2, beta3) at x for the oscillatory marching scheme."""
        x = np.asarray(x, dtype=float)
        K = 6
        P = ts.polynomial([self.p0, self.p1, self.p2], x, K)
        if np.any(P[0] <= 0.0):
            raise SingularityError("evaluation at a zero of a(x) (turning point)")
        dP = ts.deriv(P)
        d2P = ts.deriv(dP)
        beta = -5.0 / 32.0 * ts.mul(ts.mul(dP, dP), ts.power(P, -2.5)) + 0.125 * ts.mul(
            d2P, ts.power(P, -1.5)
        )
        dphase = ts.power(P, 0.5) - eps * eps * beta
        if np.any(dphase[0] <= 0.0):
            raise AdmissibilityError("sqrt(a) - eps^2 beta <= 0: eps above threshold")
        half_inv = 0.5 * ts.reciprocal(dphase)
        b0 = ts.mul(beta, half_inv)
        b1 = ts.mul(ts.deriv(b0), half_inv)
        b2 = ts.mul(ts.deriv(b1), half_inv)
        b3 = ts.mul(ts.deriv(b2), half_inv)
        return b0[0], b1[0], b2[0], b3[0]

    def extrema(self, x0, x1):
        """(min, max) of a over [x0, x1], exactly from the polynomial."""
        pts = [x0, x1]
        if self.a_coeffs[2] != 0.0:
            xv = -self.a_coeffs[1] / (2.0 * self.a_coeffs[2])
            if x0 < xv < x1:
                pts.append(xv)
        vals = [float(self.a(np.float64(t))) for t in pts]
        return min(vals), max(vals)

    def has_interior_root(self):
        roots = np.polynomial.Polynomial(self.a_coeffs).roots()
        for rt in roots:
            if abs(rt.imag) <= 1e-14 and self.x_left <= rt.real <= self.x_right:
                return True
        return False


class CoefficientField:
    """Energy ``E`` and a piecewise-polynomial potential covering [0, 1].

    Evaluators accept scalars or arrays and a ``side`` flag (``"right"`` or
    ``"left"``) selecting the one-sided value at segment breakpoints; plain
    calls at a breakpoint return the right-sided value.
    """

    def __init__(self, E, segments):
        if not E > 0:
            raise ValueError("energy E must be positive")
        segments = tuple(segments)
        if not segments:
            raise ValueError("at least one segment is required")
        if abs(segments[0].x_left) > _TOL or abs(segments[-1].x_right - 1.0) > _TOL:
            raise ValueError("segments must cover [0, 1]")
        for left, right in zip(segments, segments[1:]):
            if abs(left.x_right - right.x_left) > _TOL:
                raise ValueError(
                    f"segments must be contiguous: gap/overlap at {left.x_right}"
                )
        self.E = float(E)
        self.segments = segments
        self.pieces = tuple(_Piece(seg, self.E) for seg in segments)
        self.breakpoints = tuple([segments[0].x_left] + [s.x_right for s in segments])

    @classmethod
    def from_a(cls, E, breakpoints, a_polys):
        """Build from polynomials of a(x) itself (ascending coefficients)."""
        segs = []
        for x0, x1, ac in zip(breakpoints[:-1], breakpoints[1:], a_polys):
            v = [-float(c) for c in ac]
            v[0] += E
            while len(v) > 1 and v[-1] == 0.0:
                v.pop()
            segs.append(PotentialSegment(x0, x1, tuple(v)))
        return cls(E, segs)

    def __repr__(self):
        return f"CoefficientField(E={self.E!r}, segments={list(self.segments)!r})"

    @property
    def lead_values(self):
        """(a(0), a(1)): the constant values of a in the left/right leads."""
        return (
            float(self.pieces[0].a(np.float64(0.0))),
            float(self.pieces[-1].a(np.float64(1.0))),
        )

    # location ------------------------------------------------------------
    def locate(self, x, side="right"):
        """Index of the segment containing scalar x (one-sided at breakpoints)."""
        x = float(x)
        if x < -_TOL or x > 1.0 + _TOL:
            raise DomainError(f"x={x} outside [0, 1]")
        if side == "right":
            i = bisect.bisect_right(self.breakpoints, x) - 1
        elif side == "left":
            i = bisect.bisect_left(self.breakpoints, x) - 1
        else:
            raise ValueError("side must be 'left' or 'right'")
        return min(max(i, 0), len(self.pieces) - 1)

    def _indices(self, x, side):
        x = np.asarray(x, dtype=float)
        if np.any(x < -_TOL) or np.any(x > 1.0 + _TOL):
            raise DomainError("evaluation point outside [0, 1]")
        b = np.asarray(self.breakpoints)
        if side == "right":
            idx = np.searchsorted(b, x, side="right") - 1
        elif side == "left":
            idx = np.searchsorted(b, x, side="left") - 1
        else:
            raise ValueError("side must be 'left' or 'right'")
        return x, np.clip(idx, 0, len(self.pieces) - 1)

    def _apply(self, method, x, side, *args):
        x, idx = self._indices(x, side)
        out = np.empty(x.shape)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = getattr(self.pieces[i], method)(*args, x[mask]) if args else getattr(
                self.pieces[i], method
            )(x[mask])
        return out if out.ndim else float(out)

    # evaluators ----------------------------------------------------------
    def eval_a(self, x, side="right"):
        return self._apply("a", x, side)

    def eval_da(self, x, side="right"):
        return self._apply("da", x, side)

    def eval_d2a(self, x, side="right"):
        return self._apply("d2a", x, side)

    def eval_beta(self, x, side="right"):
        """beta = -(|a|^{-1/4})'' / (2 |a|^{1/4}), exact."""
        return self._apply("beta", x, side)

    def eval_r(self, x, side="right"):
        """FEM residual weight; only defined where a < 0."""
        x_arr, idx = self._indices(x, side)
        for i in np.unique(idx):
            if self.pieces[i].regime != EVANESCENT:
                raise DomainError("r(x) is only defined in evanescent segments")
        return self._apply("r", x, side)

    def regime_at(self, x, side="right"):
        return self.pieces[self.locate(x, side)].regime

    def _piece_for_interval(self, x0, x1):
        lo, hi = min(x0, x1), max(x0, x1)
        i = self.locate(lo, "right")
        if hi > self.breakpoints[i + 1] + _TOL:
            raise DomainError(f"interval [{lo}, {hi}] crosses a segment interface")
        return self.pieces[i]

    def phase_integral(self, eps, x0, x1):
        """Integral of sqrt(a) - eps^2 beta over [x0, x1] inside one oscillatory segment."""
        piece = self._piece_for_interval(x0, x1)
        if piece.regime != OSCILLATORY:
            raise DomainError("phase_integral requires an oscillatory segment")
        return float(piece.sqrt_integral(x0, x1) - eps * eps * piece.beta_integral(x0, x1))

    def evanescent_phase(self, eps, x0, x1):
        """(1/eps) * integral of sqrt(|a|) over [x0, x1] inside one evanescent segment."""
        piece = self._piece_for_interval(x0, x1)
        if piece.regime != EVANESCENT:
            raise DomainError("evanescent_phase requires an evanescent segment")
        return float(piece.sqrt_integral(x0, x1)) / eps

    def beta_jet(self, eps, x, side="right"):
        """(beta0, beta1, beta2, beta3) of the marching scheme at x."""
        x_arr, idx = self._indices(x, side)
        outs = [np.empty(x_arr.shape) for _ in range(4)]
        for i in np.unique(idx):
            piece = self.pieces[i]
            if piece.regime != OSCILLATORY:
                raise DomainError("beta_jet requires an oscillatory segment")
            mask = idx == i
            vals = piece.beta_jet(eps, x_arr[mask])
            for o, v in zip(outs, vals):
                o[mask] = v
        if x_arr.ndim == 0:
            return tuple(float(o) for o in outs)
        return tuple(outs)


@dataclass(frozen=True)
class Zone:
    x_left: float
    x_right: float
    regime: str
    segment: int

    @property
    def length(self):
        return self.x_right - self.x_left


SUPPORTED_LAYOUTS = {
    (OSCILLATORY,): "one-zone",
    (EVANESCENT, OSCILLATORY): "two-zone",
    (OSCILLATORY, EVANESCENT, OSCILLATORY): "three-zone",
}


@dataclass(frozen=True)
class ZoneLayout:
    zones: tuple

    @classmethod
    def from_field(cls, field: CoefficientField):
        return cls(
            tuple(
                Zone(p.x_left, p.x_right, p.regime, i) for i, p in enumerate(field.pieces)
            )
        )

    @property
    def regimes(self):
        return tuple(z.regime for z in self.zones)

    @property
    def interfaces(self):
        return tuple(z.x_left for z in self.zones[1:])

    @property
    def kind(self):
        return SUPPORTED_LAYOUTS.get(self.regimes)


@dataclass
class HypothesisReport:
    tau_ev: float = float("nan")
    M_ev: float = float("nan")
    tau_os: float = float("nan")
    M_os: float = float("nan")
    eps1: float = 1.0
    violations: list = dc_field(default_factory=list)

    @property
    def passed(self):
        return not self.violations

    @property
    def pass_(self):
        return self.passed


def _eps1_zone(piece: _Piece, x0, x1, samples=1000):
    """min over [x0, x1] of a^{1/4} beta_+^{-1/2} (inf if beta <= 0 everywhere)."""
    xs = np.linspace(x0, x1, samples)
    a = piece.a(xs)
    b = piece.beta(xs)
    with np.errstate(divide="ignore"):
        vals = np.where(b > 0.0, a**0.25 / np.sqrt(np.where(b > 0, b, 1.0)), np.inf)
    i = int(np.argmin(vals))
    best = vals[i]
    if not np.isfinite(best):
        return np.inf

    def g(t):
        bt = float(piece.beta(np.float64(t)))
        if bt <= 0.0:
            return np.inf
        return float(piece.a(np.float64(t))) ** 0.25 / np.sqrt(bt)

    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, samples - 1)]
    if hi > lo:
        res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if res.success and np.isfinite(res.fun):
            best = min(best, float(res.fun))
    return best


def compute_eps1(field: CoefficientField, layout: ZoneLayout | None = None):
    layout = layout or ZoneLayout.from_field(field)
    eps1 = 1.0
    for z in layout.zones:
        piece = field.pieces[z.segment]
        if piece.regime == OSCILLATORY and not piece.has_interior_root():
            eps1 = min(eps1, _eps1_zone(piece, z.x_left, z.x_right))
    return eps1


def validate(field: CoefficientField, layout: ZoneLayout | None = None, eps=None):
    """Check the admissibility hypotheses; failures are collected, never raised."""
    layout = layout or ZoneLayout.from_field(field)
    rep = HypothesisReport()
    v = rep.violations
    if layout.kind is None:
        v.append(f"unsupported zone layout {layout.regimes}")
    ev_lo, ev_hi, os_lo, os_hi = [], [], [], []
    for z in layout.zones:
        piece = field.pieces[z.segment]
        if piece.has_interior_root() or piece.sign == 0.0:
            v.append(f"turning point: a(x) vanishes in [{z.x_left}, {z.x_right}]")
            continue
        amin, amax = piece.extrema(z.x_left, z.x_right)
        if z.regime == EVANESCENT:
            if amax >= 0.0:
                v.append(f"zone [{z.x_left}, {z.x_right}] declared evanescent but a >= 0")
            ev_lo.append(-amax)
            ev_hi.append(-amin)
        else:
            if amin <= 0.0:
                v.append(f"zone [{z.x_left}, {z.x_right}] declared oscillatory but a <= 0")
            os_lo.append(amin)
            os_hi.append(amax)
    for left, right in zip(layout.zones, layout.zones[1:]):
        if left.regime == right.regime:
            v.append(f"adjacent zones at x={left.x_right} share the {left.regime} regime")
    a1 = field.lead_values[1]
    if not a1 > 0.0:
        v.append("a(1) must be positive (injection from the right lead)")
    if ev_lo:
        rep.tau_ev, rep.M_ev = min(ev_lo), max(ev_hi)
    if os_lo:
        rep.tau_os, rep.M_os = min(os_lo), max(os_hi)
    if not v:
        rep.eps1 = compute_eps1(field, layout)
        if eps is not None:
            if not eps > 0.0:
                v.append("eps must be positive")
            elif eps >= rep.eps1:
                v.append(f"eps={eps} violates eps < eps1={rep.eps1:.6g}")
    return rep
