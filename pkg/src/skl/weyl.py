"""Weyl-type approximants of the projector kernel and their magnitude envelopes."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate

from .bessel import ball_fourier_ratio
from .operators import (DomainGeometry, OperatorSpec, PointPair, boundary_normal_derivative,
                        boundary_symbol, distances, reflect_point)

QUAD_RTOL = 1e-6
QUAD_FLOOR = 1e-12
GLANCING_CUTOFF = 1e-6


class QuadratureError(RuntimeError):
    pass


class Method(str, enum.Enum):
    EXACT = "exact"
    TAUBERIAN = "tauberian"
    WEYL = "weyl"
    WEYL_BOUNDARY = "weyl_boundary"
    WEYL_BOUNDARY_CORRECTED = "weyl_boundary_corrected"


class Case(str, enum.Enum):
    A = "a"
    B = "b"
    C = "c"
    GAP = "gap"
    INTERIOR = "interior"
    D_GE_3 = "d_ge_3"


@dataclass(frozen=True)
class RegimeTag:
    case: Case
    delta: float
    thresholds: dict = field(default_factory=dict)


@dataclass(frozen=True)
class KernelEstimate:
    value: float
    method: Method
    regime: Optional[RegimeTag]
    envelope: float

    def __post_init__(self):
        if not self.envelope >= 0:
            raise ValueError("envelope must be non-negative")


# --------------------------------------------------------------------------
# interior Weyl expression
# --------------------------------------------------------------------------

def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def weyl_free_closed_form(z, tau: float, h: float, d: Optional[int] = None) -> float:
    """(2 pi h)^{-d} int_{|xi|^2 < tau} exp(i <z, xi>/h) d xi via J_{d/2}."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if d is None:
        d = z.size
    if tau <= 0:
        return 0.0
    r = math.sqrt(tau)
    k = float(np.linalg.norm(z)) * r / h
    # int_{|xi| < R} e^{i <k, xi>} = (2 pi)^{d/2} R^d J_{d/2}(kR) / (kR)^{d/2}
    return (2 * math.pi * h) ** (-d) * (2 * math.pi) ** (d / 2) * r**d * ball_fourier_ratio(d, k)


class QuadResult(NamedTuple):
    value: complex
    error: float
    nodes: int


def _ball_rule(d: int, n: int):
    """Tensor rule on the unit ball: Gauss in r (and cos theta), trapezoid in phi."""
    xr, wr = np.polynomial.legendre.leggauss(n)
    r, wr = 0.5 * (xr + 1), 0.5 * wr
    if d == 1:
        return xr[:, None], wr
    m = 2 * n
    phi = 2 * math.pi * np.arange(m) / m
    wphi = np.full(m, 2 * math.pi / m)
    if d == 2:
        R, P = np.meshgrid(r, phi, indexing="ij")
        W = np.outer(wr * r, wphi)
        pts = np.stack([R * np.cos(P), R * np.sin(P)], axis=-1)
        return pts.reshape(-1, 2), W.ravel()
    if d == 3:
        xu, wu = np.polynomial.legendre.leggauss(n)
        R, U, P = np.meshgrid(r, xu, phi, indexing="ij")
        S = np.sqrt(1 - U * U)
        W = (wr * r * r)[:, None, None] * wu[None, :, None] * wphi[None, None, :]
        pts = np.stack([R * S * np.cos(P), R * S * np.sin(P), R * U], axis=-1)
        return pts.reshape(-1, 3), W.ravel()
    raise ValueError("quadrature implemented for d <= 3")


def _ellipsoid(op: OperatorSpec, w: np.ndarray, tau: float):
    """Centre, radius and shape matrix of {xi : a(w, xi) < tau}."""
    g = op.metric(w)
    centre = op.magnetic_at(w)
    level = tau - op.potential_at(w)
    lam, vec = np.linalg.eigh(g)
    if lam.min() <= 0:
        raise QuadratureError("sublevel set is unbounded (metric not positive definite)")
    g_inv_half = vec @ np.diag(lam**-0.5) @ vec.T
    return centre, level, g_inv_half


def weyl_integral(op: OperatorSpec, z, w, tau: float, h: float,
                  rtol: float = QUAD_RTOL, max_nodes: int = 4096) -> QuadResult:
    """(2 pi h)^{-d} int_{a(w, xi) < tau} exp(i <z, xi>/h) d xi by grid doubling.

    The sublevel set is an ellipsoid; the grid is a tensor rule on the unit
    ball pulled back by the affine map onto it.
    """
    d = op.d
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    centre, level, m = _ellipsoid(op, w, tau)
    scale = (2 * math.pi * h) ** (-d)
    if level <= 0:
        return QuadResult(0.0j, 0.0, 0)
    rho = math.sqrt(level)
    jac = rho**d * abs(np.linalg.det(m))
    k = rho * (m @ z) / h
    shift = np.exp(1j * float(z @ centre) / h)
    diag_size = scale * jac * unit_ball_volume(d)
    n = max(16, int(0.6 * np.linalg.norm(k)) + 8)
    if n > max_nodes:
        raise QuadratureError(f"phase |k| = {np.linalg.norm(k):.3g} needs more than {max_nodes} nodes per axis")
    prev = None
    while True:
        pts, wts = _ball_rule(d, n)
        val = scale * jac * shift * np.sum(wts * np.exp(1j * (pts @ k)))
        if prev is not None:
            err = abs(val - prev)
            if err <= max(rtol * abs(val), QUAD_FLOOR * diag_size):
                return QuadResult(val, err, len(wts))
        if n >= max_nodes:
            raise QuadratureError(f"Weyl quadrature did not converge at n = {n}")
        prev = val
        n *= 2


def weyl_quadrature(op: OperatorSpec, pair: PointPair, tau: float, h: float,
                    full_output: bool = False, rtol: float = QUAD_RTOL):
    """e^W_h(x, y, tau) with the symbol frozen at the midpoint (x + y)/2.

    Returns the real part; without magnetic potential the imaginary part
    vanishes by symmetry of the sublevel set and this is checked.
    """
    res = weyl_integral(op, pair.x - pair.y, pair.midpoint, tau, h, rtol)
    if not op.has_magnetic:
        tol = max(10 * res.error, 1e-9 * abs(res.value), 1e-12)
        if abs(res.value.imag) > tol:
            raise QuadratureError(f"imaginary part {res.value.imag:.3e} does not vanish")
    if full_output:
        return res
    return float(res.value.real)


def _is_free(op: OperatorSpec) -> bool:
    if not op.has_constant_coefficients:
        return False
    x0 = np.zeros(op.d)
    return (np.allclose(op.metric(x0), np.eye(op.d)) and op.potential_at(x0) == 0.0
            and not op.has_magnetic)


def weyl_term(op: OperatorSpec, x, y, tau: float, h: float, freeze=None) -> float:
    """e^{0,W}(x, y): closed form for the free symbol, quadrature otherwise.

    The symbol is frozen at ``freeze`` (default: the midpoint).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if _is_free(op):
        return weyl_free_closed_form(x - y, tau, h, op.d)
    if freeze is None:
        return weyl_quadrature(op, PointPair(x, y), tau, h)
    return float(weyl_integral(op, x - y, freeze, tau, h).value.real)


def _bc_sign(bc: str) -> float:
    if bc == "dirichlet":
        return -1.0
    if bc == "neumann":
        return 1.0
    raise ValueError(f"boundary condition must be dirichlet or neumann, got {bc!r}")


def pair_wall(pair: PointPair, geom: DomainGeometry) -> tuple[int, int]:
    """Boundary face minimising nu(x) + nu(y)."""
    if geom.kind == "half_space":
        return 0, 0
    L = np.asarray(geom.lengths, dtype=float)
    dist = np.stack([pair.x[: len(L)] + pair.y[: len(L)],
                     2 * L - pair.x[: len(L)] - pair.y[: len(L)]], axis=1)
    axis, side = np.unravel_index(int(dist.argmin()), dist.shape)
    return int(axis), int(side)


def reflection_foot(pair: PointPair, geom: DomainGeometry, wall: tuple[int, int]) -> np.ndarray:
    """Midpoint of x and y~ moved onto the reflecting face."""
    axis, side = wall
    foot = 0.5 * (pair.x + reflect_point(pair.y, geom, wall))
    foot[axis] = 0.0 if side == 0 else geom.lengths[axis]
    return foot


def weyl_boundary(op: OperatorSpec, pair: PointPair, tau: float, h: float,
                  geom: DomainGeometry, bc: Optional[str] = None,
                  wall: Optional[tuple[int, int]] = None,
                  reflected_freeze: str = "foot") -> float:
    """e^{0,W}(x, y) - e^{0,W}(x, y~) for Dirichlet, + for Neumann.

    The direct term freezes the symbol at (x + y)/2.  The reflected term
    freezes it at the boundary foot (0, (x' + y')/2) by default, the point the
    boundary correction is expanded around; ``reflected_freeze="midpoint"``
    uses (x + y~)/2 instead.  Both agree for constant coefficients.
    """
    if geom.kind not in ("half_space", "box", "interval"):
        raise ValueError("weyl_boundary needs a half space, interval or box")
    if reflected_freeze not in ("foot", "midpoint"):
        raise ValueError("reflected_freeze must be 'foot' or 'midpoint'")
    sign = _bc_sign(bc or geom.boundary_condition)
    wall = wall or pair_wall(pair, geom)
    y_ref = reflect_point(pair.y, geom, wall)
    freeze = reflection_foot(pair, geom, wall) if reflected_freeze == "foot" else None
    direct = weyl_term(op, pair.x, pair.y, tau, h)
    return direct + sign * weyl_term(op, pair.x, y_ref, tau, h, freeze)


# --------------------------------------------------------------------------
# d = 2 boundary correction
# --------------------------------------------------------------------------

PHASE_FORMS = ("ray", "literal", "odd")


def correction_term(op: OperatorSpec, pair: PointPair, tau: float, h: float,
                    bc: str = "dirichlet", phase_form: str = "ray",
                    glancing_cutoff: float = GLANCING_CUTOFF) -> float:
    """Boundary-layer correction for d = 2 in normalized half-space coordinates.

    Integrates exp(i <x - y~, xi>/h) (exp(i psi) - 1) over {a(w, xi) < tau} with
    w = (0, (x_2 + y_2)/2), signed like the reflected Weyl term.  With
    kappa = (tau - b)^{-1/2} a_{x_1} and s = x_1^2 + y_1^2 the phase psi is

    * ``ray``: -kappa s xi_1 / (4 h sqrt(tau - b)), the exponent produced by
      straightening the reflected rays (x_1 -> x_1 + c x_1^2); equal to
      -sign(xi_1) kappa s / (4h) on the energy surface;
    * ``odd``: -sign(xi_1) kappa s / (4h);
    * ``literal``: kappa s / (2h), even in xi_1 (real part returned).

    The xi_1 integral is done in closed form; the xi_2 integral adaptively,
    dropping the glancing band tau - b <= glancing_cutoff * tau.
    """
    if op.d != 2:
        raise ValueError("the correction term is defined for d = 2")
    if phase_form not in PHASE_FORMS:
        raise ValueError(f"phase_form must be one of {PHASE_FORMS}")
    sign = _bc_sign(bc)
    x, y = pair.x, pair.y
    w2 = 0.5 * (x[1] + y[1])
    wpt = np.array([0.0, w2])
    op.check_boundary_normalization(wpt)
    if op.has_constant_coefficients:
        return 0.0
    s_sq = x[0] ** 2 + y[0] ** 2
    if s_sq == 0.0:
        return 0.0
    A = (x[0] + y[0]) / h
    B2 = (x[1] - y[1]) / h
    g22 = float(op.metric(wpt)[1, 1])
    c = float(op.magnetic_at(wpt)[1])
    level = tau - float(op.potential_at(wpt))
    if level <= 0:
        return 0.0
    r = math.sqrt(level / g22)
    beta_c = math.asin(min(1.0, math.sqrt(glancing_cutoff * tau / level)))

    def integrand(beta):
        xi2 = c + r * math.cos(beta)
        gap = tau - boundary_symbol(op, [w2], [xi2], check=False)
        if gap <= glancing_cutoff * tau:
            return 0.0j
        smax = math.sqrt(gap)
        lam = boundary_normal_derivative(op, [w2], [xi2])
        kap = lam / smax
        jac = r * math.sin(beta)
        if phase_form == "literal":
            psi = kap * s_sq / (2 * h)
            inner = 2 * _sinc_int(A, smax) * (np.exp(1j * psi) - 1)
        elif phase_form == "odd":
            psi = -kap * s_sq / (4 * h)
            pos = _exp_int(A, 0.0, smax)
            inner = (np.exp(1j * psi) - 1) * pos + (np.exp(-1j * psi) - 1) * np.conj(pos)
        else:
            slope = -lam * s_sq / (4 * h * gap)
            inner = _exp_int(A + slope, -smax, smax) - 2 * _sinc_int(A, smax)
        return jac * np.exp(1j * B2 * xi2) * inner

    lo, hi = beta_c, math.pi - beta_c
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            re, _ = integrate.quad(lambda b: integrand(b).real, lo, hi, limit=2000,
                                   epsabs=1e-11, epsrel=1e-9)
            im, _ = integrate.quad(lambda b: integrand(b).imag, lo, hi, limit=2000,
                                   epsabs=1e-11, epsrel=1e-9)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"correction term quadrature failed: {exc}") from exc
    val = sign * (2 * math.pi * h) ** (-2) * complex(re, im)
    return float(val.real)


def _sinc_int(a: float, s: float) -> float:
    """int_0^s cos(a t) dt."""
    return s if a == 0 else math.sin(a * s) / a


def _exp_int(a: float, lo: float, hi: float) -> complex:
    """int_lo^hi exp(i a t) dt."""
    if abs(a * (hi - lo)) < 1e-8:
        return complex(hi - lo) * np.exp(0.5j * a * (hi + lo))
    return (np.exp(1j * a * hi) - np.exp(1j * a * lo)) / (1j * a)


# --------------------------------------------------------------------------
# envelopes and regimes
# --------------------------------------------------------------------------

def trivial_bound(ell: float, h: float, d: int, C: float = 1.0) -> float:
    """C h^{1-d} (1 + 1/ell); infinite at ell = 0."""
    if ell <= 0:
        return math.inf
    return C * h ** (1 - d) * (1 + 1 / ell)


def leading_magnitude(ell: float, h: float, d: int) -> float:
    """h^{-(d-1)/2} ell^{-(d+1)/2}."""
    if ell <= 0:
        raise ValueError("leading magnitude needs ell > 0")
    return h ** (-(d - 1) / 2) * ell ** (-(d + 1) / 2)


def regime_thresholds(h: float, delta: float) -> dict:
    return {
        "a": h ** (1 / 3 + delta),
        "b": h ** (1 / 3 - delta),
        "c": h ** (2 / 3 - 2 * delta),
    }


def regime_classify(pair: PointPair, h: float, delta: float, geom: DomainGeometry,
                    c0: float = 1.0) -> RegimeTag:
    """First matching case among (a) ell <= h^{1/3+delta}, (b) ell >= h^{1/3-delta},
    (c) nu(x) + nu(y) >= c0 (ell^2 + h^{2/3-2 delta}); otherwise ``gap``."""
    if not 0 < delta < 1 / 6:
        raise ValueError("delta must lie in (0, 1/6)")
    th = regime_thresholds(h, delta)
    if not geom.has_boundary:
        return RegimeTag(Case.INTERIOR, delta, th)
    if pair.x.size >= 3:
        return RegimeTag(Case.D_GE_3, delta, th)
    dist = distances(pair, geom)
    ell = dist.ell
    if ell <= th["a"]:
        case = Case.A
    elif ell >= th["b"]:
        case = Case.B
    elif dist.nu_x + dist.nu_y >= c0 * (ell**2 + th["c"]):
        case = Case.C
    else:
        case = Case.GAP
    return RegimeTag(case, delta, th)
