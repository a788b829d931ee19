"""Exact spectral data on model domains and the kernels built from it.

A basis exposes ascending eigenvalues and a vectorised evaluator returning all
eigenfunction values at a point, so that

    e_h(x, y, tau) = sum_{lambda_n <= tau} phi_n(x) phi_n(y)

is a masked dot product.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, interpolate, linalg, special

from .operators import CoefficientField

TIE_RTOL = 1e-12
WEIGHT_CUTOFF = 1e-12


class ValidityCapError(ValueError):
    """Requested energy exceeds the range where the basis is trustworthy."""


def _closed(tau: float) -> float:
    # closed projector: ties lambda_n = tau count; absorb rounding in the eigenvalues
    return tau + TIE_RTOL * max(1.0, abs(tau))


class SpectralBasis:
    """Eigenvalues (ascending) and eigenfunction evaluator of an h-dependent operator."""

    eigenvalues: np.ndarray
    validity_cap: float
    h: float
    dim: int
    normalization = "L2"

    def values(self, x) -> np.ndarray:
        """phi_n(x) for every n, shape (n_modes,)."""
        raise NotImplementedError

    def eigenfunction_eval(self, index: int, x) -> float:
        return float(self.values(x)[index])

    def check_cap(self, tau: float) -> None:
        if tau > self.validity_cap:
            raise ValidityCapError(f"tau = {tau} above validity cap {self.validity_cap:.6g}")

    def __len__(self):
        return len(self.eigenvalues)


class IntervalBasis(SpectralBasis):
    """Closed-form eigenpairs of h^2 D^2 on (0, L)."""

    def __init__(self, L: float, bc: str, h: float, n_max: int):
        if L <= 0 or h <= 0:
            raise ValueError("need L > 0 and h > 0")
        if bc not in ("dirichlet", "neumann"):
            raise ValueError(f"unsupported boundary condition {bc!r}")
        self.L, self.bc, self.h, self.dim = float(L), bc, float(h), 1
        n0 = 1 if bc == "dirichlet" else 0
        self.n = np.arange(n0, n_max + 1)
        self.eigenvalues = (self.n * math.pi * self.h / self.L) ** 2
        self.validity_cap = float(self.eigenvalues[-1])

    @classmethod
    def up_to(cls, L: float, bc: str, h: float, tau_cap: float) -> "IntervalBasis":
        """Smallest closed-form basis containing every eigenvalue <= tau_cap."""
        n_max = int(math.floor(L * math.sqrt(max(tau_cap, 0.0)) / (math.pi * h))) + 1
        return cls(L, bc, h, max(n_max, 1))

    def values(self, x) -> np.ndarray:
        x = float(np.asarray(x).ravel()[0])
        k = self.n * math.pi / self.L
        if self.bc == "dirichlet":
            return math.sqrt(2.0 / self.L) * np.sin(k * x)
        out = math.sqrt(2.0 / self.L) * np.cos(k * x)
        out[self.n == 0] = math.sqrt(1.0 / self.L)
        return out


def interval_basis(L: float, bc: str, h: float, n_max: int) -> IntervalBasis:
    return IntervalBasis(L, bc, h, n_max)


class GridBasis(SpectralBasis):
    """Finite-difference eigenpairs of h^2 D^2 + V on (0, L).

    Second-order central differences on ``grid_n`` uniform cells; eigenfunctions
    are normalised by the trapezoidal rule and interpolated by 4-point cubic
    Lagrange stencils, with one reflected ghost node at each wall (odd for
    Dirichlet, even for Neumann).  Only eigenvalues below ``validity_cap`` are
    kept.
    """

    def __init__(self, L: float, bc: str, h: float, V: Optional[CoefficientField],
                 grid_n: int, cap_fraction: float = 0.1):
        if grid_n < 200:
            raise ValueError("grid_n must be at least 200")
        if bc not in ("dirichlet", "neumann"):
            raise ValueError(f"unsupported boundary condition {bc!r}")
        self.L, self.bc, self.h, self.grid_n, self.dim = float(L), bc, float(h), int(grid_n), 1
        dx = self.L / grid_n
        nodes = np.linspace(0.0, self.L, grid_n + 1)
        pot = np.zeros_like(nodes) if V is None else np.asarray(V.eval(nodes[:, None]), dtype=float)
        c = (self.h / dx) ** 2
        if bc == "dirichlet":
            inner = nodes[1:-1]
            diag = 2 * c + pot[1:-1]
            off = -c * np.ones(len(inner) - 1)
        else:
            # ghost-point Neumann, symmetrised with the trapezoidal weights
            diag = 2 * c + pot
            off = -c * np.ones(grid_n)
            off[0] *= math.sqrt(2.0)
            off[-1] *= math.sqrt(2.0)
        # top of the discrete spectrum of the kinetic part is 4 h^2 / dx^2
        self.validity_cap = cap_fraction * 4 * c + float(pot.min())
        lam, vec = linalg.eigh_tridiagonal(diag, off, select="v",
                                           select_range=(-np.inf, self.validity_cap))
        if bc == "dirichlet":
            full = np.zeros((grid_n + 1, len(lam)))
            full[1:-1] = vec
        else:
            full = vec.copy()
            full[0] *= math.sqrt(2.0)
            full[-1] *= math.sqrt(2.0)
        w = np.full(grid_n + 1, dx)
        w[[0, -1]] = dx / 2
        norms = np.sqrt(w @ full**2)
        full /= norms
        # fix signs so that every eigenfunction starts positive
        first = full[np.argmax(np.abs(full) > 1e-8 * np.abs(full).max(axis=0), axis=0),
                     np.arange(full.shape[1])]
        full *= np.where(first < 0, -1.0, 1.0)
        self.nodes, self.dx = nodes, dx
        self._set_modes(full)
        self.eigenvalues = lam

    def _set_modes(self, full: np.ndarray) -> None:
        sign = -1.0 if self.bc == "dirichlet" else 1.0
        self.modes = full
        self._padded = np.vstack([sign * full[1], full, sign * full[-2]])

    def values(self, x) -> np.ndarray:
        x = float(np.asarray(x).ravel()[0])
        s = min(max(x / self.dx, 0.0), self.grid_n)
        i = min(int(s), self.grid_n - 1)
        t = s - i
        w = ((t * (1 - t) * (t - 2)) / 6, (t + 1) * (t - 1) * (t - 2) / 2,
             (t + 1) * t * (2 - t) / 2, (t + 1) * t * (t - 1) / 6)
        m = self._padded
        # padded row k holds node k - 1
        return w[0] * m[i] + w[1] * m[i + 1] + w[2] * m[i + 2] + w[3] * m[i + 3]


def fd_sturm_liouville_basis(L: float, bc: str, h: float, V: Optional[CoefficientField],
                             grid_n: int, cap_fraction: float = 0.1) -> GridBasis:
    return GridBasis(L, bc, h, V, grid_n, cap_fraction)


class ProductBasis(SpectralBasis):
    """Tensor product phi_n(x_1) psi_m(x_2) of two 1-D bases, eigenvalues summed."""

    def __init__(self, first: SpectralBasis, second: SpectralBasis, tau_cap: float):
        if not math.isclose(first.h, second.h, rel_tol=1e-14):
            raise ValueError("both bases must share h")
        if (tau_cap - second.eigenvalues[0] > first.validity_cap
                or tau_cap - first.eigenvalues[0] > second.validity_cap):
            raise ValidityCapError("tau_cap exceeds the validity of a component basis")
        self.first, self.second, self.h, self.dim = first, second, first.h, 2
        lam = first.eigenvalues[:, None] + second.eigenvalues[None, :]
        i, j = np.nonzero(lam <= _closed(tau_cap))
        lam = lam[i, j]
        order = np.argsort(lam, kind="stable")
        self.i, self.j = i[order], j[order]
        self.eigenvalues = lam[order]
        self.validity_cap = float(tau_cap)

    def values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.first.values(x[0])[self.i] * self.second.values(x[1])[self.j]


def separable_2d_basis(basis1: SpectralBasis, basis2: SpectralBasis, tau_cap: float) -> ProductBasis:
    return ProductBasis(basis1, basis2, tau_cap)


def exact_projector_kernel(basis: SpectralBasis, x, y, tau: float) -> float:
    """e_h(x, y, tau) = sum over lambda_n <= tau of phi_n(x) phi_n(y)."""
    basis.check_cap(tau)
    n = int(np.searchsorted(basis.eigenvalues, _closed(tau), side="right"))
    if n == 0:
        return 0.0
    return float(np.dot(basis.values(x)[:n], basis.values(y)[:n]))


# --------------------------------------------------------------------------
# Tauberian smoothing
# --------------------------------------------------------------------------

def _smooth_step(u):
    """0 for u <= 0, 1 for u >= 1, C-infinity in between."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = (u > 0) & (u < 1)
    with np.errstate(over="ignore"):
        a = np.exp(-1.0 / u[m])
        b = np.exp(-1.0 / (1.0 - u[m]))
    out[m] = a / (a + b)
    out[u >= 1] = 1.0
    return out


TRANSITION = 0.5


def bump_chi(t):
    """Even cutoff: 1 on [-1/2, 1/2], 0 outside (-1, 1)."""
    out = _smooth_step((1.0 - np.abs(np.asarray(t, dtype=float))) / TRANSITION)
    return float(out) if out.ndim == 0 else out


@functools.lru_cache(maxsize=65536)
def _bump_fourier_cached(s: float) -> float:
    if s == 0.0:
        flat = 1.0
    else:
        flat = math.sin(0.5 * s) / s
    edge, _ = integrate.quad(lambda t: float(bump_chi(t)), 1 - TRANSITION, 1.0,
                             weight="cos", wvar=s, limit=400, epsabs=1e-14, epsrel=1e-12)
    return 2.0 * (flat + edge)


def bump_fourier(s: float) -> complex:
    """int chi(t) e^{-i s t} dt (real, since chi is even)."""
    return complex(_bump_fourier_cached(float(abs(s))), 0.0)


# composite Gauss-Legendre rule on the transition band [1/2, 1]
_GL_PANELS, _GL_ORDER = 128, 16
_x, _w = np.polynomial.legendre.leggauss(_GL_ORDER)
_edges = np.linspace(1 - TRANSITION, 1.0, _GL_PANELS + 1)
_lo, _hi = _edges[:-1, None], _edges[1:, None]
_T_NODES = ((_hi - _lo) / 2 * _x + (_hi + _lo) / 2).ravel()
_T_WEIGHTS = (((_hi - _lo) / 2 * _w).ravel() * bump_chi(_T_NODES) / _T_NODES)
del _x, _w, _edges, _lo, _hi
STEP_SATURATION = 1000.0


def smoothed_step(u):
    """w(u) = (2 pi)^{-1} int_{-inf}^{u} chi^(s) ds.

    Evaluated as 1/2 + (Si(u/2) + int_{1/2}^{1} chi(t) sin(u t)/t dt) / pi; for
    |u| >= STEP_SATURATION the value is 0 or 1 to below 1e-13.
    """
    u = np.asarray(u, dtype=float)
    flat = u.ravel()
    out = np.where(flat > 0, 1.0, 0.0)
    live = np.nonzero(np.abs(flat) < STEP_SATURATION)[0]
    for start in range(0, len(live), 2048):
        idx = live[start:start + 2048]
        uu = flat[idx]
        si, _ = special.sici(0.5 * uu)
        edge = np.sin(np.outer(uu, _T_NODES)) @ _T_WEIGHTS
        out[idx] = 0.5 + (si + edge) / math.pi
    out = out.reshape(u.shape)
    return float(out) if out.ndim == 0 else out


TABLE_STEP = 0.01


@functools.lru_cache(maxsize=1)
def _step_table() -> interpolate.CubicSpline:
    u = np.arange(-STEP_SATURATION, STEP_SATURATION + TABLE_STEP / 2, TABLE_STEP)
    return interpolate.CubicSpline(u, smoothed_step(u))


def smoothed_step_table(u):
    """Cubic-spline interpolant of ``smoothed_step`` on a grid of step 0.01.

    w has spectrum in [-1, 1], so its fourth derivative is bounded by 1 and
    the interpolation error stays below 1e-10.  Built once per process.
    """
    u = np.asarray(u, dtype=float)
    out = np.where(u > 0, 1.0, 0.0)
    live = np.abs(u) < STEP_SATURATION
    out[live] = _step_table()(u[live])
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TaperSpec:
    """Time window T for the smoothed kernel; the bump is fixed (``bump_chi``)."""

    T: float

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")

    def chi(self, t):
        return bump_chi(np.asarray(t) / self.T)

    def weights(self, tau: float, eigenvalues, h: float) -> np.ndarray:
        return smoothed_step_table((tau - np.asarray(eigenvalues)) * self.T / h)


def tauberian_kernel(basis: SpectralBasis, taper: TaperSpec, x, y, tau: float, h: float) -> float:
    """sum_n phi_n(x) phi_n(y) w((tau - lambda_n) T / h).

    Modes whose weight is below ``WEIGHT_CUTOFF`` are dropped; the sum then
    requires the basis to be complete up to the last mode with non-negligible
    weight.
    """
    basis.check_cap(tau)
    lam = basis.eigenvalues
    # weights vanish (to 1e-13) once (lambda - tau) T / h >= STEP_SATURATION
    upper = tau + STEP_SATURATION * h / taper.T
    n = int(np.searchsorted(lam, upper, side="right"))
    if n == len(lam) and upper > basis.validity_cap:
        w_last = smoothed_step((tau - basis.validity_cap) * taper.T / h)
        if abs(w_last) > WEIGHT_CUTOFF:
            raise ValidityCapError(
                f"smoothing window reaches beyond the validity cap (weight {w_last:.2e} at cap)")
    w = taper.weights(tau, lam[:n], h)
    keep = np.abs(w) >= WEIGHT_CUTOFF
    return float(np.sum((basis.values(x)[:n] * basis.values(y)[:n] * w)[keep]))


def tauberian_reach(tau: float, h: float, T: float) -> float:
    """Energy above which smoothed weights are below 1e-12 (basis must cover it)."""
    u = 1.0
    while abs(smoothed_step(-u)) > WEIGHT_CUTOFF and u < STEP_SATURATION:
        u *= 1.25
    return tau + u * h / T


# --------------------------------------------------------------------------
# caching format
# --------------------------------------------------------------------------

def save_basis(basis: GridBasis | IntervalBasis, path) -> None:
    """Text format: a header line ``L bc h grid_n`` then one eigenpair per line
    (eigenvalue followed by nodal values; closed-form bases store the index)."""
    with open(path, "w", encoding="utf-8") as fh:
        if isinstance(basis, GridBasis):
            fh.write(f"{basis.L!r} {basis.bc} {basis.h!r} {basis.grid_n} {basis.validity_cap!r}\n")
            for k, lam in enumerate(basis.eigenvalues):
                fh.write(" ".join([repr(float(lam))] + [repr(float(v)) for v in basis.modes[:, k]]))
                fh.write("\n")
        elif isinstance(basis, IntervalBasis):
            fh.write(f"{basis.L!r} {basis.bc} {basis.h!r} 0 {basis.validity_cap!r}\n")
            for n, lam in zip(basis.n, basis.eigenvalues):
                fh.write(f"{float(lam)!r} {int(n)}\n")
        else:
            raise TypeError("only 1-D bases are serialised")


def load_basis(path) -> GridBasis | IntervalBasis:
    with open(path, encoding="utf-8") as fh:
        L, bc, h, grid_n, cap = fh.readline().split()
        rows = [line.split() for line in fh if line.strip()]
    L, h, grid_n, cap = float(L), float(h), int(grid_n), float(cap)
    if grid_n == 0:
        b = IntervalBasis(L, bc, h, int(rows[-1][1]))
        return b
    b = GridBasis.__new__(GridBasis)
    b.L, b.bc, b.h, b.grid_n, b.dim = L, bc, h, grid_n, 1
    b.dx = L / grid_n
    b.nodes = np.linspace(0.0, L, grid_n + 1)
    b.validity_cap = cap
    b.eigenvalues = np.array([float(r[0]) for r in rows])
    b._set_modes(np.array([[float(v) for v in r[1:]] for r in rows]).T)
    return b
