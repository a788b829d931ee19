"""Second-order operator symbols, model domains and the scalar quantities built on them.

The operator is

    A = sum_{j,k} (hD_j - V_j(x)) g^{jk}(x) (hD_k - V_k(x)) + V(x)

with principal symbol a(x, xi) = sum g^{jk} (xi_j - V_j)(xi_k - V_k) + V.
Positions and covectors are 1-D numpy arrays of length ``d``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
import sympy

FD_STEP = 1e-5
LEVEL_SET_TOL = 1e-10


class DimensionError(ValueError):
    pass


class EmptyLevelSetError(ValueError):
    """The energy surface {xi : a(x, xi) = tau} is empty."""


class GlancingError(ValueError):
    """tau <= b(x', xi'): the boundary symbol reaches the energy level."""


class NormalizationError(ValueError):
    """Coefficients violate g^{1k} = delta_{1k}, V_1 = 0 on the boundary."""


class NoBoundaryError(ValueError):
    pass


# --------------------------------------------------------------------------
# coefficient fields
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientField:
    """A smooth scalar field on R^d.

    ``func`` maps an array of shape ``(..., d)`` to ``(...)``.  ``grad`` maps
    the same input to ``(..., d)``; when it is missing, partials fall back to
    central differences with step ``FD_STEP``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smoothness_hint: int = 2
    label: str = ""

    def eval(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.func(x), dtype=float)
        out = np.broadcast_to(out, x.shape[:-1])
        return float(out) if out.ndim == 0 else out.copy()

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            g = np.asarray(self.grad(x), dtype=float)
            return np.broadcast_to(g, x.shape).copy()
        d = x.shape[-1]
        out = np.empty(x.shape)
        for k in range(d):
            e = np.zeros(d)
            e[k] = FD_STEP
            out[..., k] = (self.eval(x + e) - self.eval(x - e)) / (2 * FD_STEP)
        return out

    def partial(self, k: int, x) -> np.ndarray | float:
        g = self.gradient(x)[..., k]
        return float(g) if np.ndim(g) == 0 else g

    @property
    def is_constant(self) -> bool:
        return self.label.startswith("const:")

    # constructors ---------------------------------------------------------

    @classmethod
    def constant(cls, c: float) -> "CoefficientField":
        c = float(c)
        return cls(
            func=lambda x: np.full(np.shape(x)[:-1], c),
            grad=lambda x: np.zeros(np.shape(x)),
            smoothness_hint=10**6,
            label=f"const:{c!r}",
        )

    @classmethod
    def linear(cls, slope: Sequence[float], offset: float = 0.0) -> "CoefficientField":
        slope = np.asarray(slope, dtype=float)
        offset = float(offset)
        return cls(
            func=lambda x: np.asarray(x) @ slope + offset,
            grad=lambda x: np.broadcast_to(slope, np.shape(x)),
            smoothness_hint=10**6,
            label=f"linear:{slope.tolist()}+{offset!r}",
        )

    @classmethod
    def from_expression(cls, expr: str, d: int) -> "CoefficientField":
        """Field from an arithmetic expression in ``x1..xd`` (``x`` aliases ``x1``).

        Partials are taken symbolically.
        """
        syms = sympy.symbols(" ".join(f"x{k + 1}" for k in range(d)), real=True)
        syms = (syms,) if d == 1 else tuple(syms)
        local = {f"x{k + 1}": s for k, s in enumerate(syms)}
        local["x"] = syms[0]
        e = sympy.sympify(expr, locals=local)
        f = sympy.lambdify(syms, e, "numpy")
        dfs = [sympy.lambdify(syms, sympy.diff(e, s), "numpy") for s in syms]

        def func(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(f(*np.moveaxis(x, -1, 0)), x.shape[:-1])

        def grad(x):
            x = np.asarray(x, dtype=float)
            cols = [np.broadcast_to(df(*np.moveaxis(x, -1, 0)), x.shape[:-1]) for df in dfs]
            return np.stack(cols, axis=-1)

        label = f"const:{float(e)!r}" if e.is_number else f"expr:{expr}"
        return cls(func=func, grad=grad, smoothness_hint=10**6, label=label)

    def mapped(self, matrix: np.ndarray, shift: np.ndarray) -> "CoefficientField":
        """The field x -> f(matrix @ x + shift), with chain-rule partials."""
        m = np.asarray(matrix, dtype=float)
        c = np.asarray(shift, dtype=float)

        def func(x):
            return self.func(np.asarray(x) @ m.T + c)

        def grad(x):
            return self.gradient(np.asarray(x) @ m.T + c) @ m

        return CoefficientField(func, grad, self.smoothness_hint,
                                self.label if self.is_constant else self.label + "@mapped")


# --------------------------------------------------------------------------
# operator and geometry
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorSpec:
    """Coefficients g^{jk}, V_j, V.  Only the upper triangle of the metric is stored."""

    d: int
    metric_upper: tuple  # ((g11, g12, ...), (g22, ...), ...) row j holds k >= j
    magnetic: tuple
    potential: CoefficientField
    name: str = "custom"

    def __post_init__(self):
        if self.d < 1:
            raise DimensionError("dimension must be >= 1")
        if len(self.metric_upper) != self.d or any(
            len(row) != self.d - j for j, row in enumerate(self.metric_upper)
        ):
            raise DimensionError("metric_upper must hold the d(d+1)/2 upper-triangle fields")
        if len(self.magnetic) != self.d:
            raise DimensionError("magnetic potential needs d components")

    @classmethod
    def from_fields(cls, metric, magnetic, potential, name="custom") -> "OperatorSpec":
        d = len(metric)
        upper = tuple(tuple(metric[j][k] for k in range(j, d)) for j in range(d))
        return cls(d, upper, tuple(magnetic), potential, name)

    def g_field(self, j: int, k: int) -> CoefficientField:
        if j > k:
            j, k = k, j
        return self.metric_upper[j][k - j]

    # pointwise evaluation (x may carry leading batch axes) ------------------

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise DimensionError(f"expected a position of length {self.d}, got {x.shape[-1]}")
        return x

    def metric(self, x) -> np.ndarray:
        x = self._check(x)
        out = np.empty(x.shape[:-1] + (self.d, self.d))
        for j in range(self.d):
            for k in range(j, self.d):
                out[..., j, k] = out[..., k, j] = self.g_field(j, k).eval(x)
        return out

    def metric_partials(self, x) -> np.ndarray:
        """``out[..., l, j, k] = d g^{jk} / d x_l``."""
        x = self._check(x)
        out = np.empty(x.shape[:-1] + (self.d, self.d, self.d))
        for j in range(self.d):
            for k in range(j, self.d):
                gr = self.g_field(j, k).gradient(x)
                out[..., :, j, k] = gr
                out[..., :, k, j] = gr
        return out

    def magnetic_at(self, x) -> np.ndarray:
        x = self._check(x)
        return np.stack([f.eval(x) * np.ones(x.shape[:-1]) for f in self.magnetic], axis=-1)

    def magnetic_partials(self, x) -> np.ndarray:
        """``out[..., l, j] = d V_j / d x_l``."""
        x = self._check(x)
        return np.stack([f.gradient(x) for f in self.magnetic], axis=-1)

    def potential_at(self, x):
        return self.potential.eval(self._check(x))

    @property
    def has_constant_coefficients(self) -> bool:
        fields = [f for row in self.metric_upper for f in row] + list(self.magnetic) + [self.potential]
        return all(f.is_constant for f in fields)

    @property
    def has_magnetic(self) -> bool:
        return not all(f.is_constant and f.eval(np.zeros(self.d)) == 0.0 for f in self.magnetic)

    # invariant checks --------------------------------------------------------

    def check_positive_definite(self, samples) -> float:
        """Minimum metric eigenvalue over the sample; raises if not positive."""
        g = self.metric(np.atleast_2d(samples))
        lam = float(np.linalg.eigvalsh(g).min())
        if lam <= 0:
            raise ValueError(f"metric not positive definite (min eigenvalue {lam:.3g})")
        return lam

    def check_boundary_normalization(self, samples, tol: float = 1e-12) -> None:
        """g^{1k} = delta_{1k} and V_1 = 0 at the sampled positions."""
        x = np.atleast_2d(np.asarray(samples, dtype=float))
        g = self.metric(x)
        target = np.zeros(self.d)
        target[0] = 1.0
        if np.abs(g[:, 0, :] - target).max() > tol:
            raise NormalizationError("g^{1k} != delta_{1k} on the boundary")
        if np.abs(self.magnetic[0].eval(x)).max() > tol:
            raise NormalizationError("V_1 != 0 on the boundary")

    def mapped(self, matrix, shift, name=None) -> "OperatorSpec":
        """Operator in coordinates x_old = matrix @ x_new + shift (matrix orthogonal)."""
        m = np.asarray(matrix, dtype=float)
        if not np.allclose(m @ m.T, np.eye(self.d)):
            raise ValueError("only orthogonal coordinate changes are supported")
        d = self.d
        # g_new = m^T g_old m and V_new = m^T V_old; with signed permutations each
        # entry is a single old field up to sign
        perm = np.abs(m).argmax(axis=0)
        sign = m[perm, np.arange(d)]
        if not np.allclose(np.abs(m).sum(axis=0), 1.0):
            raise ValueError("only signed permutations are supported")

        def scaled(f: CoefficientField, s: float) -> CoefficientField:
            g = f.mapped(m, shift)
            if s == 1.0:
                return g
            return CoefficientField(lambda x: s * g.func(x), lambda x: s * g.gradient(x),
                                    g.smoothness_hint,
                                    f"const:{s * f.eval(np.zeros(d))!r}" if f.is_constant else g.label)

        metric = [[scaled(self.g_field(perm[j], perm[k]), sign[j] * sign[k]) for k in range(d)]
                  for j in range(d)]
        magnetic = [scaled(self.magnetic[perm[j]], sign[j]) for j in range(d)]
        return OperatorSpec.from_fields(metric, magnetic, self.potential.mapped(m, shift),
                                        name or self.name + "@mapped")


def _identity_metric(d: int):
    one, zero = CoefficientField.constant(1.0), CoefficientField.constant(0.0)
    return [[one if j == k else zero for k in range(d)] for j in range(d)]


def free_operator(d: int = 2) -> OperatorSpec:
    """g = I, V_j = 0, V = 0: the symbol |xi|^2."""
    zero = CoefficientField.constant(0.0)
    return OperatorSpec.from_fields(_identity_metric(d), [zero] * d, zero, "free")


def schrodinger_operator(potential: CoefficientField, d: int, name="schrodinger") -> OperatorSpec:
    zero = CoefficientField.constant(0.0)
    return OperatorSpec.from_fields(_identity_metric(d), [zero] * d, potential, name)


def linear_potential_operator(alpha: float, d: int = 2) -> OperatorSpec:
    """|xi|^2 + alpha x_1."""
    slope = np.zeros(d)
    slope[0] = alpha
    return schrodinger_operator(CoefficientField.linear(slope), d, f"linear_potential({alpha!r})")


def separable_operator(v1: str, v2: str) -> OperatorSpec:
    """|xi|^2 + V1(x1) + V2(x2) in two dimensions; V1, V2 are expressions in ``x``."""
    e1 = sympy.sympify(v1, locals={"x": sympy.Symbol("x1", real=True)})
    e2 = sympy.sympify(v2, locals={"x": sympy.Symbol("x2", real=True)})
    field_ = CoefficientField.from_expression(str(e1 + e2), 2)
    return schrodinger_operator(field_, 2, f"separable({v1},{v2})")


def diagonal_metric_operator(diag: Sequence[float]) -> OperatorSpec:
    """Constant diagonal metric, no potentials."""
    d = len(diag)
    zero = CoefficientField.constant(0.0)
    metric = [[CoefficientField.constant(diag[j]) if j == k else zero for k in range(d)]
              for j in range(d)]
    return OperatorSpec.from_fields(metric, [zero] * d, zero, f"diag{tuple(diag)}")


_NAMED = re.compile(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$")


def named_operator(spec: str, d: int = 2) -> OperatorSpec:
    """Parse ``free``, ``linear_potential(alpha)`` or ``separable(V1,V2)``."""
    m = _NAMED.match(spec)
    if not m:
        raise ValueError(f"cannot parse operator spec {spec!r}")
    name, args = m.group(1), m.group(2)
    if name == "free":
        return free_operator(d)
    if name == "linear_potential":
        return linear_potential_operator(float(args), d)
    if name == "separable":
        parts = _split_top_level(args or "")
        if len(parts) != 2:
            raise ValueError("separable(V1,V2) needs two expressions")
        return separable_operator(*parts)
    raise ValueError(f"unknown operator {name!r}")


def _split_top_level(s: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur.append(ch)
    parts.append("".join(cur).strip())
    return [p for p in parts if p]


@dataclass(frozen=True)
class DomainGeometry:
    """``kind`` is one of full_space, half_space, interval, box.

    Intervals and boxes are [0, L_1] x ... x [0, L_d]; the half space is {x_1 > 0}.
    """

    kind: str
    lengths: tuple = ()
    boundary_condition: str = "none"

    def __post_init__(self):
        if self.kind not in ("full_space", "half_space", "interval", "box"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.boundary_condition not in ("dirichlet", "neumann", "none"):
            raise ValueError(f"unknown boundary condition {self.boundary_condition!r}")
        if self.kind in ("interval", "box"):
            if not self.lengths or any(L <= 0 for L in self.lengths):
                raise ValueError("interval/box lengths must be strictly positive")
            if self.kind == "interval" and len(self.lengths) != 1:
                raise ValueError("an interval has exactly one length")

    @property
    def has_boundary(self) -> bool:
        return self.kind != "full_space"

    def nu(self, x) -> float:
        """Distance to the boundary (0 for full space)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "full_space":
            return 0.0
        if self.kind == "half_space":
            return float(x[0])
        L = np.asarray(self.lengths, dtype=float)
        return float(np.minimum(x[: len(L)], L - x[: len(L)]).min())

    def nearest_wall(self, x) -> tuple[int, int]:
        """(axis, side) of the closest face; side 0 is x_axis = 0, side 1 is x_axis = L."""
        x = np.asarray(x, dtype=float)
        if self.kind == "half_space":
            return 0, 0
        if self.kind == "full_space":
            raise NoBoundaryError("full space has no boundary")
        L = np.asarray(self.lengths, dtype=float)
        dist = np.stack([x[: len(L)], L - x[: len(L)]], axis=1)
        axis, side = np.unravel_index(int(dist.argmin()), dist.shape)
        return int(axis), int(side)

    def contains(self, x, slack: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind == "full_space":
            return True
        if self.kind == "half_space":
            return x[0] >= -slack
        L = np.asarray(self.lengths, dtype=float)
        return bool(np.all(x[: len(L)] >= -slack) and np.all(x[: len(L)] <= L + slack))

    def wall_frame(self, axis: int, side: int, d: int):
        """Signed permutation ``m`` and shift ``c`` with x_old = m @ x_new + c such that
        the chosen face becomes {x_new_1 = 0} with the domain on x_new_1 > 0."""
        m = np.zeros((d, d))
        order = [axis] + [k for k in range(d) if k != axis]
        for new, old in enumerate(order):
            m[old, new] = 1.0
        c = np.zeros(d)
        if side == 1:
            m[axis, 0] = -1.0
            c[axis] = self.lengths[axis]
        return m, c


@dataclass(frozen=True)
class PointPair:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape:
            raise DimensionError("x and y must have the same dimension")

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.x + self.y)

    def swapped(self) -> "PointPair":
        return PointPair(self.y, self.x)


# --------------------------------------------------------------------------
# symbol and derived quantities
# --------------------------------------------------------------------------

def principal_symbol(op: OperatorSpec, x, xi):
    """a(x, xi) = sum g^{jk}(xi_j - V_j)(xi_k - V_k) + V."""
    x = op._check(x)
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != op.d:
        raise DimensionError(f"covector has length {xi.shape[-1]}, expected {op.d}")
    p = xi - op.magnetic_at(x)
    a = np.einsum("...j,...jk,...k->...", p, op.metric(x), p) + op.potential_at(x)
    return float(a) if np.ndim(a) == 0 else a


def symbol_gradient(op: OperatorSpec, x, xi) -> tuple[np.ndarray, np.ndarray]:
    """(grad_xi a, grad_x a), both analytic in the coefficient partials."""
    x = op._check(x)
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != op.d:
        raise DimensionError(f"covector has length {xi.shape[-1]}, expected {op.d}")
    p = xi - op.magnetic_at(x)
    g = op.metric(x)
    gp = np.einsum("...jk,...k->...j", g, p)
    grad_xi = 2.0 * gp
    # d/dx_l: p_j p_k dg^{jk}/dx_l - 2 (g p)_j dV_j/dx_l + dV/dx_l
    grad_x = (np.einsum("...j,...ljk,...k->...l", p, op.metric_partials(x), p)
              - 2.0 * np.einsum("...j,...lj->...l", gp, op.magnetic_partials(x))
              + op.potential.gradient(x))
    return grad_xi, grad_x


def symbol_hessian_xi(op: OperatorSpec, x) -> np.ndarray:
    return 2.0 * op.metric(x)


class MarginReport(NamedTuple):
    margin: float
    potential_gap: float


def _xi_grid(op: OperatorSpec, samples: np.ndarray, tau: float, n: int) -> np.ndarray:
    g = op.metric(samples)
    lam_min = float(np.linalg.eigvalsh(g).min())
    vmin = float(np.min(op.potential_at(samples)))
    radius = 1.5 * math.sqrt(max(abs(tau - vmin), 1.0) / lam_min)
    radius += float(np.abs(op.magnetic_at(samples)).max())
    axis = np.linspace(-radius, radius, n)  # odd n keeps xi = 0 on the grid
    mesh = np.meshgrid(*([axis] * op.d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def microhyperbolicity_margin(op: OperatorSpec, region_sample, tau: float,
                              n_xi: int = 41, on_shell: bool = False) -> MarginReport:
    """min of |a - tau| + |grad_xi a| over sampled x and a xi-grid.

    With ``on_shell`` the minimum runs over sampled points of the level set
    {a(x, .) = tau} instead, where only |grad_xi a| survives.  The second field
    is min |V(x) - tau| (the Schrodinger-type criterion).  Thresholding against
    epsilon_0 is left to the caller.
    """
    samples = np.atleast_2d(np.asarray(region_sample, dtype=float))
    if samples.size == 0:
        raise ValueError("region sample is empty")
    margin = math.inf
    for x in samples:
        if on_shell:
            try:
                pts = level_set_points(op, x, tau, 64)
            except EmptyLevelSetError:
                continue
            grad_xi, _ = symbol_gradient(op, np.broadcast_to(x, pts.shape), pts)
            vals = np.linalg.norm(grad_xi, axis=-1)
        else:
            xi = _xi_grid(op, x[None, :], tau, n_xi if n_xi % 2 else n_xi + 1)
            xs = np.broadcast_to(x, xi.shape)
            grad_xi, _ = symbol_gradient(op, xs, xi)
            vals = np.abs(principal_symbol(op, xs, xi) - tau) + np.linalg.norm(grad_xi, axis=-1)
        margin = min(margin, float(vals.min()))
    gap = float(np.min(np.abs(op.potential_at(samples) - tau)))
    return MarginReport(margin, gap)


def symbol_minimizer(op: OperatorSpec, x) -> np.ndarray:
    """argmin_xi a(x, xi); for the quadratic form this is xi = V_vec(x)."""
    return op.magnetic_at(np.asarray(x, dtype=float))


def _sphere_directions(d: int, n: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    # Fibonacci lattice on S^{d-1} for d = 3; random otherwise
    if d == 3:
        k = np.arange(n) + 0.5
        z = 1 - 2 * k / n
        phi = np.pi * (1 + 5 ** 0.5) * k
        r = np.sqrt(1 - z * z)
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    v = np.random.default_rng(0).normal(size=(n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def level_set_points(op: OperatorSpec, x, tau: float, n_samples: int) -> np.ndarray:
    """Points of {xi : a(x, xi) = tau} found by radial root-finding from argmin a(x, .).

    Bisection brackets the root, Newton polishes it to ``LEVEL_SET_TOL``.
    """
    x = np.asarray(x, dtype=float)
    center = symbol_minimizer(op, x)
    if principal_symbol(op, x, center) >= tau:
        raise EmptyLevelSetError(f"a(x, .) >= {tau} everywhere at x = {x.tolist()}")
    out = []
    for e in _sphere_directions(op.d, n_samples):
        f = lambda r: principal_symbol(op, x, center + r * e) - tau
        hi = 1.0
        while f(hi) < 0:
            hi *= 2.0
            if hi > 1e12:
                raise EmptyLevelSetError("level set is unbounded")
        lo = 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if f(mid) < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-6 * hi:
                break
        r = 0.5 * (lo + hi)
        for _ in range(50):
            gxi, _ = symbol_gradient(op, x, center + r * e)
            step = f(r) / float(gxi @ e)
            r -= step
            if abs(step) < LEVEL_SET_TOL:
                break
        out.append(center + r * e)
    return np.array(out)


def strong_convexity_check(op: OperatorSpec, x, tau: float, n_samples: int = 64) -> float:
    """Minimum principal curvature of {xi : a(x, xi) = tau} over sampled points.

    Curvatures are eigenvalues of the xi-Hessian projected on the tangent space,
    divided by |grad_xi a|.  Positive means strongly convex.
    """
    x = np.asarray(x, dtype=float)
    pts = level_set_points(op, x, tau, n_samples)
    hess = symbol_hessian_xi(op, x)
    kmin = math.inf
    for xi in pts:
        gxi, _ = symbol_gradient(op, x, xi)
        nrm = np.linalg.norm(gxi)
        n = gxi / nrm
        proj = np.eye(op.d) - np.outer(n, n)
        # tangent basis from the projector's range
        w, v = np.linalg.eigh(proj)
        tangent = v[:, w > 0.5]
        shape_op = tangent.T @ hess @ tangent / nrm
        kmin = min(kmin, float(np.linalg.eigvalsh(shape_op).min()))
    return kmin


class Distances(NamedTuple):
    ell0: float
    ell: float
    nu_x: float
    nu_y: float


def distances(pair: PointPair, geom: DomainGeometry) -> Distances:
    """(|x - y|, |x - y| + nu(x) + nu(y), nu(x), nu(y))."""
    ell0 = float(np.linalg.norm(pair.x - pair.y))
    nx, ny = geom.nu(pair.x), geom.nu(pair.y)
    return Distances(ell0, ell0 + nx + ny, nx, ny)


def reflect_point(y, geom: DomainGeometry, wall: Optional[tuple[int, int]] = None) -> np.ndarray:
    """Mirror image of ``y`` across a boundary face: (-y_1, y') for the half space.

    For intervals and boxes the face defaults to the one nearest ``y``.
    """
    if not geom.has_boundary:
        raise NoBoundaryError("reflection needs a boundary")
    y = np.array(y, dtype=float)
    axis, side = wall if wall is not None else geom.nearest_wall(y)
    if side == 0:
        y[axis] = -y[axis]
    else:
        y[axis] = 2 * geom.lengths[axis] - y[axis]
    return y


def boundary_symbol(op: OperatorSpec, xprime, xiprime, check: bool = True) -> float:
    """b(x', xi') = a(x, xi) at x_1 = xi_1 = 0, in normalized coordinates."""
    x = np.concatenate([[0.0], np.atleast_1d(np.asarray(xprime, dtype=float))])
    xi = np.concatenate([[0.0], np.atleast_1d(np.asarray(xiprime, dtype=float))])
    if check:
        op.check_boundary_normalization(x)
    return principal_symbol(op, x, xi)


def boundary_normal_derivative(op: OperatorSpec, xprime, xiprime) -> float:
    """lambda(x', xi') = d a / d x_1 at x_1 = xi_1 = 0."""
    x = np.concatenate([[0.0], np.atleast_1d(np.asarray(xprime, dtype=float))])
    xi = np.concatenate([[0.0], np.atleast_1d(np.asarray(xiprime, dtype=float))])
    _, grad_x = symbol_gradient(op, x, xi)
    return float(grad_x[0])


def kappa(op: OperatorSpec, xprime, xiprime, tau: float) -> float:
    """(tau - b(x', xi'))^{-1/2} * d a / d x_1 at x_1 = xi_1 = 0."""
    b = boundary_symbol(op, xprime, xiprime)
    if tau <= b:
        raise GlancingError(f"tau = {tau} <= b = {b}: glancing or hyperbolic-free point")
    return boundary_normal_derivative(op, xprime, xiprime) / math.sqrt(tau - b)
