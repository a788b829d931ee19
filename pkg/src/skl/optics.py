"""Hamiltonian flow, one-reflection billiards, stationary points and eikonal phases.

Everything here works in normalized half-space coordinates: the boundary is
{x_1 = 0}, the domain is x_1 > 0 and g^{1k} = delta_{1k}, V_1 = 0 on it, so a
specular reflection flips xi_1 only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .operators import (DomainGeometry, EmptyLevelSetError, NoBoundaryError, OperatorSpec,
                        PointPair, distances, principal_symbol, symbol_gradient)

FLOW_RTOL = 1e-12
FLOW_ATOL = 1e-13
ENERGY_TOL = 1e-8
NEWTON_MAXITER = 50
NEWTON_STEP_TOL = 1e-12
FAN_SIZE = 41
CAUSTIC_RATIO = 1e-6


class FlowError(RuntimeError):
    """Integrator failure: step collapse, energy drift or leaving the valid region."""


class BilliardError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


class CausticError(RuntimeError):
    pass


class IncidenceError(ValueError):
    """Reflected phase requested where the normal derivative is below threshold."""


# --------------------------------------------------------------------------
# Hamiltonian flow
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Integral curve of H_a sampled at the integrator steps, with cubic dense output."""

    times: np.ndarray
    states: np.ndarray  # (n, 2d): x then xi
    energy: float
    derivatives: np.ndarray = field(repr=False, default=None)

    @property
    def d(self) -> int:
        return self.states.shape[1] // 2

    def __call__(self, t) -> np.ndarray:
        spline = CubicHermiteSpline(self.times, self.states, self.derivatives, axis=0)
        return spline(t)

    @property
    def start(self) -> np.ndarray:
        return self.states[0]

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    def energy_drift(self, op: OperatorSpec) -> float:
        d = self.d
        a = principal_symbol(op, self.states[:, :d], self.states[:, d:])
        return float(np.max(np.abs(a - self.energy)))

    def to_csv(self, path) -> None:
        d = self.d
        header = ["t"] + [f"x{k + 1}" for k in range(d)] + [f"xi{k + 1}" for k in range(d)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, s in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in s])


def _rhs(op: OperatorSpec):
    d = op.d

    def f(t, s):
        gxi, gx = symbol_gradient(op, s[:d], s[d:])
        return np.concatenate([gxi, -gx])

    return f


def hamiltonian_flow(op: OperatorSpec, x0, xi0, t_span, rtol: float = FLOW_RTOL,
                     atol: float = FLOW_ATOL, max_step: float = np.inf,
                     valid: Optional[Callable[[np.ndarray], bool]] = None,
                     events=None) -> Trajectory:
    """Integrate x' = grad_xi a, xi' = -grad_x a with an 8th-order Runge-Kutta scheme.

    ``t_span`` is (t0, t1) or a single end time (t0 = 0); t1 < t0 flows backwards.
    ``valid`` marks the region where the coefficients may be evaluated.
    Raises FlowError on step collapse, energy drift above 1e-8 (1 + |E|) or exit
    from ``valid``.
    """
    x0 = np.asarray(x0, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    if np.ndim(t_span) == 0:
        t_span = (0.0, float(t_span))
    t0, t1 = float(t_span[0]), float(t_span[1])
    s0 = np.concatenate([x0, xi0])
    energy = float(principal_symbol(op, x0, xi0))
    if t1 == t0:
        deriv = _rhs(op)(t0, s0)[None, :]
        return Trajectory(np.array([t0]), s0[None, :], energy, deriv)
    sol = solve_ivp(_rhs(op), (t0, t1), s0, method="DOP853", rtol=rtol, atol=atol,
                    max_step=max_step, events=events)
    if sol.status == -1:
        raise FlowError(f"integration failed: {sol.message}")
    states = sol.y.T
    times = sol.t
    if valid is not None:
        bad = [k for k, s in enumerate(states) if not valid(s[: op.d])]
        if bad:
            raise FlowError(f"trajectory left the valid region at t = {times[bad[0]]:.6g}")
    traj = Trajectory(times, states, energy,
                      np.array([_rhs(op)(t, s) for t, s in zip(times, states)]))
    drift = traj.energy_drift(op)
    if drift > ENERGY_TOL * (1 + abs(energy)):
        raise FlowError(f"energy drift {drift:.3e} exceeds tolerance")
    return traj


def _flow_end(op, x0, xi0, t, **kw) -> np.ndarray:
    return hamiltonian_flow(op, x0, xi0, t, **kw).end


# --------------------------------------------------------------------------
# reflection and billiards
# --------------------------------------------------------------------------

def _require_half_space(geom: DomainGeometry) -> None:
    if not geom.has_boundary:
        raise NoBoundaryError("reflection needs a boundary")
    if geom.kind != "half_space":
        raise ValueError("work in normalized half-space coordinates "
                         "(map a box face with DomainGeometry.wall_frame first)")


def reflect_covector(xi, geom: DomainGeometry, op: Optional[OperatorSpec] = None,
                     xprime=None) -> np.ndarray:
    """Specular reflection xi_1 -> -xi_1.

    When ``op`` and the boundary point ``xprime`` are given the normalization
    g^{1k} = delta_{1k}, V_1 = 0 is checked there first.
    """
    _require_half_space(geom)
    if op is not None and xprime is not None:
        op.check_boundary_normalization(np.concatenate([[0.0], np.atleast_1d(xprime)]))
    out = np.array(xi, dtype=float)
    out[0] = -out[0]
    return out


def _orthonormal_complement(e: np.ndarray) -> np.ndarray:
    """Columns span e^perp."""
    d = e.size
    q, _ = np.linalg.qr(np.column_stack([e, np.eye(d)]))
    return q[:, 1:d]


def covector_on_level(op: OperatorSpec, x, direction, energy: float, branch: float = 1.0) -> float:
    """Root mu of a(x, mu * direction) = energy (``branch`` picks the larger/smaller root)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(direction, dtype=float)
    g = op.metric(x)
    vm = op.magnetic_at(x)
    A = float(u @ g @ u)
    B = float(u @ g @ vm)
    C = float(vm @ g @ vm) + float(op.potential_at(x)) - energy
    disc = B * B - A * C
    if disc < 0:
        raise EmptyLevelSetError("direction does not meet the energy surface")
    return (B + branch * math.sqrt(disc)) / A


@dataclass(frozen=True)
class BilliardRay:
    leg_in: Trajectory
    leg_out: Trajectory
    reflection_point: np.ndarray
    incidence_angle: float
    total_time: float
    angle_ratio: float  # incidence angle / ((nu(x) + nu(y)) / ell)

    def to_csv(self, path) -> None:
        d = self.leg_in.d
        header = ["leg", "t"] + [f"x{k + 1}" for k in range(d)] + [f"xi{k + 1}" for k in range(d)]
        t_off = self.leg_in.times[-1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for leg, traj, off in (("in", self.leg_in, 0.0), ("out", self.leg_out, t_off)):
                for t, s in zip(traj.times, traj.states):
                    w.writerow([leg, repr(float(t + off))] + [repr(float(v)) for v in s])


def _hit_wall(t, s):
    return s[0]


_hit_wall.terminal = True
_hit_wall.direction = -1


def billiard_connect(op: OperatorSpec, x, y, tau: float, geom: DomainGeometry,
                     c0: float = 1.0, eps: Optional[float] = None, tol: float = 1e-11,
                     max_time: Optional[float] = None) -> BilliardRay:
    """The one-reflection billiard from y to x on the energy surface a = tau.

    Shooting: the launch covector at y is mu(omega) omega with omega a unit
    direction parameterised around the mirror-image guess, the ray is flowed to
    x_1 = 0, reflected and flowed for a time s; Newton on (omega, s) drives the
    end point onto x.
    """
    _require_half_space(geom)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pair = PointPair(x, y)
    dist = distances(pair, geom)
    if dist.ell == 0 or dist.nu_x + dist.nu_y < c0 * dist.ell**2:
        raise BilliardError("nu(x) + nu(y) >= c0 ell^2 fails; no one-reflection ray is guaranteed")
    if eps is not None and dist.ell > eps:
        raise BilliardError(f"ell = {dist.ell:.3g} exceeds the configured eps = {eps:.3g}")
    d = op.d
    x_img = x.copy()
    x_img[0] = -x_img[0]
    e0 = (x_img - y) / np.linalg.norm(x_img - y)
    basis = _orthonormal_complement(e0)
    speed0 = np.linalg.norm(symbol_gradient(op, y, covector_on_level(op, y, e0, tau) * e0)[0])
    if max_time is None:
        max_time = 10.0 * dist.ell / speed0
    # free seed for the second leg: distance from the wall to x along the image line
    s_seed = np.linalg.norm(x_img - y) * x[0] / (x[0] + y[0]) / speed0

    def launch(p):
        om = e0 + basis @ p
        om /= np.linalg.norm(om)
        return covector_on_level(op, y, om, tau) * om

    def shoot(params, keep=False):
        p, s = params[: d - 1], params[d - 1]
        xi0 = launch(p)
        leg1 = hamiltonian_flow(op, y, xi0, (0.0, max_time), events=_hit_wall)
        if leg1.times[-1] >= max_time or leg1.end[0] > 1e-9:
            raise BilliardError("ray does not reach the boundary within the flight-time cap")
        hit = leg1.end
        xi_r = reflect_covector(hit[d:], geom)
        leg2 = hamiltonian_flow(op, hit[:d], xi_r, (0.0, s))
        if keep:
            return leg1, leg2
        return leg2.end[:d] - x

    params = np.concatenate([np.zeros(d - 1), [s_seed]])
    for _ in range(NEWTON_MAXITER):
        r = shoot(params)
        if np.linalg.norm(r) < tol:
            break
        J = np.empty((d, d))
        for k in range(d):
            step = 1e-7 * max(1.0, abs(params[k]))
            pp = params.copy()
            pp[k] += step
            pm = params.copy()
            pm[k] -= step
            J[:, k] = (shoot(pp) - shoot(pm)) / (2 * step)
        delta = np.linalg.solve(J, -r)
        params = params + delta
        if np.linalg.norm(delta) < NEWTON_STEP_TOL:
            r = shoot(params)
            break
    else:
        raise BilliardError("shooting did not converge (condition on nu or eps likely violated)")
    if np.linalg.norm(r) > 1e-8:
        raise BilliardError(f"shooting stalled with miss {np.linalg.norm(r):.2e}")
    leg1, leg2 = shoot(params, keep=True)
    # a ray that passes through x before touching the wall is a direct ray
    if np.min(np.linalg.norm(leg1.states[:, :d] - x, axis=1)) < 1e-8:
        raise BilliardError("direct ray reaches x before the boundary")
    hit = leg1.end
    xi_hit = hit[d:]
    angle = math.atan2(abs(xi_hit[0]), float(np.linalg.norm(xi_hit[1:])))
    ratio = angle / ((dist.nu_x + dist.nu_y) / dist.ell)
    refl = hit[:d].copy()
    return BilliardRay(leg1, leg2, refl, angle, float(leg1.times[-1] + leg2.times[-1]), ratio)


# --------------------------------------------------------------------------
# stationary points of <x - y, theta> + t (a(y, theta) - tau)
# --------------------------------------------------------------------------

def stationary_points(op: OperatorSpec, x, y, tau: float):
    """Solutions of x - y = -t' grad_theta a(y, theta), a(y, theta) = tau, +-t' > 0.

    Returns (theta_plus, theta_minus, t_plus, t_minus).  Newton on (theta, t')
    seeded from the isotropic solution with the metric frozen at the midpoint.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = x - y
    if not np.any(z):
        raise ValueError("stationary points need x != y")
    d = op.d
    gy = op.metric(y)
    gw = op.metric(0.5 * (x + y))
    vm = op.magnetic_at(y)
    level = tau - float(op.potential_at(y))
    if level <= 0:
        raise EmptyLevelSetError("energy surface at y is empty")
    out = []
    for sgn in (1.0, -1.0):
        # isotropic guess: theta - V parallel to -sgn g^{-1} z
        u = -sgn * np.linalg.solve(gw, z)
        theta = vm + u * math.sqrt(level / float(u @ gy @ u))
        grad = 2 * gy @ (theta - vm)
        tp = -float(z @ grad) / float(grad @ grad)
        p = np.concatenate([theta, [tp]])
        for _ in range(NEWTON_MAXITER):
            th, t = p[:d], p[d]
            grad = 2 * gy @ (th - vm)
            F = np.concatenate([z + t * grad, [principal_symbol(op, y, th) - tau]])
            J = np.zeros((d + 1, d + 1))
            J[:d, :d] = 2 * t * gy
            J[:d, d] = grad
            J[d, :d] = grad
            step = np.linalg.solve(J, -F)
            p = p + step
            if np.linalg.norm(step) < NEWTON_STEP_TOL * max(1.0, np.linalg.norm(p)):
                break
        else:
            raise ConvergenceError("Newton for the stationary point diverged")
        th, t = p[:d], p[d]
        if sgn * t <= 0:
            raise ConvergenceError("stationary point landed on the wrong branch")
        out.append((th, float(t)))
    (th_p, t_p), (th_m, t_m) = out
    return th_p, th_m, t_p, t_m


def stationary_residual(op: OperatorSpec, x, y, tau: float, theta, t) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    grad = symbol_gradient(op, y, theta)[0]
    return float(max(np.abs(x - y + t * grad).max(), abs(principal_symbol(op, y, theta) - tau)))


# --------------------------------------------------------------------------
# eikonal phases by characteristics
# --------------------------------------------------------------------------

def _phase_rhs(op: OperatorSpec):
    d = op.d

    def f(t, s):
        gxi, gx = symbol_gradient(op, s[:d], s[d: 2 * d])
        return np.concatenate([gxi, -gx, [float(s[d: 2 * d] @ gxi)]])

    return f


def _characteristic(op, x0, xi0, phi0, t):
    """End state (x, xi, phi) after time t along the characteristic from (x0, xi0)."""
    s0 = np.concatenate([x0, xi0, [phi0]])
    if t == 0:
        return s0
    sol = solve_ivp(_phase_rhs(op), (0.0, t), s0, method="DOP853",
                    rtol=FLOW_RTOL, atol=FLOW_ATOL)
    if sol.status == -1:
        raise FlowError(f"characteristic integration failed: {sol.message}")
    return sol.y[:, -1]


class EikonalPhase:
    """Solution of a(x, grad_x phi) = a(y, theta) built from characteristics.

    ``incident``: phi = 0 on the hyperplane <x - y, theta> = 0 with gradient
    normal to it there, so grad phi(y) = theta.
    ``reflected``: launched from x_1 = 0 with phi = phi0 and d phi/d x_1 =
    -d phi0/d x_1, phi0 the incident phase.

    A fan of characteristics is cached at construction and seeds a Newton
    shoot onto each query point; the fan Jacobian guards against caustics.
    """

    def __init__(self, op: OperatorSpec, y, theta, variant: str = "incident",
                 geom: Optional[DomainGeometry] = None, window: float = 1.0,
                 sigma_min: float = 0.0, c0: float = 1.0, T: float = 0.0,
                 fan_size: int = FAN_SIZE, max_time: Optional[float] = None):
        if variant not in ("incident", "reflected"):
            raise ValueError("variant must be 'incident' or 'reflected'")
        self.op = op
        self.y = np.asarray(y, dtype=float)
        self.theta = np.asarray(theta, dtype=float)
        self.variant = variant
        self.geom = geom
        self.window = float(window)
        self.energy = float(principal_symbol(op, self.y, self.theta))
        self.sigma_threshold = max(c0 * T, sigma_min)
        self._opts = dict(geom=geom, window=window, sigma_min=sigma_min, c0=c0, T=T,
                          fan_size=fan_size, max_time=max_time)
        d = op.d
        self.d = d
        self.cache: dict[tuple, tuple[float, np.ndarray]] = {}
        self.boundary_cache: dict[tuple, tuple[float, np.ndarray, np.ndarray]] = {}
        speed = np.linalg.norm(symbol_gradient(op, self.y, self.theta)[0])
        self.max_time = max_time if max_time is not None else 10.0 * self.window / speed
        if variant == "incident":
            self.normal = self.theta / np.linalg.norm(self.theta)
            self.transverse = _orthonormal_complement(self.normal)
            self.branch = self._pick_branch()
            self.incident = self
        else:
            if geom is None:
                raise ValueError("the reflected phase needs a geometry")
            _require_half_space(geom)
            self.transverse = np.eye(d)[:, 1:]
            self.incident = EikonalPhase(op, y, theta, "incident", window=window,
                                         fan_size=fan_size, max_time=max_time)
        self.fan = self._build_fan(fan_size)

    def with_theta(self, theta) -> "EikonalPhase":
        return EikonalPhase(self.op, self.y, theta, self.variant, **self._opts)

    # launch data ---------------------------------------------------------

    def _pick_branch(self) -> float:
        mu = np.linalg.norm(self.theta)
        best = min((1.0, -1.0), key=lambda b: abs(
            covector_on_level(self.op, self.y, self.normal, self.energy, b) - mu))
        return best

    def launch(self, s) -> tuple[np.ndarray, np.ndarray, float]:
        """Start point, covector and phase value of the characteristic with fan coordinate s."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.variant == "incident":
            x0 = self.y + self.transverse @ s
            mu = covector_on_level(self.op, x0, self.normal, self.energy, self.branch)
            return x0, mu * self.normal, 0.0
        xb = np.concatenate([[0.0], self.y[1:] + s])
        phi0, grad0 = self.incident.evaluate_with_gradient(xb)
        xi = grad0.copy()
        xi[0] = -xi[0]
        return xb, xi, phi0

    def _build_fan(self, n: int):
        d = self.d
        half = 0.5 * 4.0 * self.window if self.variant == "incident" else 2.0 * self.window
        grid1 = np.linspace(-half, half, n if d == 2 else max(9, n // 4))
        if d == 1:
            coords = [np.zeros(0)]
        else:
            mesh = np.meshgrid(*([grid1] * (d - 1)), indexing="ij")
            coords = [np.array(c) for c in np.stack([m.ravel() for m in mesh], axis=1)]
        times = np.linspace(-self.max_time, self.max_time, 2 * n + 1)
        fan = []
        for s in coords:
            try:
                x0, xi0, phi0 = self.launch(s)
            except (EmptyLevelSetError, CausticError, ConvergenceError):
                continue
            s0 = np.concatenate([x0, xi0, [phi0]])
            pts = []
            for direction in (1.0, -1.0):
                sol = solve_ivp(_phase_rhs(self.op), (0.0, direction * self.max_time), s0,
                                method="DOP853", rtol=1e-9, atol=1e-11,
                                t_eval=np.sort(times[times * direction >= 0])[::int(direction)])
                for t, st in zip(sol.t, sol.y.T):
                    pts.append((s, t, st[:d]))
            fan.append(pts)
        if not fan:
            raise CausticError("no characteristic could be launched")
        return [p for pts in fan for p in pts]

    # evaluation ------------------------------------------------------------

    def _end(self, s, t):
        x0, xi0, phi0 = self.launch(s)
        return _characteristic(self.op, x0, xi0, phi0, t)

    def _jac(self, p):
        n = p.size
        J = np.empty((self.d, n))
        for k in range(n):
            h = 1e-6 * max(1.0, abs(p[k]))
            pp = p.copy()
            pp[k] += h
            pm = p.copy()
            pm[k] -= h
            J[:, k] = (self._end(pp[:-1], pp[-1])[: self.d] - self._end(pm[:-1], pm[-1])[: self.d]) / (2 * h)
        return J

    def _solve(self, x):
        d = self.d
        x = np.asarray(x, dtype=float)
        seed = min(self.fan, key=lambda item: float(np.sum((item[2] - x) ** 2)))
        p = np.concatenate([np.atleast_1d(seed[0]), [seed[1]]]).astype(float)
        for _ in range(NEWTON_MAXITER):
            st = self._end(p[:-1], p[-1])
            r = st[:d] - x
            if np.linalg.norm(r) < 1e-13 * max(1.0, np.linalg.norm(x)):
                break
            J = self._jac(p)
            step = np.linalg.solve(J, -r)
            p = p + step
            if np.linalg.norm(step) < NEWTON_STEP_TOL:
                st = self._end(p[:-1], p[-1])
                break
        else:
            raise ConvergenceError("characteristic shooting did not converge")
        if abs(p[-1]) > self.max_time:
            raise CausticError("query point lies beyond the configured flight time")
        J = self._jac(p)
        J0 = self._jac(np.concatenate([p[:-1], [0.0]]))
        if abs(np.linalg.det(J)) < CAUSTIC_RATIO * abs(np.linalg.det(J0)):
            raise CausticError("fan Jacobian degenerates (caustic)")
        return p, st

    def evaluate_with_gradient(self, x) -> tuple[float, np.ndarray]:
        key = tuple(np.round(np.asarray(x, dtype=float), 15))
        if key in self.cache:
            return self.cache[key]
        p, st = self._solve(x)
        d = self.d
        if self.variant == "reflected":
            sig = abs(self.launch(p[:-1])[1][0])
            if sig < self.sigma_threshold:
                raise IncidenceError(f"sigma = {sig:.3g} below threshold {self.sigma_threshold:.3g}")
        out = (float(st[-1]), st[d: 2 * d].copy())
        self.cache[key] = out
        return out

    def evaluate(self, x) -> float:
        return self.evaluate_with_gradient(x)[0]

    def gradient_x(self, x) -> np.ndarray:
        return self.evaluate_with_gradient(x)[1]

    def sigma(self, xprime) -> float:
        """|d phi / d x_1| at the boundary point (0, x')."""
        xb = np.concatenate([[0.0], np.atleast_1d(xprime)])
        return abs(self.incident.gradient_x(xb)[0])

    # invariant checks ---------------------------------------------------------

    def hj_residual(self) -> float:
        """max |a(x, grad phi) - a(y, theta)| over cached points."""
        res = [abs(principal_symbol(self.op, np.array(k), g) - self.energy)
               for k, (_, g) in self.cache.items()]
        return max(res, default=0.0)

    def boundary_mismatch(self, xprimes) -> float:
        """Reflected variant: max of |phi - phi0| and |d_1 phi + d_1 phi0| at x_1 = 0."""
        if self.variant != "reflected":
            raise ValueError("boundary matching applies to the reflected phase")
        worst = 0.0
        for xp in np.atleast_2d(np.asarray(xprimes, dtype=float).reshape(-1, self.d - 1)):
            xb = np.concatenate([[0.0], xp])
            phi, g = self.evaluate_with_gradient(xb)
            phi0, g0 = self.incident.evaluate_with_gradient(xb)
            worst = max(worst, abs(phi - phi0), abs(g[0] + g0[0]))
        return worst


def eikonal_phase(op: OperatorSpec, y, theta, variant: str = "incident",
                  geom: Optional[DomainGeometry] = None, **kw) -> EikonalPhase:
    return EikonalPhase(op, y, theta, variant, geom, **kw)


@dataclass
class PhaseReport:
    incident_ratios: np.ndarray
    reflected_ratios: Optional[np.ndarray]
    incident_ratios_T: np.ndarray
    reflected_ratios_T: Optional[np.ndarray]
    sigmas: Optional[np.ndarray]

    @property
    def max_incident(self) -> float:
        return float(np.max(self.incident_ratios))

    @property
    def max_reflected(self) -> float:
        return float("nan") if self.reflected_ratios is None else float(np.max(self.reflected_ratios))


def phase_approx_diagnostics(phase: EikonalPhase, pair: PointPair, theta_grid, T: float) -> PhaseReport:
    """Quadratic-remainder ratios of the incident and reflected phases.

    For each theta: |phi0 - <x - y, theta>| / |x - y|^2 and, when a boundary is
    attached, |phi - <x - y~, theta~>| / (sigma ell^2 + ell^2) with theta~ the
    xi_1-flip of theta and sigma = |d_1 phi| at the boundary foot of the pair.
    The same remainders divided by |x - y|^2 resp. sigma T^2 + T^2 are
    reported as well.
    """
    x, y = pair.x, pair.y
    if not np.allclose(y, phase.y):
        raise ValueError("pair.y must be the phase's base point")
    z = x - y
    r2 = float(z @ z)
    inc, ref, inc_T, ref_T, sig = [], [], [], [], []
    with_boundary = phase.geom is not None and phase.geom.has_boundary
    if with_boundary:
        dist = distances(pair, phase.geom)
        y_t = y.copy()
        y_t[0] = -y_t[0]
    for theta in np.atleast_2d(theta_grid):
        ph = phase.with_theta(theta)
        base = ph.incident
        rem = abs(base.evaluate(x) - float(z @ theta))
        inc.append(rem / r2)
        inc_T.append(rem / T**2)
        if with_boundary:
            rph = ph if ph.variant == "reflected" else EikonalPhase(
                phase.op, y, theta, "reflected", **{**phase._opts, "geom": phase.geom})
            th_t = np.array(theta, dtype=float)
            th_t[0] = -th_t[0]
            s = rph.sigma(0.5 * (x[1:] + y[1:]))
            rem_r = abs(rph.evaluate(x) - float((x - y_t) @ th_t))
            ref.append(rem_r / (s * dist.ell**2 + dist.ell**2))
            ref_T.append(rem_r / (s * T**2 + T**2))
            sig.append(s)
    arr = lambda v: np.array(v) if v else None  # noqa: E731
    return PhaseReport(np.array(inc), arr(ref), np.array(inc_T), arr(ref_T), arr(sig))
