import csv
import math

import numpy as np
import pytest

from skl.harness import fit_slope
from skl.operators import (CoefficientField, DomainGeometry, NoBoundaryError, NormalizationError,
                           OperatorSpec, PointPair, diagonal_metric_operator, free_operator,
                           linear_potential_operator, principal_symbol, schrodinger_operator)
from skl.optics import (BilliardError, FlowError, IncidenceError, billiard_connect,
                        covector_on_level, eikonal_phase, hamiltonian_flow,
                        phase_approx_diagnostics, reflect_covector, stationary_points,
                        stationary_residual)

HALF = DomainGeometry("half_space", (), "dirichlet")
BOX = DomainGeometry("box", (1.0, 1.0), "dirichlet")
TH = np.array([-0.6, 0.5])  # theta_1 < 0: characteristics head for the wall
Y = np.array([0.5, 0.5])


def smooth_spec(seed=0):
    """Real symbol with a varying metric and potential, no magnetic term."""
    rng = np.random.default_rng(seed)
    a, b, c = rng.uniform(0.1, 0.3, 3)
    g11 = CoefficientField.from_expression(f"1 + {a}*sin(x1)*cos(x2)", 2)
    g12 = CoefficientField.from_expression(f"{b}*sin(x1 + x2)", 2)
    g22 = CoefficientField.from_expression(f"1.5 + {c}*cos(x1 - x2)", 2)
    zero = CoefficientField.constant(0.0)
    pot = CoefficientField.from_expression(f"{c}*x1**2 + {a}*sin(x2)", 2)
    return OperatorSpec.from_fields([[g11, g12], [g12, g22]], [zero, zero], pot)


# ----- Hamiltonian flow ---------------------------------------------------

def test_free_flow_straight_line():
    x0, xi0 = np.array([0.1, -0.2]), np.array([0.6, 0.8])
    tr = hamiltonian_flow(free_operator(2), x0, xi0, 1.3)
    for t, s in zip(tr.times, tr.states):
        assert np.allclose(s[:2], x0 + 2 * xi0 * t, atol=1e-12)
        assert np.allclose(s[2:], xi0, atol=1e-12)


def test_harmonic_period():
    op = schrodinger_operator(CoefficientField.from_expression("x**2", 1), 1)
    tr = hamiltonian_flow(op, [0.7], [0.2], math.pi)
    assert np.allclose(tr.end, [0.7, 0.2], atol=1e-7)
    # quarter period rotates phase space by a right angle
    assert np.allclose(tr(math.pi / 4), [0.2, -0.7], atol=1e-7)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_energy_drift_random_spec(seed):
    op = smooth_spec(seed)
    rng = np.random.default_rng(seed)
    tr = hamiltonian_flow(op, rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2), 1.0)
    assert tr.energy_drift(op) <= 1e-8 * (1 + abs(tr.energy))


def test_time_reversal():
    op = smooth_spec(4)
    x0, xi0 = np.array([0.3, -0.4]), np.array([0.5, 0.9])
    fwd = hamiltonian_flow(op, x0, xi0, 0.8).end
    back = hamiltonian_flow(op, fwd[:2], -fwd[2:], 0.8).end
    assert np.allclose(back, np.concatenate([x0, -xi0]), atol=1e-7)


def test_backward_time_span():
    op = smooth_spec(5)
    tr = hamiltonian_flow(op, [0.1, 0.2], [0.4, -0.3], (0.0, -0.5))
    again = hamiltonian_flow(op, tr.end[:2], tr.end[2:], 0.5).end
    assert np.allclose(again, [0.1, 0.2, 0.4, -0.3], atol=1e-9)


def test_dense_output_between_steps():
    op = free_operator(2)
    tr = hamiltonian_flow(op, [0.0, 0.0], [1.0, 0.5], 2.0)
    t = np.linspace(0, 2, 17)
    assert np.allclose(tr(t)[:, :2], np.outer(2 * t, [1.0, 0.5]), atol=1e-12)


def test_flow_leaving_valid_region():
    with pytest.raises(FlowError):
        hamiltonian_flow(free_operator(2), [0.0, 0.0], [1.0, 0.0], 1.0, valid=lambda x: x[0] < 0.5)


def test_zero_length_flow():
    tr = hamiltonian_flow(free_operator(2), [0.0, 0.0], [1.0, 0.0], 0.0)
    assert tr.times.size == 1 and np.array_equal(tr.end, [0.0, 0.0, 1.0, 0.0])


def test_trajectory_csv(tmp_path):
    tr = hamiltonian_flow(free_operator(2), [0.0, 0.0], [1.0, 0.5], 0.5)
    tr.to_csv(tmp_path / "t.csv")
    with open(tmp_path / "t.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "x2", "xi1", "xi2"]
    assert len(rows) == tr.times.size + 1
    assert [float(v) for v in rows[-1]] == [tr.times[-1], *tr.end]


# ----- reflection -----------------------------------------------------------

def test_reflect_covector_examples():
    assert np.array_equal(reflect_covector([0.3, 0.7], HALF), [-0.3, 0.7])
    xi = np.array([0.2, -0.5, 0.9])
    assert np.array_equal(reflect_covector(reflect_covector(xi, HALF), HALF), xi)


def test_reflection_preserves_energy():
    op = linear_potential_operator(0.4)
    xb, xi = np.array([0.0, 0.3]), np.array([0.6, -0.2])
    assert principal_symbol(op, xb, xi) == principal_symbol(op, xb, reflect_covector(xi, HALF, op, [0.3]))


def test_reflection_checks_normalization_and_geometry():
    g12 = CoefficientField.constant(0.3)
    one = CoefficientField.constant(1.0)
    zero = CoefficientField.constant(0.0)
    skew = OperatorSpec.from_fields([[one, g12], [g12, one]], [zero, zero], zero)
    with pytest.raises(NormalizationError):
        reflect_covector([0.3, 0.7], HALF, skew, [0.0])
    with pytest.raises(NoBoundaryError):
        reflect_covector([0.3, 0.7], DomainGeometry("full_space"))
    with pytest.raises(ValueError):
        reflect_covector([0.3, 0.7], BOX)


def test_covector_on_level():
    op = diagonal_metric_operator([2.0, 0.5])
    u = np.array([0.6, 0.8])
    mu = covector_on_level(op, [0.0, 0.0], u, 1.0)
    assert principal_symbol(op, [0.0, 0.0], mu * u) == pytest.approx(1.0, rel=1e-14)
    assert covector_on_level(op, [0.0, 0.0], u, 1.0, branch=-1.0) == pytest.approx(-mu)


# ----- billiards ------------------------------------------------------------

def test_billiard_image_construction():
    x, y = np.array([1.0, 0.0]), np.array([1.0, 2.0])
    ray = billiard_connect(free_operator(2), x, y, 1.0, HALF, c0=0.1)
    assert np.allclose(ray.reflection_point, [0.0, 1.0], atol=1e-8)
    assert ray.incidence_angle == pytest.approx(math.pi / 4, abs=1e-8)
    assert np.allclose(ray.leg_out.end[:2], x, atol=1e-8)
    assert np.allclose(ray.leg_in.start[:2], y, atol=1e-14)
    assert ray.total_time == pytest.approx(math.sqrt(8) / 2, rel=1e-8)  # speed 2 |xi| = 2


def test_billiard_leg_conditions():
    op = linear_potential_operator(0.3)
    x, y = np.array([0.2, 0.0]), np.array([0.4, 0.4])
    ray = billiard_connect(op, x, y, 1.0, HALF, c0=0.1)
    assert abs(ray.reflection_point[0]) <= 1e-10
    assert np.allclose(ray.leg_out.end[:2], x, atol=1e-8)
    xi_in, xi_out = ray.leg_in.end[2:], ray.leg_out.start[2:]
    assert xi_out[0] == -xi_in[0] and np.array_equal(xi_out[1:], xi_in[1:])
    assert ray.leg_in.energy == pytest.approx(1.0, abs=1e-12)
    assert ray.leg_out.energy == pytest.approx(1.0, abs=1e-12)
    assert 0 < ray.incidence_angle <= math.pi / 2
    # incidence angle comparable to (nu(x) + nu(y)) / ell
    assert 0.2 < ray.angle_ratio < 5


def test_billiard_rejects_boundary_pairs_and_eps():
    with pytest.raises(BilliardError):
        billiard_connect(free_operator(2), [0.0, 0.0], [0.0, 0.3], 1.0, HALF)
    with pytest.raises(BilliardError):
        billiard_connect(free_operator(2), [1.0, 0.0], [1.0, 2.0], 1.0, HALF)  # nu sum 2 < ell^2 = 16
    with pytest.raises(BilliardError):
        billiard_connect(free_operator(2), [1.0, 0.0], [1.0, 2.0], 1.0, HALF, c0=0.1, eps=1.0)


def test_billiard_perturbation_linear_in_alpha():
    x, y = np.array([0.2, 0.0]), np.array([0.4, 0.4])
    base = billiard_connect(free_operator(2), x, y, 1.0, HALF, c0=0.1).reflection_point
    shift = [np.linalg.norm(billiard_connect(linear_potential_operator(a), x, y, 1.0, HALF,
                                             c0=0.1).reflection_point - base) for a in (0.04, 0.02)]
    assert shift[1] / shift[0] == pytest.approx(0.5, rel=0.1)


def test_billiard_csv(tmp_path):
    ray = billiard_connect(free_operator(2), [1.0, 0.0], [1.0, 2.0], 1.0, HALF, c0=0.1)
    ray.to_csv(tmp_path / "r.csv")
    with open(tmp_path / "r.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["leg", "t", "x1", "x2", "xi1", "xi2"]
    assert {r[0] for r in rows[1:]} == {"in", "out"}
    times = [float(r[1]) for r in rows[1:]]
    assert all(b >= a for a, b in zip(times, times[1:]))


# ----- stationary points ----------------------------------------------------

def test_stationary_points_free():
    ell = 0.3
    tp_, tm_, t_p, t_m = stationary_points(free_operator(2), [1.0 + ell, 0.5], [1.0, 0.5], 1.0)
    assert np.allclose(tp_, [-1.0, 0.0], atol=1e-12) and np.allclose(tm_, [1.0, 0.0], atol=1e-12)
    # x - y = -t' grad a(y, theta) with +t_+ > 0
    assert t_p == pytest.approx(ell / 2, rel=1e-12) and t_m == pytest.approx(-ell / 2, rel=1e-12)
    assert np.allclose(tp_, -tm_, atol=1e-14)


def test_stationary_points_rotation_equivariance():
    z = np.array([0.2, 0.1])
    base = stationary_points(free_operator(2), z, [0.0, 0.0], 1.0)
    for ang in (0.3, 1.7, 4.0):
        R = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
        rot = stationary_points(free_operator(2), R @ z, [0.0, 0.0], 1.0)
        assert np.allclose(rot[0], R @ base[0], atol=1e-12)
        assert np.allclose(rot[1], R @ base[1], atol=1e-12)
        assert rot[2] == pytest.approx(base[2], rel=1e-12)


@pytest.mark.parametrize("op", [diagonal_metric_operator([2.0, 0.5]), smooth_spec(3)])
def test_stationary_points_residual(op):
    x, y = np.array([0.5, 0.3]), np.array([0.35, 0.42])
    ell = np.linalg.norm(x - y)
    tp_, tm_, t_p, t_m = stationary_points(op, x, y, 1.0)
    assert stationary_residual(op, x, y, 1.0, tp_, t_p) < 1e-10
    assert stationary_residual(op, x, y, 1.0, tm_, t_m) < 1e-10
    assert t_p > 0 > t_m
    for t in (t_p, -t_m):
        assert 0.1 * ell < t < 10 * ell


def test_stationary_points_errors():
    with pytest.raises(ValueError):
        stationary_points(free_operator(2), [0.1, 0.1], [0.1, 0.1], 1.0)


# ----- eikonal phases -------------------------------------------------------

@pytest.fixture(scope="module")
def free_phases():
    op = free_operator(2)
    return (eikonal_phase(op, Y, TH, window=0.3),
            eikonal_phase(op, Y, TH, "reflected", HALF, window=0.6))


@pytest.fixture(scope="module")
def linear_phases():
    op = linear_potential_operator(0.3)
    return (eikonal_phase(op, Y, TH, window=0.3),
            eikonal_phase(op, Y, TH, "reflected", HALF, window=0.6))


def test_free_incident_phase_is_linear(free_phases):
    inc, _ = free_phases
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = Y + rng.uniform(-0.15, 0.15, 2)
        assert inc.evaluate(x) == pytest.approx(float((x - Y) @ TH), abs=1e-10)


def test_free_reflected_phase_is_image_phase(free_phases):
    _, ref = free_phases
    th_t, y_t = TH * [-1, 1], Y * [-1, 1]
    rng = np.random.default_rng(2)
    for _ in range(5):
        x = Y + rng.uniform(-0.15, 0.15, 2)
        assert ref.evaluate(x) == pytest.approx(float((x - y_t) @ th_t), abs=1e-10)


def test_incident_initial_data(linear_phases):
    inc, _ = linear_phases
    # zero on the hyperplane <x - y, theta> = 0, gradient theta at y
    tangent = np.array([TH[1], -TH[0]])
    for s in (-0.1, 0.05, 0.12):
        assert abs(inc.evaluate(Y + s * tangent)) <= 1e-6
    assert np.allclose(inc.gradient_x(Y), TH, atol=1e-6)


def test_hamilton_jacobi_residual(linear_phases):
    inc, ref = linear_phases
    for x in (Y + [0.05, -0.07], Y + [-0.1, 0.02]):
        inc.evaluate(x)
        ref.evaluate(x)
    assert inc.hj_residual() <= 1e-6 and ref.hj_residual() <= 1e-6


def test_reflected_boundary_matching(linear_phases):
    _, ref = linear_phases
    assert ref.boundary_mismatch([0.3, 0.5, 0.7]) <= 1e-6


def test_gradient_matches_finite_differences(linear_phases):
    for ph in linear_phases:
        x = Y + np.array([0.07, -0.05])
        g = ph.gradient_x(x)
        e = 1e-6
        fd = np.array([(ph.evaluate(x + e * v) - ph.evaluate(x - e * v)) / (2 * e) for v in np.eye(2)])
        assert np.allclose(g, fd, rtol=1e-4, atol=1e-8)


def test_incident_taylor_remainder_stable(linear_phases):
    inc, _ = linear_phases
    u = np.array([0.6, 0.8])
    ratios = [abs(inc.evaluate(Y + s * u) - s * float(u @ TH)) / s**2 for s in (0.1, 0.05, 0.025)]
    assert max(ratios) / min(ratios) < 1.2
    assert fit_slope([0.1, 0.05, 0.025], [r * s**2 for r, s in zip(ratios, (0.1, 0.05, 0.025))])[0] \
        == pytest.approx(2.0, abs=0.1)


def test_reflected_incidence_threshold():
    ph = eikonal_phase(free_operator(2), Y, TH, "reflected", HALF, window=0.6, sigma_min=5.0)
    with pytest.raises(IncidenceError):
        ph.evaluate(Y + [0.05, 0.0])


def test_reflected_needs_half_space():
    with pytest.raises(ValueError):
        eikonal_phase(free_operator(2), Y, TH, "reflected")
    with pytest.raises(ValueError):
        eikonal_phase(free_operator(2), Y, TH, "sideways")


def test_sigma_is_normal_derivative(free_phases):
    _, ref = free_phases
    assert ref.sigma(0.4) == pytest.approx(abs(TH[0]), abs=1e-10)


# ----- diagnostics ----------------------------------------------------------

def test_diagnostics_free_vanish(free_phases):
    _, ref = free_phases
    pair = PointPair(Y + np.array([-0.1, 0.08]), Y)
    rep = phase_approx_diagnostics(ref, pair, [TH, 1.1 * TH], 1.0)
    assert rep.max_incident < 1e-12 and rep.max_reflected < 1e-12


def test_diagnostics_linear_in_alpha():
    pair = PointPair(Y + np.array([-0.1, 0.08]), Y)
    reps = [phase_approx_diagnostics(eikonal_phase(linear_potential_operator(a), Y, TH, "reflected",
                                                   HALF, window=0.6), pair, [TH], 1.0)
            for a in (0.2, 0.1)]
    assert reps[1].max_incident / reps[0].max_incident == pytest.approx(0.5, rel=0.05)
    assert reps[1].max_reflected / reps[0].max_reflected == pytest.approx(0.5, rel=0.1)


def test_diagnostics_incident_ratio_stable_under_halving():
    op = linear_potential_operator(0.3)
    inc = eikonal_phase(op, Y, TH, window=0.3)
    u = np.array([0.6, -0.8])
    ratios = [phase_approx_diagnostics(inc, PointPair(Y + s * u, Y), [TH], 1.0).max_incident
              for s in (0.1, 0.05, 0.025)]
    assert max(ratios) / min(ratios) < 1.2
    assert phase_approx_diagnostics(inc, PointPair(Y + 0.1 * u, Y), [TH], 1.0).reflected_ratios is None
