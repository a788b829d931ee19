import math

import numpy as np
import pytest
from scipy import integrate

from skl.harness import fit_slope
from skl.operators import CoefficientField
from skl.spectra import (GridBasis, IntervalBasis, TaperSpec, ValidityCapError, bump_chi,
                         bump_fourier, exact_projector_kernel, fd_sturm_liouville_basis,
                         interval_basis, load_basis, save_basis, separable_2d_basis,
                         smoothed_step, smoothed_step_table, tauberian_kernel)


class SingleMode:
    """One eigenpair with constant eigenfunction, for weight checks."""

    def __init__(self, lam, value=1.0, h=0.1):
        self.eigenvalues = np.array([lam])
        self.validity_cap = 1e9
        self.h = h
        self.value = value

    def values(self, x):
        return np.array([self.value])

    def check_cap(self, tau):
        pass


def gram(basis, L, n=10, nodes=20001):
    x = np.linspace(0, L, nodes)
    phi = np.array([basis.values(t)[:n] for t in x])
    return integrate.trapezoid(phi[:, :, None] * phi[:, None, :], x, axis=0)


# ----- interval and FD bases ----------------------------------------------

def test_interval_first_eigenvalue():
    b = interval_basis(1.0, "dirichlet", 0.5, 5)
    assert b.eigenvalues[0] == pytest.approx((math.pi / 2) ** 2, rel=1e-14)
    assert b.eigenvalues[0] == pytest.approx(2.4674, abs=1e-4)


def test_interval_neumann_zero_mode():
    b = interval_basis(2.0, "neumann", 0.1, 5)
    assert b.eigenvalues[0] == 0.0
    assert np.allclose([b.values(t)[0] for t in (0.0, 0.7, 2.0)], math.sqrt(0.5))


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_interval_orthonormal(bc):
    assert np.allclose(gram(interval_basis(1.3, bc, 0.1, 12), 1.3), np.eye(10), atol=1e-6)


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_fd_reproduces_closed_form(bc):
    fd = fd_sturm_liouville_basis(1.0, bc, 0.1, None, 2000)
    ex = interval_basis(1.0, bc, 0.1, 12)
    start = 1 if bc == "neumann" else 0
    rel = np.abs(fd.eigenvalues[start:10] - ex.eigenvalues[start:10]) / ex.eigenvalues[start:10]
    assert rel.max() < 1e-4
    if bc == "neumann":
        assert abs(fd.eigenvalues[0]) < 1e-10  # roundoff on a scale of 4 h^2 / dx^2


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_fd_orthonormal(bc):
    fd = fd_sturm_liouville_basis(1.0, bc, 0.1, CoefficientField.from_expression("x**2", 1), 2000)
    assert np.allclose(gram(fd, 1.0), np.eye(10), atol=1e-6)


def test_fd_constant_shift():
    a = fd_sturm_liouville_basis(1.0, "dirichlet", 0.1, None, 400)
    b = fd_sturm_liouville_basis(1.0, "dirichlet", 0.1, CoefficientField.constant(0.7), 400)
    n = min(len(a), len(b))
    assert np.allclose(b.eigenvalues[:n] - a.eigenvalues[:n], 0.7, atol=1e-10)


def test_fd_ascending_and_simple():
    fd = fd_sturm_liouville_basis(2.0, "dirichlet", 0.05, CoefficientField.from_expression("sin(3*x)", 1), 800)
    assert np.all(np.diff(fd.eigenvalues) > 0)


def test_fd_convergence_rate():
    ex = interval_basis(1.0, "dirichlet", 0.1, 6).eigenvalues[4]
    grids = [200, 400, 800, 1600]
    errs = [abs(fd_sturm_liouville_basis(1.0, "dirichlet", 0.1, None, n).eigenvalues[4] - ex) for n in grids]
    slope = fit_slope(grids, errs)[0]
    assert abs(slope + 2) <= 0.3


def test_fd_rejects_coarse_grid_and_cap():
    with pytest.raises(ValueError):
        fd_sturm_liouville_basis(1.0, "dirichlet", 0.1, None, 100)
    fd = fd_sturm_liouville_basis(1.0, "dirichlet", 0.1, None, 200)
    with pytest.raises(ValidityCapError):
        exact_projector_kernel(fd, 0.5, 0.5, 10 * fd.validity_cap)


def test_basis_round_trip(tmp_path):
    fd = fd_sturm_liouville_basis(1.0, "neumann", 0.1, CoefficientField.from_expression("x", 1), 300)
    save_basis(fd, tmp_path / "b.txt")
    back = load_basis(tmp_path / "b.txt")
    assert isinstance(back, GridBasis)
    assert np.array_equal(back.eigenvalues, fd.eigenvalues)
    assert np.array_equal(back.values(0.37), fd.values(0.37))
    iv = interval_basis(2.0, "dirichlet", 0.1, 9)
    save_basis(iv, tmp_path / "i.txt")
    assert np.array_equal(load_basis(tmp_path / "i.txt").eigenvalues, iv.eigenvalues)


# ----- products and the projector kernel ---------------------------------

def test_box_mode_count_by_lattice():
    h = 0.1
    b = interval_basis(math.pi, "dirichlet", h, 20)
    box = separable_2d_basis(b, b, 1.0)
    lattice = sum(1 for n in range(1, 11) for m in range(1, 11) if n * n + m * m <= 100)
    assert len(box) == lattice
    assert exact_projector_kernel(box, [1.0, 2.0], [1.0, 2.0], 1.0) > 0


def test_square_box_keeps_multiplicity():
    b = interval_basis(1.0, "dirichlet", 0.2, 10)
    box = separable_2d_basis(b, b, 5.0)
    lam = box.eigenvalues
    assert np.sum(np.isclose(lam, lam[1])) == 2  # (1, 2) and (2, 1)


def test_product_kernel_symmetric():
    b1 = interval_basis(1.0, "dirichlet", 0.05, 40)
    b2 = fd_sturm_liouville_basis(2.0, "neumann", 0.05, CoefficientField.from_expression("x", 1), 400)
    box = separable_2d_basis(b1, b2, 1.0)
    x, y = [0.3, 0.9], [0.55, 1.4]
    assert exact_projector_kernel(box, x, y, 0.8) == exact_projector_kernel(box, y, x, 0.8)


def test_product_requires_common_h():
    with pytest.raises(ValueError):
        separable_2d_basis(interval_basis(1, "dirichlet", 0.1, 5), interval_basis(1, "dirichlet", 0.2, 5), 1.0)


def test_product_cap_check():
    fd = fd_sturm_liouville_basis(1.0, "dirichlet", 0.1, None, 200)
    with pytest.raises(ValidityCapError):
        separable_2d_basis(fd, interval_basis(1, "dirichlet", 0.1, 50), 10 * fd.validity_cap)


def test_single_mode_kernel():
    b = interval_basis(1.0, "dirichlet", 0.5, 5)
    assert exact_projector_kernel(b, 0.5, 0.5, 3.0) == pytest.approx(2.0)
    assert exact_projector_kernel(b, 0.5, 0.5, 1.0) == 0.0


def test_ties_included():
    b = interval_basis(1.0, "dirichlet", 1 / math.pi, 5)  # lambda_n = n^2
    assert exact_projector_kernel(b, 0.25, 0.25, 4.0) == pytest.approx(2 * (0.5 + 1.0))


def test_cauchy_schwarz_random():
    b = interval_basis(2.0, "neumann", 0.05, 80)
    box = separable_2d_basis(b, interval_basis(1.0, "dirichlet", 0.05, 40), 1.0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, y = rng.uniform([0, 0], [2, 1]), rng.uniform([0, 0], [2, 1])
        tau = rng.uniform(0.1, 1.0)
        exy = exact_projector_kernel(box, x, y, tau)
        assert exy**2 <= exact_projector_kernel(box, x, x, tau) * exact_projector_kernel(box, y, y, tau) + 1e-10


def test_positivity_and_monotonicity_in_tau():
    fd = fd_sturm_liouville_basis(1.0, "dirichlet", 0.02, CoefficientField.from_expression("3*x", 1), 600)
    for x in (0.1, 0.5, 0.93):
        vals = [exact_projector_kernel(fd, x, x, t) for t in np.linspace(0, 2.0, 60)]
        assert min(vals) >= 0 and np.all(np.diff(vals) >= -1e-12)


# ----- bump and smoothed step ---------------------------------------------

def test_bump_support():
    assert bump_chi(0.0) == 1.0 and bump_chi(0.4) == 1.0 and bump_chi(1.1) == 0.0
    t = np.linspace(-1.5, 1.5, 301)
    assert np.array_equal(bump_chi(t), bump_chi(-t))
    assert np.all((bump_chi(t) >= 0) & (bump_chi(t) <= 1))


def test_bump_fourier_inversion():
    val, _ = integrate.quad(lambda s: bump_fourier(s).real, 0, 400, limit=2000)
    assert 2 * val / (2 * math.pi) == pytest.approx(1.0, abs=1e-8)


def test_smoothed_step_normalization():
    assert smoothed_step(-1e4) == 0.0 and smoothed_step(1e4) == 1.0
    assert abs(smoothed_step(-900)) < 1e-8 and abs(smoothed_step(900) - 1) < 1e-8
    assert smoothed_step(0.0) == pytest.approx(0.5, abs=1e-15)


def test_smoothed_step_matches_quadrature_of_transform():
    # w(u) = (2 pi)^{-1} int_{-inf}^{u} chi^(s) ds with chi^ even
    for u in (-3.0, 0.7, 4.0):
        part, _ = integrate.quad(lambda s: bump_fourier(s).real, 0, abs(u), limit=400)
        expect = 0.5 + math.copysign(part, u) / (2 * math.pi)
        assert smoothed_step(u) == pytest.approx(expect, abs=1e-9)


def test_smoothed_step_table_accuracy():
    u = np.random.default_rng(1).uniform(-1100, 1100, 3000)
    assert np.max(np.abs(smoothed_step_table(u) - smoothed_step(u))) < 1e-10


def test_smoothed_step_tail_achieved():
    # the achievable tail: decay like exp(-c sqrt(u)) from the e^{-1/u} cutoff
    assert abs(smoothed_step(400) - 1) < 1e-9 and abs(smoothed_step(-400)) < 1e-9


@pytest.mark.xfail(strict=True, reason="a width-1/2 e^{-1/u} bump gives |w(50) - 1| ~ 2e-4, "
                   "above the stated 1e-6 tail at |u| = 50")
def test_smoothed_step_tail_at_50():
    assert abs(smoothed_step(50) - 1) <= 1e-6 and abs(smoothed_step(-50)) <= 1e-6


# ----- Tauberian kernel ----------------------------------------------------

def test_tauberian_single_mode_saturated():
    # w(10) is 0.984 for this bump, so "approximately 1" holds to 2e-2
    assert tauberian_kernel(SingleMode(0.0), TaperSpec(1.0), 0, 0, 1.0, 0.1) == pytest.approx(1.0, abs=2e-2)
    assert tauberian_kernel(SingleMode(2.0), TaperSpec(1.0), 0, 0, 1.0, 0.1) == pytest.approx(0.0, abs=2e-2)


def test_tauberian_gap_limit():
    h = 0.1
    b = interval_basis(1.0, "dirichlet", h, 200)  # lambda_n = (0.1 n pi)^2
    tau = 0.5 * (b.eigenvalues[2] + b.eigenvalues[3])
    gap = b.eigenvalues[3] - tau
    exact = exact_projector_kernel(b, 0.3, 0.6, tau)
    errs = [abs(tauberian_kernel(b, TaperSpec(T), 0.3, 0.6, tau, h) - exact) for T in (16, 32, 64, 128)]
    assert errs[-1] < 1e-6
    assert all(b_ < a_ for a_, b_ in zip(errs, errs[1:]))
    assert 128 * gap / h > 400  # window tail below 1e-9 at the nearest eigenvalues


def test_tauberian_cap_error():
    b = interval_basis(1.0, "dirichlet", 0.1, 5)
    with pytest.raises(ValidityCapError):
        tauberian_kernel(b, TaperSpec(0.01), 0.3, 0.3, 1.0, 0.1)


def test_taper_validation():
    with pytest.raises(ValueError):
        TaperSpec(0.0)
    assert TaperSpec(2.0).chi(0.9) == 1.0
