import math

import numpy as np
import pytest
from scipy import integrate, special

from skl.bessel import ball_fourier_ratio, bessel_j


def test_closed_form_zero_of_half_order():
    assert bessel_j(0.5, math.pi) == pytest.approx(0.0, abs=1e-15)
    assert bessel_j(0.5, 1.0) == pytest.approx(math.sqrt(2 / math.pi) * math.sin(1.0), rel=1e-15)


def test_values_at_origin():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert bessel_j(2, 0.0) == 0.0
    assert bessel_j(0.5, 0.0) == 0.0 and bessel_j(1.5, 0.0) == 0.0


def test_j1_matches_integral_representation():
    # J_n(x) = pi^{-1} int_0^pi cos(n t - x sin t) dt
    for x in np.linspace(0.0, 40.0, 81):
        val, _ = integrate.quad(lambda t: math.cos(t - x * math.sin(t)), 0, math.pi,
                                limit=200, epsabs=1e-13)
        assert bessel_j(1, x) == pytest.approx(val / math.pi, abs=1e-9)


@pytest.mark.parametrize("nu", [0, 0.5, 1, 1.5, 2])
def test_accuracy_on_range(nu):
    x = np.concatenate([np.linspace(0, 30, 6001), np.linspace(30, 1e4, 40001)])
    assert np.max(np.abs(bessel_j(nu, x) - special.jv(nu, x))) <= 1e-10


def test_series_hankel_seam_continuous():
    eps = 1e-9
    for nu in (0, 1, 2):
        jump = bessel_j(nu, 12.0 + eps) - bessel_j(nu, 12.0) - eps * special.jvp(nu, 12.0)
        assert abs(jump) < 1e-10


def test_errors():
    with pytest.raises(ValueError):
        bessel_j(3, 1.0)
    with pytest.raises(ValueError):
        bessel_j(1, -1.0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_ball_fourier_ratio(d):
    z = np.array([0.0, 1e-3, 0.05, 0.0999, 0.1, 0.5, 7.0, 30.0])
    expect = np.where(z > 0, special.jv(d / 2, z) / np.where(z > 0, z, 1) ** (d / 2),
                      1 / (2 ** (d / 2) * math.gamma(d / 2 + 1)))
    assert np.allclose(ball_fourier_ratio(d, z), expect, rtol=1e-12, atol=1e-15)
