"""Bessel functions J_nu for the orders needed by radial Fourier integrals.

Integer orders use the ascending power series for x <= 12 and the Hankel
asymptotic expansion (8 terms in each of P and Q) beyond; half-integer orders
use their closed trigonometric forms.
"""

import math

import numpy as np

SERIES_LIMIT = 12.0
HANKEL_TERMS = 8
SUPPORTED_ORDERS = (0.0, 0.5, 1.0, 1.5, 2.0)


def _series(nu: int, x: np.ndarray) -> np.ndarray:
    # sum_k (-1)^k (x/2)^{2k+nu} / (k! (k+nu)!)
    half = 0.5 * x
    term = half**nu / math.factorial(nu)
    total = term.copy()
    q = -half * half
    for k in range(1, 60):
        term = term * q / (k * (k + nu))
        total += term
    return total


def _hankel(nu: float, x: np.ndarray) -> np.ndarray:
    mu = 4.0 * nu * nu
    coef = [1.0]
    for k in range(1, 2 * HANKEL_TERMS):
        coef.append(coef[-1] * (mu - (2 * k - 1) ** 2) / (8.0 * k))
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for k in range(HANKEL_TERMS):
        p += (-1) ** k * coef[2 * k] / x ** (2 * k)
        q += (-1) ** k * coef[2 * k + 1] / x ** (2 * k + 1)
    w = x - (0.5 * nu + 0.25) * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(w) - q * np.sin(w))


def bessel_j(nu: float, x):
    """J_nu(x) for nu in {0, 1/2, 1, 3/2, 2} and x >= 0."""
    nu = float(nu)
    if nu not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported order {nu}; expected one of {SUPPORTED_ORDERS}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("bessel_j needs x >= 0")
    out = np.empty_like(x)
    if nu in (0.5, 1.5):
        small = x < 1e-3
        xs, xl = x[small], x[~small]
        amp = np.sqrt(2.0 / (math.pi * xl))
        if nu == 0.5:
            out[~small] = amp * np.sin(xl)
            # series keeps full relative accuracy near 0
            out[small] = np.sqrt(2 * xs / math.pi) * (1 - xs**2 / 6 + xs**4 / 120)
        else:
            out[~small] = amp * (np.sin(xl) / xl - np.cos(xl))
            out[small] = np.sqrt(2 * xs / math.pi) * (xs / 3) * (1 - xs**2 / 10 + xs**4 / 280)
    else:
        n = int(nu)
        small = x <= SERIES_LIMIT
        out[small] = _series(n, x[small])
        out[~small] = _hankel(nu, x[~small])
    return float(out) if out.ndim == 0 else out


def ball_fourier_ratio(d: int, z):
    """J_{d/2}(z) / z^{d/2}, finite at z = 0 where it equals 1 / (2^{d/2} Gamma(d/2 + 1))."""
    nu = 0.5 * d
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 0.1
    zs = z[small]
    # ascending series of J_nu(z)/z^nu; five terms reach 1e-16 for z < 0.1
    acc = np.zeros_like(zs)
    term = np.full_like(zs, 1.0 / (2**nu * math.gamma(nu + 1)))
    for k in range(6):
        acc += term
        term = term * (-(zs * zs) / 4) / ((k + 1) * (k + 1 + nu))
    out[small] = acc
    zl = z[~small]
    out[~small] = bessel_j(nu, zl) / zl**nu
    return float(out) if out.ndim == 0 else out
