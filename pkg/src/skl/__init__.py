"""Numerical checks of semiclassical asymptotics for spectral projector kernels.

Exact kernels on model domains are compared against Weyl-type approximants,
the boundary reflection formula, the d = 2 boundary correction and the
Tauberian smoothed kernel.
"""

from .operators import (CoefficientField, DomainGeometry, OperatorSpec, PointPair, boundary_symbol,
                        distances, free_operator, kappa, linear_potential_operator,
                        microhyperbolicity_margin, named_operator, principal_symbol,
                        reflect_point, separable_operator, strong_convexity_check,
                        symbol_gradient)
from .spectra import (IntervalBasis, GridBasis, ProductBasis, TaperSpec, bump_chi, bump_fourier,
                      exact_projector_kernel, fd_sturm_liouville_basis, interval_basis,
                      separable_2d_basis, smoothed_step, tauberian_kernel)
from .weyl import (KernelEstimate, RegimeTag, correction_term, leading_magnitude, regime_classify,
                   trivial_bound, weyl_boundary, weyl_free_closed_form, weyl_quadrature)
from .bessel import bessel_j
from .optics import (BilliardRay, EikonalPhase, Trajectory, billiard_connect, eikonal_phase,
                     hamiltonian_flow, phase_approx_diagnostics, reflect_covector,
                     stationary_points)

__version__ = "0.1.0"
