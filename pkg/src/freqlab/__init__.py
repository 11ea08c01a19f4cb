"""freqlab: frequency-function machinery for parabolic unique continuation.

Periodic spectral fields, an IMEX heat/drift/potential solver, backward
Gaussian functionals, the similarity-frame Hermite calculus, optimizing-point
recentering, and three cross-validating order-of-vanishing estimators.
"""

from .fields import Field, TorusGrid, integrate_cell, make_grid, sample, spectral_gradient
from .gaussian import (KernelParams, MomentSpec, dirichlet_quotient_cell, gaussian_rayleigh,
                       kernel, moment_ball, moment_homogeneous, phi, tail_bound)
from .hermite import (CaloricPolynomial, MultiIndex, caloric_basis, fit_caloric, hermite_fn,
                      phi_alpha, project, spectrum_dist)
from .recenter import RecenterResult, choose_epsilon, find_x_eps, find_x_eps_ball, galilean_recenter
from .similarity import (FrequencyTrace, SimilarityField, apply_H, frequency_trace, qbar,
                         qbar_derivative_diag, to_similarity)
from .solver import CoefficientSet, SolveSchedule, Trajectory, residual, solve, step
from .vanishing import (VanishingEstimate, consistency_report, order_from_cylinders,
                        order_from_phi, order_from_qbar)

__version__ = "0.1.0"
