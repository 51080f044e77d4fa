"""Numerical laboratory for the fractional porous medium equation with density.

``rho(x) u_t + (-Delta)^(sigma/2) (u^m) = 0``, solved on Dirichlet boxes and
checked against the qualitative theory by the :mod:`fpme.diagnostics` suite.
"""
from .fields import (DensityProfile, Grid, InitialDatum, ScalarField, make_grid,
                     grid_with_spacing, sample_density, weighted_norm)
from .fraclap import (CutoffFamily, QuadratureSpec, SpectralOperator, apply_singular_integral,
                      apply_spectral, cutoff_scaling_residual, cutoff_value,
                      normalization_constant)
from .evolve import (PhysParams, StepperConfig, Trajectory, solve_dirichlet,
                     solve_exhaustion, solve_L1_datum, step)
from .potentials import (DecayQuery, RieszEvaluator, accumulate_U, green_identity_residual,
                         predicted_exponent, riesz_potential)

__version__ = "0.1.0"
