"""Numerical tools for the Szegő condition of Jacobi matrices with Coulomb-type coefficients."""

from .coefficients import (
    CoefficientSequence,
    ParameterError,
    PowerLaw,
    admissibility,
    admissible_shift,
    coeffs_at,
    coulomb,
    delta_n,
    explicit,
    free,
    reflected,
    regularized_coulomb,
    stripped,
    with_overrides,
)
from .measure import density_via_m, density_via_T, divergence_classify, szego_integral, theta_grid
from .perturbation import (
    PerturbationSpec,
    apply_perturbation,
    askey_classify,
    dE_dt,
    minoration_audit,
    staged_audit,
)
from .polynomials import envelope_bounds_check, envelope_run, state_at
from .spectrum import TruncatedJacobi, eigenvalue, eigenvalues_outside, eigenvector_at, oscillation_count
from .sumrules import a0_e0, one_sided_step_rule, step_sum_rule

__version__ = "0.1.0"
