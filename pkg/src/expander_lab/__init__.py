"""Desk-scale numerics for asymptotically conical self-expanders.

Rotationally symmetric profile solves, Gaussian-weighted function spaces,
drifted elliptic solves by exhaustion, Jacobi-operator kernel diagnostics,
a model Cauchy problem on the periodic cell, and finite-difference checks
of the weighted-area variation formulas.
"""

from .geometry import (CurvatureSample, ProfileCurve, TransverseSection,
                       cone, cone_correction, curvature_at,
                       expander_residual, load_profile, plane, save_profile,
                       sphere_cap, vgraph_residual)
from .weighted_spaces import (ScalarField, TraceResult, decay_fit,
                              trace_at_infinity, weighted_norm)
from .expander_solve import shoot_profile, solve_for_cone
from .drift_elliptic import (DriftedOperator, barrier_radius,
                             extend_asymptotic, solve_decaying,
                             solve_dirichlet_ball)
from .jacobi import (FredholmReport, KernelBasis, assemble_jacobi,
                     asymptotic_trace, check_normal_identity, fredholm_index,
                     index_sweep, kernel_basis, link_area,
                     manufactured_kernel_operator, tilt_field,
                     weighted_energy, wronskian_discriminant)
from .heat_cauchy import (HeatSolution, duhamel_solve, max_principle_check,
                          pde_residual, perturbed_solve, schauder_report,
                          spectral_solve)
from .variation import (VariationSpec, bilinear_form, bump_profile,
                        decoupling_check, energy_window,
                        first_variation_check, mixed_second_difference,
                        normal_field, second_variation_check, section_field,
                        tangent_field)

__version__ = "0.1.0"

__all__ = [
    "CurvatureSample", "ProfileCurve", "TransverseSection", "cone",
    "cone_correction", "curvature_at", "expander_residual", "load_profile",
    "plane", "save_profile", "sphere_cap", "vgraph_residual",
    "ScalarField", "TraceResult", "decay_fit", "trace_at_infinity",
    "weighted_norm",
    "shoot_profile", "solve_for_cone",
    "DriftedOperator", "barrier_radius", "extend_asymptotic",
    "solve_decaying", "solve_dirichlet_ball",
    "FredholmReport", "KernelBasis", "assemble_jacobi", "asymptotic_trace",
    "check_normal_identity", "fredholm_index", "index_sweep", "kernel_basis",
    "link_area", "manufactured_kernel_operator", "tilt_field",
    "weighted_energy", "wronskian_discriminant",
    "HeatSolution", "duhamel_solve", "max_principle_check", "pde_residual",
    "perturbed_solve", "schauder_report", "spectral_solve",
    "VariationSpec", "bilinear_form", "bump_profile", "decoupling_check",
    "energy_window", "first_variation_check", "mixed_second_difference",
    "normal_field", "second_variation_check", "section_field",
    "tangent_field",
]
