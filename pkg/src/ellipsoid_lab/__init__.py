"""Exact ellipsoid fits for random Gaussian point sets.

The package certifies the identity-perturbation construction N = I + sum_i
delta_i v_i v_i^T on concrete instances, statistically probes the spectral
events that make it work, and maps where the construction stops succeeding
as the point count m grows relative to d^2/4.
"""

from .construct import (
    FitResult,
    assemble_N,
    identity_perturbation_fit,
    least_norm_fit,
    verify_fit,
)
from .diagnostics import (
    DiagReport,
    ProbeRecord,
    beta_split,
    check_events,
    diagnose,
    m_inv_one_check,
    norm_certificates,
    probe_cover,
    quad_form_check,
)
from .experiment import (
    ExperimentConfig,
    PhaseCell,
    PhaseTable,
    TrialRecord,
    estimate_transition,
    run_phase_sweep,
    run_trial,
    wilson_interval,
)
from .gram import (
    GramSystem,
    HermiteFeatures,
    a_star_gram_check,
    build_A,
    build_M,
    build_gram_system,
    hermite_features,
    split_A,
    trace_moment,
)
from .numerics import SolveReport, extreme_eigs, operator_norm, sym_solve
from .sampling import (
    SampleSet,
    decompose,
    draw_sample_set,
    exact_sphere_moment,
    sample_gaussian,
    sphere_moment_estimate,
)
from .seeding import mix64, point_stream

__version__ = "0.1.0"

__all__ = [
    "FitResult",
    "assemble_N",
    "identity_perturbation_fit",
    "least_norm_fit",
    "verify_fit",
    "DiagReport",
    "ProbeRecord",
    "beta_split",
    "check_events",
    "diagnose",
    "m_inv_one_check",
    "norm_certificates",
    "probe_cover",
    "quad_form_check",
    "ExperimentConfig",
    "PhaseCell",
    "PhaseTable",
    "TrialRecord",
    "estimate_transition",
    "run_phase_sweep",
    "run_trial",
    "wilson_interval",
    "GramSystem",
    "HermiteFeatures",
    "a_star_gram_check",
    "build_A",
    "build_M",
    "build_gram_system",
    "hermite_features",
    "split_A",
    "trace_moment",
    "SolveReport",
    "extreme_eigs",
    "operator_norm",
    "sym_solve",
    "SampleSet",
    "decompose",
    "draw_sample_set",
    "exact_sphere_moment",
    "sample_gaussian",
    "sphere_moment_estimate",
    "mix64",
    "point_stream",
    "__version__",
]
