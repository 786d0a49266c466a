"""Numerical laboratory for metric descent moduli."""

from .errors import *  # noqa: F401,F403
from .metric import (
    INF,
    Analytic2D,
    ExtendedFunction,
    FiniteSpace,
    Grid1D,
    Measure,
    PointSet,
    build_finite_space,
    metric_repair,
    random_finite_space,
    sublevel_set,
    truncate,
    validate_metric,
)
from .moduli import (
    Modulus,
    ModulusProfile,
    ThetaFunction,
    average_descent,
    compose_modulus,
    critical_set,
    delta_plus,
    diffusion_descent,
    global_slope,
    local_slope,
    modulus_domain,
)
from .axioms import (
    AxiomReport,
    CompatWitness,
    check_composition,
    check_D0,
    check_D1,
    check_D2,
    check_D3,
    check_strong_compat,
    check_translation,
    find_compat_witness,
    refute_compat_nat,
    refute_strong_compat_average,
    run_axiom_suite,
)
from .descent import (
    DescentTrace,
    SequenceReport,
    asymptotic_criticality_report,
    cauchy_check,
    comparison_check,
    critical_existence,
    delta_mix,
    descent_run,
    descent_step,
    determination_oracle,
    infimizing_check,
    monotone_subsequence,
)
from .continuum import (
    FlowCurve,
    SmoothFunction2D,
    arc_length_reparam,
    comparison_along_flow,
    example_block_function,
    example_xsq_over_y,
    gradient_flow,
    integrability_report,
)

__version__ = "0.1.0"
