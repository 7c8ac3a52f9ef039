"""Flow-level bandwidth sharing under weighted alpha-fair allocation.

Library and CLI for the allocation solver, fluid model and invariant-manifold
lifting map, alpha=1 workload-cone geometry with product-form stationary law,
flow-level CTMC and reflected-diffusion simulators, and multi-path capacity
reduction.
"""

__version__ = "0.1.0"

from .alloc import AllocationResult, allocate, kkt_residual, utility
from .cone import (
    ConeGeometry,
    build_geometry,
    completely_s_check,
    skew_symmetry_report,
)
from .ctmc import (
    ApproxStationary,
    ExactLinearLaw,
    PathSample,
    StationaryEstimate,
    exact_linear_law,
    scale_path,
    simulate,
    ssc_statistic,
    stationary_approx,
    stationary_estimate,
)
from .fluid import (
    FluidTrajectory,
    InvariantState,
    integrate_fluid,
    invariant_from_q,
    lift_delta,
    lift_delta_pf,
    lyapunov_F,
    manifold_proxy,
)
from .model import (
    HeavyTrafficSequence,
    NetworkSpec,
    build_ht_sequence,
    collapse_mixture,
    extend_mixture,
    load_spec,
    mixture_groups,
    save_spec,
    spec_from_json,
    spec_to_json,
    validate_network,
    workload,
)
from .multipath import (
    MultipathSpec,
    ReducedRepresentation,
    local_traffic_check,
    polytopes_equal,
    project,
    validate_multipath,
)
from .srbm import (
    ProductFormReport,
    SrbmPath,
    simulate_srbm,
    validate_product_form,
)

__all__ = [
    "AllocationResult",
    "ApproxStationary",
    "ConeGeometry",
    "ExactLinearLaw",
    "FluidTrajectory",
    "HeavyTrafficSequence",
    "InvariantState",
    "MultipathSpec",
    "NetworkSpec",
    "PathSample",
    "ProductFormReport",
    "ReducedRepresentation",
    "SrbmPath",
    "StationaryEstimate",
    "allocate",
    "build_geometry",
    "build_ht_sequence",
    "collapse_mixture",
    "completely_s_check",
    "exact_linear_law",
    "extend_mixture",
    "integrate_fluid",
    "invariant_from_q",
    "kkt_residual",
    "lift_delta",
    "lift_delta_pf",
    "load_spec",
    "local_traffic_check",
    "lyapunov_F",
    "manifold_proxy",
    "mixture_groups",
    "polytopes_equal",
    "project",
    "save_spec",
    "scale_path",
    "simulate",
    "simulate_srbm",
    "skew_symmetry_report",
    "spec_from_json",
    "spec_to_json",
    "ssc_statistic",
    "stationary_approx",
    "stationary_estimate",
    "utility",
    "validate_multipath",
    "validate_network",
    "validate_product_form",
    "workload",
    "__version__",
]
