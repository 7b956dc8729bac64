"""Slot-accurate simulator and rate analysis for a three-stage
load-balancing Clos-network cell switch with deterministic periodic
scheduling and in-order forwarding (the TRIDENT architecture)."""

from .geometry import (
    CompoundPermutation,
    PermutationMatrix,
    PortAddress,
    ScheduleError,
    SwitchDims,
    cm_link,
    cm_permutation,
    compound_p1,
    compound_p2,
    im_link,
    im_permutation,
)
from .fabric import Cell, TridentFabric
from .metrics import DepartureRecorder, RunMetrics
from .oq import OqSwitch
from .rates import (
    DriftEstimate,
    IdentityReport,
    RateBounds,
    rate_bounds,
    r2_from_r1,
    r2_slice,
    r3,
    r4,
    r5,
    stability_drift,
    verify_throughput_identity,
)
from .traffic import (
    ArrivalGenerator,
    TrafficSpec,
    check_admissible,
    paired_output,
    rate_matrix,
    MODELS,
)
from .experiment import (
    AnalysisReport,
    ConfigError,
    ExperimentConfig,
    compare_cb_capacities,
    load_config,
    parse_config,
    run_analysis,
    run_experiment,
    simulate,
    write_csv,
)

__all__ = [
    "AnalysisReport",
    "ArrivalGenerator",
    "Cell",
    "CompoundPermutation",
    "ConfigError",
    "DepartureRecorder",
    "DriftEstimate",
    "ExperimentConfig",
    "IdentityReport",
    "MODELS",
    "OqSwitch",
    "PermutationMatrix",
    "PortAddress",
    "RateBounds",
    "RunMetrics",
    "ScheduleError",
    "SwitchDims",
    "TrafficSpec",
    "TridentFabric",
    "check_admissible",
    "cm_link",
    "cm_permutation",
    "compare_cb_capacities",
    "compound_p1",
    "compound_p2",
    "im_link",
    "im_permutation",
    "load_config",
    "paired_output",
    "parse_config",
    "r2_from_r1",
    "r2_slice",
    "r3",
    "r4",
    "r5",
    "rate_bounds",
    "rate_matrix",
    "run_analysis",
    "run_experiment",
    "simulate",
    "stability_drift",
    "verify_throughput_identity",
    "write_csv",
]
