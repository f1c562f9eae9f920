"""Simulation and exact-numerics laboratory for random walks in random scenery."""

from .walk_models import JumpModel, build_model, char_fn, sample_jump, sample_jumps
from .trajectory import (
    LocalTimeField,
    TrajectoryStats,
    folner_ratio,
    lazy_coupling_check,
    localtime_threshold,
    run_trajectory,
    sample_range_points,
)
from .exact_kernels import (
    KernelResult,
    green_fn,
    potential_bound_check,
    resolvent_integral,
    resolvent_series,
    return_prob,
)
from .reports import CheckReport, emit_report
from .limit_laws import (
    folner_check,
    localtime_law_check,
    moment_check,
    range_law_check,
    shifted_moment_check,
    variance_scaling_check,
)
from .complexity import (
    ComplexityReport,
    SceneryModel,
    complexity_check,
    exact_q_oracle,
    hamming_bound,
    phi_count,
    select_delta,
    smb_check,
)
from .experiment import load_config, run_config

__version__ = "0.1.0"
