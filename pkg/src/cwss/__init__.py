"""Compressive wideband spectrum sensing.

Sub-Nyquist random sampling of a wideband channel, autocorrelation-domain
dictionaries, sparse recovery by constrained L1 minimization (plain and
total-variation weighted), and Monte Carlo detection statistics.
"""

from ._version import __version__
from .backend import available_backends, default_backend
from .correlate import (
    AutocorrVector,
    DictionaryBundle,
    LinkMatrix,
    StackedDictionary,
    analytic_cav,
    analytic_nav,
    build_block_matrices,
    build_dictionary,
    build_idft,
    build_lag_centered_idft,
    build_link_matrix,
    build_phi_bar,
    build_stacked_operator,
    estimate_autocorr,
    estimate_cav,
    link_matrix_entrywise,
    model_psd,
    sensing_dictionary,
)
from .detect import (
    DetectionReport,
    OccupancyDecision,
    TrialOutcome,
    aggregate_report,
    decide_occupancy,
    detection_event,
    false_alarm_event,
    wilson_interval,
)
from .experiment import ExperimentConfig, run_montecarlo, run_sense, run_trial
from .model import (
    NyquistFrame,
    SubbandPlan,
    WidebandScene,
    analytic_autocorrelation,
    default_paper_plan,
    generate_scene,
    noise_variance,
    synthesize_frames,
)
from .sampling import (
    CompressiveFrame,
    MeasurementMatrix,
    compress_frame,
    compress_frames,
    make_subsampling_matrix,
    rate_to_m,
)
from .solve import (
    BoundsReport,
    L0Result,
    SolveResult,
    SolverConfig,
    l0_oracle,
    measurement_bounds,
    rip_probe,
    solve_constrained_l1,
    solve_lasso_cwss,
    solve_tvm_cwss,
)
from .tvops import (
    TvOperator,
    build_tv_operator,
    total_variation_operator_norm,
    total_variation_sum,
    unvec_columns,
    vec_columns,
)

__all__ = [
    "__version__",
    "available_backends",
    "default_backend",
    "AutocorrVector",
    "DictionaryBundle",
    "LinkMatrix",
    "StackedDictionary",
    "analytic_autocorrelation",
    "analytic_cav",
    "analytic_nav",
    "build_block_matrices",
    "build_dictionary",
    "build_idft",
    "build_lag_centered_idft",
    "build_link_matrix",
    "build_phi_bar",
    "build_stacked_operator",
    "build_tv_operator",
    "estimate_autocorr",
    "estimate_cav",
    "link_matrix_entrywise",
    "model_psd",
    "sensing_dictionary",
    "DetectionReport",
    "OccupancyDecision",
    "TrialOutcome",
    "aggregate_report",
    "decide_occupancy",
    "detection_event",
    "false_alarm_event",
    "wilson_interval",
    "ExperimentConfig",
    "run_montecarlo",
    "run_sense",
    "run_trial",
    "NyquistFrame",
    "SubbandPlan",
    "WidebandScene",
    "default_paper_plan",
    "generate_scene",
    "noise_variance",
    "synthesize_frames",
    "CompressiveFrame",
    "MeasurementMatrix",
    "compress_frame",
    "compress_frames",
    "make_subsampling_matrix",
    "rate_to_m",
    "BoundsReport",
    "L0Result",
    "SolveResult",
    "SolverConfig",
    "l0_oracle",
    "measurement_bounds",
    "rip_probe",
    "solve_constrained_l1",
    "solve_lasso_cwss",
    "solve_tvm_cwss",
    "TvOperator",
    "total_variation_operator_norm",
    "total_variation_sum",
    "unvec_columns",
    "vec_columns",
]
