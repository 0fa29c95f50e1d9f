"""Resonator characterization and design toolkit.

Fits multi-branch equivalent circuits to two-port admittance measurements,
extracts the standard resonator metrics (fs, fp, Q_s, Q_p, Q_m, k_t^2, C_0,
FoM), models electrode-sampling mode splitting of laterally vibrating
plates, and plans multi-frequency device banks on a shared process.
"""

from .errors import (
    DegenerateCouplingError,
    EstimationError,
    FitError,
    GeometryError,
    InductiveBackgroundError,
    PhaseUnwrapError,
    SingularNetworkError,
    ToolkitError,
    TouchstoneError,
)
from .netparams import (
    ComplexTrace,
    NetworkRecord,
    device_admittance,
    extract_y21,
    parse_touchstone,
    s_to_y,
    series_element_network,
    write_touchstone,
    y_to_s,
)
from .mbvd import (
    Kt2Convention,
    MbvdModel,
    MotionalBranch,
    ResonatorMetrics,
    branch_from_metrics,
    kt2_from_frequencies,
    metrics_from_model,
    model_from_dict,
    model_to_dict,
    resonance_frequencies,
    synthesize_admittance,
)
from .extract import (
    ResonanceCandidate,
    c0_from_offresonance,
    detect_resonances,
    initial_guess,
    q_from_phase_slope,
)
from .fitkernel import (
    FitOptions,
    FitResult,
    default_bounds,
    fit,
    fit_multistart,
    jacobian,
    residuals,
    select_branch_count,
)
from .transduce import (
    Electrode,
    ElectrodeLayout,
    FieldGap,
    ModeCoupling,
    ModeSpectrum,
    SplitRecord,
    build_layout,
    mode_couplings,
    spectrum_to_mbvd,
    split_study,
    strain_overlaps,
    strain_overlaps_numeric,
)
from .designkit import (
    DeviceGeometry,
    Finding,
    PlanEntry,
    ProcessRules,
    TableReport,
    calibrate_velocity,
    check_lithography,
    plan_bank,
    predict_fs,
    render_table,
    velocity_outliers,
)

__version__ = "0.1.0"

__all__ = [
    "ComplexTrace",
    "DegenerateCouplingError",
    "DeviceGeometry",
    "Electrode",
    "ElectrodeLayout",
    "EstimationError",
    "FieldGap",
    "Finding",
    "FitError",
    "FitOptions",
    "FitResult",
    "GeometryError",
    "InductiveBackgroundError",
    "Kt2Convention",
    "MbvdModel",
    "ModeCoupling",
    "ModeSpectrum",
    "MotionalBranch",
    "NetworkRecord",
    "PhaseUnwrapError",
    "PlanEntry",
    "ProcessRules",
    "ResonanceCandidate",
    "ResonatorMetrics",
    "SingularNetworkError",
    "SplitRecord",
    "TableReport",
    "ToolkitError",
    "TouchstoneError",
    "branch_from_metrics",
    "build_layout",
    "c0_from_offresonance",
    "calibrate_velocity",
    "check_lithography",
    "default_bounds",
    "detect_resonances",
    "device_admittance",
    "extract_y21",
    "fit",
    "fit_multistart",
    "initial_guess",
    "jacobian",
    "kt2_from_frequencies",
    "metrics_from_model",
    "mode_couplings",
    "model_from_dict",
    "model_to_dict",
    "parse_touchstone",
    "plan_bank",
    "predict_fs",
    "q_from_phase_slope",
    "render_table",
    "residuals",
    "resonance_frequencies",
    "s_to_y",
    "select_branch_count",
    "series_element_network",
    "spectrum_to_mbvd",
    "split_study",
    "strain_overlaps",
    "strain_overlaps_numeric",
    "synthesize_admittance",
    "velocity_outliers",
    "write_touchstone",
    "y_to_s",
]
