"""Dose-finding designs for phase I trials with joint toxicity/biomarker models.

Implements a two-stage likelihood-based continual reassessment design with
three estimation methods (binary-only probit, and two factorized joint models
that add one or eight longitudinal biomarker measurements), a complete-
information patient generator, a Monte Carlo harness for operating
characteristics, and grid-search calibration of dose labels.
"""

from .models import (
    Skeleton,
    WorkingModel,
    DoseLabels,
    ToxicityParams,
    backward_fit_labels,
    toxicity_prob,
    select_target,
)
from .numerics import (
    NotPositiveDefinite,
    RngStream,
    cholesky,
    condition_gaussian,
    normal_cdf,
    normal_quantile,
    sample_mvn,
)
from .optimize import OptimizerSpec, minimize
from .joint import (
    BiomarkerParams,
    JointParams,
    MarginalToxicity,
    ar1_covariance,
    conditional_probit_2d,
    conditional_probit_9d,
    conditional_to_marginal,
    validate_params,
)
from .fitting import (
    DiagnosticFlags,
    FitResult,
    SeparationClass,
    TrialData,
    classify_separation,
    early_stop_posterior,
    fit,
)
from .profiles import (
    GenerationParams,
    PatientProfile,
    Scenario,
    generate_profile,
    toxicity_margin_check,
)
from .engine import DesignSpec, TrialRecord, TrialState, run_trial
from .simulate import OperatingCharacteristics, SimPlan, compare_methods, run_plan
from .calibrate import CalibrationGrid, CalibrationResult, calibrate

__version__ = "0.1.0"
