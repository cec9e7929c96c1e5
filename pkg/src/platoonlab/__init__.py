"""Simulation and verification lab for switched constant-time-headway
platooning through position-dependent speed drops."""

from .exceptions import (
    BlowUpError,
    ConfigError,
    ConvergenceError,
    HypothesisError,
    PlatoonLabError,
)
from .profile import (
    HypothesisCheck,
    PiecewiseLinearProfile,
    Profile,
    SpeedDropProfile,
    ensure_valid,
    validate,
)
from .platoon import (
    ErrorPair,
    PlatoonState,
    TargetCurvePoint,
    TargetDistance,
    distance_to_target,
    errors,
    headway,
    max_error,
    spacings,
    target_point,
)
from .controller import (
    ControlDecision,
    ControllerParams,
    closed_loop_rhs,
    control,
    control_bound,
)
from .sim import (
    CollisionEvent,
    Perturbation,
    Scenario,
    Trajectory,
    decay_series,
    initial_state,
    run,
)
from .analysis import (
    AnalysisReport,
    BoundCheck,
    DecayFit,
    analyze,
    check_control_bounds,
    check_decay_envelope,
    check_error_distance_bound,
    check_error_propagation_bounds,
    fit_decay_rate,
    headway_band,
    string_gain_coefficients,
    macroscopic,
    noncollision_threshold,
)

__version__ = "0.1.0"
