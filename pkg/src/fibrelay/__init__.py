"""fibrelay: random Fibonacci recursions for cooperative relay chains.

Simulates the two-term random recursion driving the signal magnitude of a
cooperative amplify-and-forward relay chain together with its companion
noise-power system, estimates the growth rate (upper Lyapunov exponent) of
both, checks the capacity and transmit-power scaling laws empirically, and
calibrates the amplification gain to the zero-growth operating point.
"""

__version__ = "0.1.0"

from .calibrate import CalibrationResult, bracket_expand, find_zero_lyapunov_gain
from .cocycle import (
    CSV_HEADER,
    InfoCocycleState,
    NetworkConfig,
    NoiseCocycleState,
    Trajectory,
    init_info,
    initial_noise_state,
    renormalize,
    run_trajectory,
    step_info,
    step_noise,
)
from .coeffs import (
    CoefficientModel,
    ConstantGain,
    Deterministic,
    GainPolicy,
    LogNormal,
    PerNodeGain,
    Rayleigh,
    RngStream,
    SignedBernoulli,
    Uniform,
    expected_log_eta,
    expected_log_eta_mc,
    parse_gains,
    parse_model,
    sample_eta,
    sample_eta_batch,
)
from .errors import (
    ConfigError,
    DegenerateStateError,
    UnbracketableError,
    ValidationOnlyModelError,
)
from .laws import (
    LawReport,
    SlopeFit,
    ThetaBandCheck,
    check_theta_p,
    default_burn_in,
    simulate_capacity_ensemble,
    slope_estimate,
    verify_capacity_law,
    verify_power_law,
)
from .lyapunov import (
    GROWTH_RATE,
    TAIL_RATIO,
    LyapunovEstimate,
    estimate_lambda,
    estimate_noise_exponent,
    lambda_deterministic_closed_form,
)
from .metrics import capacity_nats, log_capacity_nats, snr_log, transmit_power_log

__all__ = [
    "__version__",
    "CalibrationResult", "bracket_expand", "find_zero_lyapunov_gain",
    "CSV_HEADER", "InfoCocycleState", "NetworkConfig", "NoiseCocycleState",
    "Trajectory", "init_info", "initial_noise_state", "renormalize",
    "run_trajectory", "step_info", "step_noise",
    "CoefficientModel", "ConstantGain", "Deterministic", "GainPolicy",
    "LogNormal", "PerNodeGain", "Rayleigh", "RngStream", "SignedBernoulli",
    "Uniform", "expected_log_eta", "expected_log_eta_mc", "parse_gains",
    "parse_model", "sample_eta", "sample_eta_batch",
    "ConfigError", "DegenerateStateError", "UnbracketableError",
    "ValidationOnlyModelError",
    "LawReport", "SlopeFit", "ThetaBandCheck", "check_theta_p",
    "default_burn_in", "simulate_capacity_ensemble", "slope_estimate",
    "verify_capacity_law", "verify_power_law",
    "GROWTH_RATE", "TAIL_RATIO", "LyapunovEstimate", "estimate_lambda",
    "estimate_noise_exponent", "lambda_deterministic_closed_form",
    "capacity_nats", "log_capacity_nats", "snr_log", "transmit_power_log",
]
