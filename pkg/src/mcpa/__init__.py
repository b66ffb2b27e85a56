"""Linearized red-detuned cavity electromechanics toolkit.

Models a single optical/microwave mode coupled to a mechanical mode in the
resolved-sideband, weak-coupling regime, probed in transmission. Provides
the closed-form probe response, resonance and detuning sweeps with group
delay, time-domain pulse propagation (spectral and state-space routes),
and calibration fits that recover device parameters from measured spectra.
"""

from .errors import (
    BracketingError,
    ConfigError,
    ConvergenceError,
    DelaySingularityError,
    DipNotFoundError,
    FitError,
    McpaError,
    NoCriticalCouplingError,
    ParameterError,
    PulseEstimationError,
    StabilityError,
    UndefinedPhaseError,
)
from .model import (
    ComplexResponse,
    Coupling,
    DeviceParams,
    Regime,
    RegimeResult,
    boundary_coupling,
    classify_regime,
    critical_coupling,
    effective_window_hz,
    enhanced_coupling,
    group_delay,
    group_delay_curve,
    phase_at_resonance,
    principal_phase,
    reference_device,
    resonance_curve,
    resonance_delay_curve,
    resonance_group_delay,
    transmission,
    transmission_at_resonance,
    transmission_curve,
)
from .spectra import (
    GridScale,
    Spectrum,
    SweepAxis,
    SweepSpec,
    detuning_span,
    numeric_group_delay,
    resonance_spectrum,
    sweep_coupling_resonance,
    sweep_detuning,
    unwrap_phase,
)
from .pulses import (
    CenterTimeEstimate,
    PulseConfig,
    PulseWaveform,
    center_time,
    center_time_estimates,
    cw_response,
    delay_pulse_config,
    extract_delay,
    gaussian_pulse,
    integrate_langevin,
    propagate,
    waveform_rms_sigma,
)
from .calibrate import (
    FitResult,
    MeasuredSpectrum,
    fit_bare_cavity,
    fit_mechanical_window,
    infer_critical_from_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BracketingError",
    "CenterTimeEstimate",
    "ComplexResponse",
    "ConfigError",
    "ConvergenceError",
    "Coupling",
    "DelaySingularityError",
    "DeviceParams",
    "DipNotFoundError",
    "FitError",
    "FitResult",
    "GridScale",
    "McpaError",
    "MeasuredSpectrum",
    "NoCriticalCouplingError",
    "ParameterError",
    "PulseConfig",
    "PulseEstimationError",
    "PulseWaveform",
    "Regime",
    "RegimeResult",
    "Spectrum",
    "StabilityError",
    "SweepAxis",
    "SweepSpec",
    "UndefinedPhaseError",
    "boundary_coupling",
    "center_time",
    "center_time_estimates",
    "classify_regime",
    "critical_coupling",
    "cw_response",
    "delay_pulse_config",
    "detuning_span",
    "effective_window_hz",
    "enhanced_coupling",
    "extract_delay",
    "fit_bare_cavity",
    "fit_mechanical_window",
    "gaussian_pulse",
    "group_delay",
    "group_delay_curve",
    "infer_critical_from_sweep",
    "integrate_langevin",
    "numeric_group_delay",
    "phase_at_resonance",
    "principal_phase",
    "propagate",
    "reference_device",
    "resonance_curve",
    "resonance_delay_curve",
    "resonance_group_delay",
    "resonance_spectrum",
    "sweep_coupling_resonance",
    "sweep_detuning",
    "transmission",
    "transmission_at_resonance",
    "transmission_curve",
    "unwrap_phase",
    "waveform_rms_sigma",
]
