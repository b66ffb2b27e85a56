"""Parameter calibration from measured transmission spectra.

Fits the closed-form response to complex, polar, or amplitude-only spectra
with a damped least-squares (Levenberg-Marquardt style) optimizer using
finite-difference Jacobians. Every fit self-initializes from the data:
resonance position from the amplitude minimum, linewidth from the
half-depth width, coupling fraction from the dip depth, mechanical
parameters from the window height and width.

Amplitude-only data cannot tell the two sides of the critical coupling
apart (equal dip depths occur at one coupling below and one above), so
those fits report both candidates; phase data breaks the tie.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import model
from .errors import (
    BracketingError,
    ConvergenceError,
    DipNotFoundError,
    FitError,
    ParameterError,
)
from .model import DeviceParams

TWO_PI = model.TWO_PI

#: Optimizer budget and stopping rule.
MAX_ITERATIONS = 200
GRADIENT_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class MeasuredSpectrum:
    """One measured transmission trace.

    Either complex samples (`t`) or polar ones (`amplitude_db`, optionally
    `phase_rad`; a missing phase marks an amplitude-only measurement).

    Attributes
    ----------
    frequency_hz : ndarray
        (Hz) strictly increasing axis; absolute probe frequency when
        `absolute_frequency`, otherwise detuning from the cavity resonance.
    """

    frequency_hz: NDArray[np.floating]
    t: NDArray[np.complexfloating] | None = None
    amplitude_db: NDArray[np.floating] | None = None
    phase_rad: NDArray[np.floating] | None = None
    absolute_frequency: bool = True

    def __post_init__(self) -> None:
        freq = np.asarray(self.frequency_hz, dtype=float)
        object.__setattr__(self, "frequency_hz", freq)
        if freq.ndim != 1 or len(freq) < 20:
            raise ParameterError(f"need at least 20 spectrum rows, got {freq.shape}")
        if not np.all(np.isfinite(freq)) or np.any(np.diff(freq) <= 0.0):
            raise ParameterError("frequency axis must be finite and strictly increasing")
        if (self.t is None) == (self.amplitude_db is None):
            raise ParameterError("provide exactly one of t (complex) or amplitude_db (polar)")
        for name in ("t", "amplitude_db", "phase_rad"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=complex if name == "t" else float)
            object.__setattr__(self, name, arr)
            if arr.shape != freq.shape:
                raise ParameterError(f"{name} must match the frequency axis shape")
            if not np.all(np.isfinite(arr.view(float) if name == "t" else arr)):
                raise ParameterError(f"{name} contains non-finite values")

    @property
    def has_phase(self) -> bool:
        return self.t is not None or self.phase_rad is not None

    @property
    def is_polar(self) -> bool:
        return self.amplitude_db is not None

    def amplitude(self) -> NDArray[np.floating]:
        """() linear transmission amplitude |t|."""
        if self.t is not None:
            return np.abs(self.t)
        return 10.0 ** (self.amplitude_db / 20.0)

    def complex_values(self) -> NDArray[np.complexfloating]:
        """Complex transmission; requires phase information."""
        if self.t is not None:
            return self.t
        if self.phase_rad is None:
            raise ParameterError("amplitude-only spectrum carries no complex values")
        return self.amplitude() * np.exp(1j * self.phase_rad)

    @classmethod
    def from_complex(cls, frequency_hz, t, absolute_frequency: bool = True):
        return cls(frequency_hz=np.asarray(frequency_hz, float),
                   t=np.asarray(t, complex),
                   absolute_frequency=absolute_frequency)

    @classmethod
    def from_polar(cls, frequency_hz, amplitude_db, phase_rad=None,
                   absolute_frequency: bool = True):
        return cls(frequency_hz=np.asarray(frequency_hz, float),
                   amplitude_db=np.asarray(amplitude_db, float),
                   phase_rad=None if phase_rad is None else np.asarray(phase_rad, float),
                   absolute_frequency=absolute_frequency)


@dataclass(frozen=True)
class FitResult:
    """Converged calibration result.

    `sigma` holds one-standard-deviation uncertainties from the local
    quadratic approximation at the optimum. `residual_history` is the rms
    residual after each accepted optimizer step (non-increasing by
    construction). `alternate` carries the mirror solution when the data
    cannot break a degeneracy.
    """

    params: dict[str, float]
    sigma: dict[str, float]
    residual_rms: float
    n_iterations: int
    converged: bool
    residual_history: tuple[float, ...]
    alternate: "FitResult | None" = None


# ---------------------------------------------------------------------------
# damped least squares
# ---------------------------------------------------------------------------

def _fd_jacobian(residual, x, r0, scale):
    m, n = len(r0), len(x)
    jac = np.empty((m, n))
    rel = float(np.cbrt(np.finfo(float).eps))
    for i in range(n):
        h = rel * max(abs(x[i]), scale[i])
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (residual(xp) - residual(xm)) / (2.0 * h)
    return jac


def _levenberg_marquardt(residual, x0, scale, *, max_iter=MAX_ITERATIONS,
                         grad_rtol=GRADIENT_RTOL):
    """Damped least squares with acceptance-gated steps.

    Returns (x, cov, history, n_iter, converged); `history` is the rms
    residual after each accepted step, first entry at the start point.
    """
    x = np.asarray(x0, dtype=float).copy()
    scale = np.asarray(scale, dtype=float)
    r = residual(x)
    m = len(r)
    cost = 0.5 * float(r @ r)
    history = [math.sqrt(2.0 * cost / m)]
    lam = 1e-3
    jac = _fd_jacobian(residual, x, r, scale)
    grad0 = float(np.max(np.abs(jac.T @ r))) or 1.0
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        grad = jac.T @ r
        if float(np.max(np.abs(grad))) <= grad_rtol * grad0:
            converged = True
            break
        normal = jac.T @ jac
        diag = np.clip(np.diag(normal), 1e-300, None)
        accepted = False
        for _ in range(30):
            try:
                step = np.linalg.solve(normal + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = residual(x + step)
            cost_new = 0.5 * float(r_new @ r_new)
            if cost_new < cost:
                x = x + step
                r, cost = r_new, cost_new
                lam = max(lam / 3.0, 1e-14)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # No damping level gives a downhill step, so the quadratic
            # model is exhausted at float precision. On noisy data that
            # happens right at the noise-floor minimum, where the gradient
            # test may still miss by luck of the draw. Count it as
            # convergence only if the near-undamped step confirms the
            # parameters are stationary; otherwise report the stall.
            try:
                probe = np.linalg.solve(normal + 1e-12 * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                break
            rel = float(np.max(np.abs(probe) / np.maximum(np.abs(x), scale)))
            converged = rel < 1e-8
            break
        history.append(math.sqrt(2.0 * cost / m))
        jac = _fd_jacobian(residual, x, r, scale)
        if float(np.max(np.abs(step) / np.maximum(np.abs(x), scale))) < 1e-14:
            converged = True
            break
        if cost < 1e-30:
            converged = True
            break
    dof = max(m - len(x), 1)
    sigma2 = 2.0 * cost / dof
    try:
        cov = sigma2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((len(x), len(x)), np.nan)
    return x, cov, history, n_iter, converged


def _wrap_phase_diff(dphi):
    """Map phase differences into (-pi, pi] without unwrap bookkeeping."""
    return np.angle(np.exp(1j * dphi))


def _make_residual(spectrum: MeasuredSpectrum, model_fn):
    """Residual vector builder matching the measurement mode.

    Complex data: stacked real and imaginary residuals. Polar data with
    phase: amplitude residual plus phase residual weighted by the local
    amplitude (so the phase contributes nothing where the signal vanishes).
    Amplitude-only: amplitude residual alone.
    """
    if spectrum.t is not None:
        data = spectrum.t

        def residual(x):
            diff = model_fn(x) - data
            return np.concatenate([diff.real, diff.imag])

        return residual
    amp = spectrum.amplitude()
    if spectrum.phase_rad is not None:
        phase = spectrum.phase_rad

        def residual(x):
            t = model_fn(x)
            r_amp = np.abs(t) - amp
            r_phase = _wrap_phase_diff(np.angle(t) - phase) * amp
            return np.concatenate([r_amp, r_phase])

        return residual

    def residual(x):
        return np.abs(model_fn(x)) - amp

    return residual


def _finish(x, cov, history, n_iter, converged, names, require_converged=True):
    if require_converged and not converged:
        raise ConvergenceError(
            f"optimizer did not meet the gradient tolerance in {n_iter} iterations"
        )
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return FitResult(
        params={k: float(v) for k, v in zip(names, x)},
        sigma={k: float(s) for k, s in zip(names, sig)},
        residual_rms=history[-1],
        n_iterations=n_iter,
        converged=converged,
        residual_history=tuple(history),
    )


# ---------------------------------------------------------------------------
# bare cavity
# ---------------------------------------------------------------------------

def _bare_model_fn(spectrum):
    freq = spectrum.frequency_hz
    absolute = spectrum.absolute_frequency

    def evaluate(x):
        center, kappa, eta = x
        # detuning = cavity resonance minus probe frequency
        delta = (center - freq) if absolute else (freq + center)
        return 1.0 - eta * kappa / (1j * delta + kappa / 2.0)

    return evaluate


def _bare_init(spectrum):
    """(center, kappa, eta_candidates) estimated straight from the data."""
    amp = spectrum.amplitude()
    freq = spectrum.frequency_hz
    baseline = float(np.median(amp))
    i_dip = int(np.argmin(amp))
    depth_db = 20.0 * math.log10(max(amp[i_dip], 1e-300) / max(baseline, 1e-300))
    if depth_db > -0.5:
        raise DipNotFoundError(
            f"no resonance dip: minimum is {depth_db:.2f} dB below the baseline"
        )
    f_dip = float(freq[i_dip])
    half_power = math.sqrt((amp[i_dip] ** 2 + baseline**2) / 2.0)
    above = amp > half_power
    lo = i_dip
    while lo > 0 and not above[lo]:
        lo -= 1
    hi = i_dip
    while hi < len(amp) - 1 and not above[hi]:
        hi += 1
    width = float(freq[hi] - freq[lo])
    if width <= 0.0:
        width = float(freq[-1] - freq[0]) / 10.0
    center0 = f_dip if spectrum.absolute_frequency else -f_dip
    depth = float(amp[i_dip] / max(baseline, 1e-300))
    if spectrum.has_phase:
        tz = complex(spectrum.complex_values()[i_dip])
        eta_candidates = [min(max((1.0 - tz.real) / 2.0, 0.02), 0.98)]
    else:
        eta_candidates = [
            min(max((1.0 + depth) / 2.0, 0.02), 0.98),
            min(max((1.0 - depth) / 2.0, 0.02), 0.98),
        ]
    return center0, width, eta_candidates


def fit_bare_cavity(
    spectrum: MeasuredSpectrum, init: tuple[float, float, float] | None = None
) -> FitResult:
    """Fit (resonance frequency, kappa, eta) to a pump-off spectrum.

    The spectrum should span at least ~3 linewidths around the dip. With
    complex or polar-with-phase data the coupling side is determined; with
    amplitude-only data the exactly degenerate mirror solution
    (eta -> 1 - eta) is attached as `alternate`.

    Returns
    -------
    FitResult
        params keys: "cavity_freq_hz" (or "center_offset_hz" when the axis
        is detuning), "kappa_hz", "eta".
    """
    model_fn = _bare_model_fn(spectrum)
    residual = _make_residual(spectrum, model_fn)
    name0 = "cavity_freq_hz" if spectrum.absolute_frequency else "center_offset_hz"
    names = (name0, "kappa_hz", "eta")
    if init is not None:
        starts = [tuple(init)]
    else:
        center0, kappa0, eta_candidates = _bare_init(spectrum)
        starts = [(center0, kappa0, eta) for eta in eta_candidates]
    span = float(spectrum.frequency_hz[-1] - spectrum.frequency_hz[0])
    results = []
    for x0 in starts:
        scale = (max(abs(x0[0]), span), abs(x0[1]) or span, 1.0)
        x, cov, hist, n_it, conv = _levenberg_marquardt(residual, x0, scale)
        results.append(_finish(x, cov, hist, n_it, conv, names))
    results.sort(key=lambda r: r.residual_rms)
    primary = results[0]
    if len(results) > 1 and abs(results[1].params["eta"] - primary.params["eta"]) > 1e-6:
        primary = FitResult(
            params=primary.params,
            sigma=primary.sigma,
            residual_rms=primary.residual_rms,
            n_iterations=primary.n_iterations,
            converged=primary.converged,
            residual_history=primary.residual_history,
            alternate=results[1],
        )
    return primary


# ---------------------------------------------------------------------------
# mechanical window
# ---------------------------------------------------------------------------

def _window_model_fn(spectrum, cavity: DeviceParams):
    kappa = TWO_PI * cavity.kappa_hz
    eta = cavity.eta
    if spectrum.absolute_frequency:
        delta_axis = cavity.cavity_freq_hz - spectrum.frequency_hz
    else:
        delta_axis = spectrum.frequency_hz

    def evaluate(x):
        gamma_hz, g_hz, offset_hz = x
        gamma = TWO_PI * gamma_hz
        big_g2 = (TWO_PI * g_hz) ** 2
        delta = TWO_PI * delta_axis
        mech = 1j * (delta - TWO_PI * offset_hz) + gamma / 2.0
        cav = 1j * delta + kappa / 2.0
        return 1.0 - eta * kappa * mech / (mech * cav + big_g2)

    return evaluate, delta_axis


def _window_init(spectrum, cavity, delta_axis):
    """Closed-form seed: window width gives the effective linewidth, the
    window height at its center gives the split between gamma_m and G."""
    amp = spectrum.amplitude()
    bare = abs(1.0 - 2.0 * cavity.eta)
    dev = np.abs(amp - bare)
    i_pk = int(np.argmax(dev))
    if dev[i_pk] < 0.05 * max(bare, 0.05):
        raise DipNotFoundError("no mechanical feature stands out from the bare background")
    half = dev[i_pk] / 2.0
    lo = i_pk
    while lo > 0 and dev[lo] > half:
        lo -= 1
    hi = i_pk
    while hi < len(dev) - 1 and dev[hi] > half:
        hi += 1
    gamma_eff = abs(float(delta_axis[hi] - delta_axis[lo]))
    if gamma_eff <= 0.0:
        gamma_eff = abs(float(delta_axis[-1] - delta_axis[0])) / 10.0
    offset0 = float(delta_axis[i_pk])
    if spectrum.has_phase:
        tz_values = [float(np.real(spectrum.complex_values()[i_pk]))]
    else:
        mag = float(amp[i_pk])
        tz_values = [mag, -mag]
    seeds = []
    for tz in tz_values:
        tz = min(tz, 0.999)
        gamma0 = gamma_eff * (1.0 - tz) / (2.0 * cavity.eta)
        gamma0 = min(max(gamma0, 1e-12), gamma_eff * 0.999999)
        g0 = math.sqrt(max(cavity.kappa_hz * (gamma_eff - gamma0) / 4.0, 1e-24))
        seeds.append((gamma0, g0, offset0))
    return seeds, gamma_eff


def fit_mechanical_window(
    spectrum: MeasuredSpectrum,
    cavity: DeviceParams,
    init: tuple[float, float, float] | None = None,
) -> FitResult:
    """Fit (gamma_m, coupling rate, window center offset) with the cavity
    parameters held fixed.

    The window feature is only Hz wide while the cavity line is hundreds of
    kHz, so the cavity must be calibrated first (see fit_bare_cavity) and
    passed in. Amplitude-only data leave the side of the critical coupling
    undetermined near the dip; both candidates are then reported, primary
    first by residual.

    Returns
    -------
    FitResult
        params keys: "gamma_m_hz", "g_hz", "center_offset_hz".
    """
    model_fn, delta_axis = _window_model_fn(spectrum, cavity)
    residual = _make_residual(spectrum, model_fn)
    names = ("gamma_m_hz", "g_hz", "center_offset_hz")
    if init is not None:
        seeds = [tuple(init)]
        gamma_eff = abs(init[0]) + 4.0 * init[1] ** 2 / cavity.kappa_hz
    else:
        seeds, gamma_eff = _window_init(spectrum, cavity, delta_axis)
    results = []
    for x0 in seeds:
        scale = (max(abs(x0[0]), 1e-6), max(abs(x0[1]), 1e-3), max(gamma_eff, 1e-6))
        x, cov, hist, n_it, conv = _levenberg_marquardt(residual, x0, scale)
        x[0] = abs(x[0])
        x[1] = abs(x[1])
        results.append(_finish(x, cov, hist, n_it, conv, names))
    results.sort(key=lambda r: r.residual_rms)
    primary = results[0]
    if len(results) > 1:
        g_gap = abs(results[1].params["g_hz"] - primary.params["g_hz"])
        if g_gap > 1e-9 * max(primary.params["g_hz"], 1.0):
            primary = FitResult(
                params=primary.params,
                sigma=primary.sigma,
                residual_rms=primary.residual_rms,
                n_iterations=primary.n_iterations,
                converged=primary.converged,
                residual_history=primary.residual_history,
                alternate=results[1],
            )
    return primary


# ---------------------------------------------------------------------------
# critical coupling from a resonance sweep
# ---------------------------------------------------------------------------

def infer_critical_from_sweep(
    g_hz: NDArray[np.floating], t_z_power: NDArray[np.floating]
) -> float:
    """Locate the critical coupling from a measured (G, |t_z|^2) sweep.

    Interpolates a parabola through log(|t_z|^2) versus log(G) around the
    deepest sample and returns the vertex. The deepest sample must be an
    interior point: a sweep that sits entirely on one side of the critical
    coupling cannot bracket it.

    Returns
    -------
    float
        (Hz) estimated critical coupling.

    Raises
    ------
    BracketingError
        If the minimum lies on the sweep edge.
    """
    g = np.asarray(g_hz, dtype=float)
    power = np.asarray(t_z_power, dtype=float)
    if g.shape != power.shape or g.ndim != 1 or len(g) < 5:
        raise ParameterError("need matching 1-d arrays with at least 5 sweep points")
    if np.any(g <= 0.0) or not np.all(np.isfinite(g)) or np.any(np.diff(g) <= 0.0):
        raise ParameterError("coupling grid must be positive, finite, strictly ascending")
    if np.any(power < 0.0) or not np.all(np.isfinite(power)):
        raise ParameterError("t_z power values must be finite and non-negative")
    i = int(np.argmin(power))
    if i == 0 or i == len(g) - 1:
        raise BracketingError(
            "deepest point sits on the sweep edge; the critical coupling is not bracketed"
        )
    if power[i] == 0.0:
        return float(g[i])
    u = np.log(g[i - 1: i + 2])
    y = np.log(power[i - 1: i + 2])
    a, b, _ = np.polyfit(u, y, 2)
    if a <= 0.0:
        raise FitError("log-power samples around the minimum are not convex")
    return float(np.exp(-b / (2.0 * a)))
