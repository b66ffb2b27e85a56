"""Config-driven command-line front end.

A run is described by a small JSON document: a device block, exactly one
command block (critical, spectrum, sweep_g, pulse, or fit), and optional
output settings. Frequencies anywhere in the config accept unit suffixes
(mHz, Hz, kHz, MHz, GHz) and are normalized to Hz.

CSV outputs are written atomically (temp file + rename), start with a
comment header carrying the format version and the full device parameters,
and format floats with 17 significant digits, so identical configs produce
byte-identical files.

Exit codes: 0 success, 2 config error, 3 numerical/domain error, 4 I/O
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import calibrate, model, pulses, spectra
from .errors import ConfigError, McpaError, ParameterError
from .model import DeviceParams

FORMAT_VERSION = "1"
CSV_FORMAT_TAG = "mcpa-csv/1"
COMMANDS = ("critical", "spectrum", "sweep_g", "pulse", "fit")

_UNIT_SCALE = {"mHz": 1e-3, "Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
_FREQ_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*(mHz|Hz|kHz|MHz|GHz)?\s*$")


def parse_frequency(value: Any) -> float:
    """Normalize a config frequency (number, or string with unit suffix) to Hz."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        m = _FREQ_RE.match(value)
        if m:
            try:
                number = float(m.group(1))
            except ValueError:
                raise ConfigError(f"cannot parse frequency {value!r}") from None
            return number * _UNIT_SCALE[m.group(2) or "Hz"]
    raise ConfigError(f"cannot parse frequency {value!r}")


@dataclass(frozen=True)
class RunConfig:
    """Validated run description."""

    device: DeviceParams
    command: str
    options: dict[str, Any]
    out_dir: str
    seed: int | None
    points_override: int | None


def _build_device(block: Any) -> DeviceParams:
    if block == "reference" or (isinstance(block, dict) and block.get("preset") == "reference"):
        return model.reference_device()
    if not isinstance(block, dict):
        raise ConfigError("device block must be a mapping or the string 'reference'")
    try:
        g0 = block.get("vacuum_coupling")
        return DeviceParams(
            cavity_freq_hz=parse_frequency(block["cavity_freq"]),
            mech_freq_hz=parse_frequency(block["mech_freq"]),
            kappa_hz=parse_frequency(block["kappa"]),
            eta=float(block["eta"]),
            gamma_m_hz=parse_frequency(block["gamma_m"]),
            vacuum_coupling_hz=None if g0 is None else parse_frequency(g0),
        )
    except KeyError as exc:
        raise ConfigError(f"device block is missing {exc.args[0]!r}") from None
    except (TypeError, ValueError, ParameterError) as exc:
        raise ConfigError(f"bad device block: {exc}") from None


def load_config(path: str, *, out_dir: str | None = None, seed: int | None = None,
                points: int | None = None) -> RunConfig:
    """Read and validate a JSON run config, applying CLI overrides."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise ConfigError(
            f"unsupported config version {version!r}; this build reads version {FORMAT_VERSION!r}"
        )
    if "device" not in doc:
        raise ConfigError("config needs a device block")
    present = [k for k in COMMANDS if k in doc]
    if len(present) != 1:
        raise ConfigError(
            f"config must contain exactly one command block out of {COMMANDS}, found {present or 'none'}"
        )
    command = present[0]
    options = doc[command]
    if options is None:
        options = {}
    if not isinstance(options, dict):
        raise ConfigError(f"{command} block must be a mapping")
    unknown = set(doc) - set(COMMANDS) - {"version", "device", "out", "seed"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    return RunConfig(
        device=_build_device(doc["device"]),
        command=command,
        options=dict(options),
        out_dir=out_dir or doc.get("out") or ".",
        seed=seed if seed is not None else doc.get("seed"),
        points_override=points,
    )


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.17g}"
    return str(value)


def _device_meta(device: DeviceParams) -> dict[str, Any]:
    meta = {
        "cavity_freq_hz": device.cavity_freq_hz,
        "mech_freq_hz": device.mech_freq_hz,
        "kappa_hz": device.kappa_hz,
        "eta": device.eta,
        "gamma_m_hz": device.gamma_m_hz,
    }
    if device.vacuum_coupling_hz is not None:
        meta["vacuum_coupling_hz"] = device.vacuum_coupling_hz
    return meta


def write_csv(path: str, meta: dict[str, Any], columns: list[str], rows) -> None:
    """Atomic CSV write: header comment block, column row, data rows."""
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# format={CSV_FORMAT_TAG}\n")
            for key, value in meta.items():
                fh.write(f"# {key}={_fmt(value)}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(float(v)) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_measured_csv(path: str, *, absolute: bool | None = None) -> calibrate.MeasuredSpectrum:
    """Load a MeasuredSpectrum from CSV.

    Accepts a frequency column named frequency_hz or detuning_hz plus either
    (re, im) or (amp_db [, phase_rad]). Comment lines start with '#'.
    """
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path} is empty") from None
        table = [row for row in reader if row]
    cols = {name.strip(): i for i, name in enumerate(header)}
    if "frequency_hz" in cols:
        freq_col, is_absolute = cols["frequency_hz"], True
    elif "detuning_hz" in cols:
        freq_col, is_absolute = cols["detuning_hz"], False
    else:
        raise ConfigError(f"{path} has neither a frequency_hz nor a detuning_hz column")
    if absolute is not None:
        is_absolute = absolute
    data = np.array([[float(v) for v in row] for row in table], dtype=float)
    freq = data[:, freq_col]
    if "re" in cols and "im" in cols:
        values = data[:, cols["re"]] + 1j * data[:, cols["im"]]
        return calibrate.MeasuredSpectrum.from_complex(freq, values, absolute_frequency=is_absolute)
    if "amp_db" in cols:
        phase = data[:, cols["phase_rad"]] if "phase_rad" in cols else None
        return calibrate.MeasuredSpectrum.from_polar(
            freq, data[:, cols["amp_db"]], phase, absolute_frequency=is_absolute
        )
    raise ConfigError(f"{path} needs (re, im) or amp_db columns")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _coupling_from(options: dict, key: str = "g", default=None) -> float:
    if key not in options:
        if default is None:
            raise ConfigError(f"command block needs a {key!r} entry")
        return default
    return parse_frequency(options[key])


def cmd_critical(cfg: RunConfig) -> int:
    device = cfg.device
    gc = model.critical_coupling(device)
    gb = model.boundary_coupling(device)
    lines = {
        "critical_coupling_hz": gc,
        "boundary_coupling_hz": gb,
        "boundary_to_critical_ratio": gb / gc,
    }
    if "g" in cfg.options:
        g = _coupling_from(cfg.options)
        tz = model.transmission_at_resonance(device, g)
        result = model.classify_regime(device, g)
        lines["g_hz"] = g
        lines["t_z"] = tz
        lines["t_z_power_db"] = 20.0 * math.log10(abs(tz)) if tz != 0.0 else -math.inf
        lines["regime"] = result.regime.value
        lines["at_boundary"] = result.at_boundary
    for key, value in lines.items():
        print(f"{key}={_fmt(value) if isinstance(value, float) else value}")
    return 0


def _spectrum_rows(spec_obj: spectra.Spectrum) -> np.ndarray:
    delay = spec_obj.delay_s
    if delay is None:
        delay = np.full(len(spec_obj), np.nan)
    return np.column_stack([
        spec_obj.x_hz,
        spec_obj.t.real,
        spec_obj.t.imag,
        spec_obj.amplitude_db,
        spec_obj.phase_rad,
        delay,
    ])


def cmd_spectrum(cfg: RunConfig) -> int:
    device = cfg.device
    g = _coupling_from(cfg.options)
    n = cfg.points_override or int(cfg.options.get("points", 2001))
    if "start" in cfg.options or "stop" in cfg.options:
        if not ("start" in cfg.options and "stop" in cfg.options):
            raise ConfigError("give both start and stop, or neither")
        sweep = spectra.SweepSpec(
            axis=spectra.SweepAxis.DETUNING,
            start_hz=parse_frequency(cfg.options["start"]),
            stop_hz=parse_frequency(cfg.options["stop"]),
            n_points=n,
            scale=_grid_scale(cfg.options.get("scale", "linear")),
        )
    else:
        sweep = spectra.detuning_span(device, g, n_points=n)
    result = spectra.numeric_group_delay(spectra.sweep_detuning(device, g, sweep))
    meta = {"command": "spectrum", **_device_meta(device), "g_hz": g,
            "n_points": n, "scale": sweep.scale.value}
    if cfg.seed is not None:
        meta["seed"] = cfg.seed
    path = os.path.join(cfg.out_dir, "spectrum.csv")
    write_csv(path, meta, ["detuning_hz", "re", "im", "amp_db", "phase_rad", "delay_s"],
              _spectrum_rows(result))
    print(f"wrote {path} ({len(result)} rows)")
    return 0


def _grid_scale(name: str) -> spectra.GridScale:
    try:
        return spectra.GridScale(name)
    except ValueError:
        raise ConfigError(f"scale must be 'linear' or 'log', got {name!r}") from None


def cmd_sweep_g(cfg: RunConfig) -> int:
    device = cfg.device
    n = cfg.points_override or int(cfg.options.get("points", 2000))
    sweep = spectra.SweepSpec(
        axis=spectra.SweepAxis.COUPLING,
        start_hz=parse_frequency(cfg.options.get("start", 5.0)),
        stop_hz=parse_frequency(cfg.options.get("stop", 60.0)),
        n_points=n,
        scale=_grid_scale(cfg.options.get("scale", "log")),
    )
    result = spectra.sweep_coupling_resonance(device, sweep)
    rows = np.column_stack([
        result.x_hz,
        result.t.real,
        result.amplitude_db,
        result.phase_rad,
        result.delay_s,
    ])
    meta = {"command": "sweep_g", **_device_meta(device),
            "n_points": n, "scale": sweep.scale.value}
    if cfg.seed is not None:
        meta["seed"] = cfg.seed
    path = os.path.join(cfg.out_dir, "sweep_g.csv")
    write_csv(path, meta, ["g_hz", "t_z", "amp_db", "phase_rad", "delay_s"], rows)
    print(f"wrote {path} ({len(result)} rows)")
    return 0


def _waveform_rows(w: pulses.PulseWaveform) -> np.ndarray:
    return np.column_stack([
        w.times_s, w.samples.real, w.samples.imag, np.abs(w.samples),
    ])


def cmd_pulse(cfg: RunConfig) -> int:
    device = cfg.device
    g = _coupling_from(cfg.options)
    method = cfg.options.get("method", "fft")
    carrier = parse_frequency(cfg.options.get("carrier_detuning", 0.0))
    n = cfg.points_override or int(cfg.options.get("samples", 4096))
    fraction = float(cfg.options.get("bandwidth_fraction", pulses.DELAY_BANDWIDTH_FRACTION))
    pulse_cfg = pulses.delay_pulse_config(
        device, g, carrier_detuning_hz=carrier, bandwidth_fraction=fraction, n_samples=n
    )
    window = model.effective_window_hz(device, g)
    pulse = pulses.gaussian_pulse(pulse_cfg, window_hz=window)
    if method == "fft":
        out = pulses.propagate(pulse, device, g)
        ref = pulses.propagate(pulse, device, 0.0)
    elif method == "ode":
        out = pulses.integrate_langevin(pulse, device, g, method="exact")
        ref = pulses.integrate_langevin(pulse, device, 0.0, method="exact")
    else:
        raise ConfigError(f"pulse method must be 'fft' or 'ode', got {method!r}")
    tau = pulses.center_time(out) - pulses.center_time(ref)
    meta = {"command": "pulse", **_device_meta(device), "g_hz": g,
            "carrier_detuning_hz": carrier, "method": method,
            "sigma_t_s": pulse_cfg.sigma_t_s, "dt_s": pulse_cfg.dt_s}
    if cfg.seed is not None:
        meta["seed"] = cfg.seed
    columns = ["time_s", "re", "im", "abs"]
    for name, w in (("pulse_input", pulse), ("pulse_output", out), ("pulse_reference", ref)):
        write_csv(os.path.join(cfg.out_dir, f"{name}.csv"), meta, columns, _waveform_rows(w))
    print(f"extracted_delay_s={_fmt(tau)}")
    try:
        analytic = model.group_delay(device, g, carrier)
        print(f"analytic_delay_s={_fmt(analytic)}")
    except McpaError:
        print("analytic_delay_s=nan")
    print(f"regime={model.classify_regime(device, g).regime.value}")
    if out.warnings:
        print(f"warnings={','.join(out.warnings)}")
    print(f"wrote {cfg.out_dir}/pulse_input.csv, pulse_output.csv, pulse_reference.csv")
    return 0


def cmd_fit(cfg: RunConfig) -> int:
    options = cfg.options
    kind = options.get("kind")
    if kind not in ("bare", "mechanical", "critical_sweep"):
        raise ConfigError("fit kind must be 'bare', 'mechanical', or 'critical_sweep'")
    if "data" not in options:
        raise ConfigError("fit block needs a 'data' path")
    data_path = options["data"]
    report: dict[str, Any] = {"kind": kind, "data": data_path}
    if kind == "critical_sweep":
        with open(data_path, "r", encoding="utf-8") as fh:
            reader = csv.reader(line for line in fh if not line.startswith("#"))
            header = next(reader)
            table = np.array([[float(v) for v in row] for row in reader if row])
        cols = {name.strip(): i for i, name in enumerate(header)}
        if "g_hz" not in cols:
            raise ConfigError(f"{data_path} has no g_hz column")
        g = table[:, cols["g_hz"]]
        if "t_z" in cols:
            power = np.square(table[:, cols["t_z"]])
        elif "amp_db" in cols:
            power = 10.0 ** (table[:, cols["amp_db"]] / 10.0)
        else:
            raise ConfigError(f"{data_path} needs a t_z or amp_db column")
        report["critical_coupling_hz"] = calibrate.infer_critical_from_sweep(g, power)
    else:
        absolute = None
        if "frequency" in options:
            absolute = {"absolute": True, "detuning": False}.get(options["frequency"])
            if absolute is None:
                raise ConfigError("fit frequency must be 'absolute' or 'detuning'")
        measured = read_measured_csv(data_path, absolute=absolute)
        snr_db = options.get("add_noise_snr_db")
        if snr_db is not None:
            report["add_noise_snr_db"] = float(snr_db)
            report["seed"] = cfg.seed
            rng = np.random.default_rng(cfg.seed)
            level = 10.0 ** (-float(snr_db) / 20.0)
            values = measured.complex_values()
            noise = level / math.sqrt(2.0) * (
                rng.standard_normal(len(values)) + 1j * rng.standard_normal(len(values))
            )
            measured = calibrate.MeasuredSpectrum.from_complex(
                measured.frequency_hz, values + noise,
                absolute_frequency=measured.absolute_frequency,
            )
        if kind == "bare":
            fit = calibrate.fit_bare_cavity(measured)
        else:
            fit = calibrate.fit_mechanical_window(measured, cfg.device)
        report["params"] = fit.params
        report["sigma"] = fit.sigma
        report["residual_rms"] = fit.residual_rms
        report["n_iterations"] = fit.n_iterations
        report["converged"] = fit.converged
        if fit.alternate is not None:
            report["alternate_params"] = fit.alternate.params
            report["alternate_residual_rms"] = fit.alternate.residual_rms
    path = os.path.join(cfg.out_dir, "fit_report.json")
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    for key, value in report.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                print(f"{key}.{sub}={_fmt(v) if isinstance(v, float) else v}")
        else:
            print(f"{key}={_fmt(value) if isinstance(value, float) else value}")
    return 0


_DISPATCH = {
    "critical": cmd_critical,
    "spectrum": cmd_spectrum,
    "sweep_g": cmd_sweep_g,
    "pulse": cmd_pulse,
    "fit": cmd_fit,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mcpa",
        description="Electromechanical cavity response: spectra, resonance sweeps, "
        "pulse propagation, and calibration fits, driven by a JSON config.",
    )
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="random seed for noise workflows")
    parser.add_argument("--points", type=int, default=None, help="override the grid point count")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, out_dir=args.out, seed=args.seed, points=args.points)
        if cfg.command != "critical":
            os.makedirs(cfg.out_dir, exist_ok=True)
        return _DISPATCH[cfg.command](cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    except McpaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
