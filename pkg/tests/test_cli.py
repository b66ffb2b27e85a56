"""CLI tests: config parsing, command execution, exit codes, determinism.

All invocations run in-process through cli.main so coverage and
monkeypatching work; the console entry point is the same function.
"""

import json
import os

import numpy as np
import pytest

from mcpa import cli
from mcpa.errors import ConfigError


def write_config(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def reference_doc(**command):
    doc = {"version": "1", "device": {"preset": "reference"}}
    doc.update(command)
    return doc


# ---------------------------------------------------------------------------
# frequency parsing
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "text,expected",
    [
        (420, 420.0),
        (0.0097, 0.0097),
        ("420 kHz", 420e3),
        ("420kHz", 420e3),
        ("5.318 GHz", 5.318e9),
        ("755.5 kHz", 755.5e3),
        ("9.7 mHz", 0.0097),
        ("17.66 Hz", 17.66),
        ("17.66", 17.66),
        ("1e3", 1000.0),
        ("-3.5 Hz", -3.5),
        ("2 MHz", 2e6),
    ],
)
def test_parse_frequency(text, expected):
    assert cli.parse_frequency(text) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize(
    "text", ["fast", "17 THz", "MHz", "1..2 Hz", None, True, [1.0], "420 KHZ", "9.7 mhz"]
)
def test_parse_frequency_rejects(text):
    with pytest.raises(ConfigError):
        cli.parse_frequency(text)


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------

def test_load_config_full_device(tmp_path):
    doc = {
        "version": "1",
        "device": {
            "cavity_freq": "5.318 GHz",
            "mech_freq": "755.5 kHz",
            "kappa": "420 kHz",
            "eta": 0.651,
            "gamma_m": "9.7 mHz",
        },
        "critical": {"g": "17.66 Hz"},
    }
    cfg = cli.load_config(write_config(tmp_path / "c.json", doc))
    assert cfg.device.kappa_hz == 420e3
    assert cfg.device.gamma_m_hz == pytest.approx(0.0097)
    assert cfg.command == "critical"
    assert cfg.options == {"g": "17.66 Hz"}


def test_load_config_preset_and_overrides(tmp_path):
    path = write_config(tmp_path / "c.json", reference_doc(critical=None, seed=7))
    cfg = cli.load_config(path, out_dir="elsewhere", seed=99, points=55)
    assert cfg.device.cavity_freq_hz == 5.318e9
    assert cfg.options == {}
    assert cfg.out_dir == "elsewhere"
    assert cfg.seed == 99  # CLI flag beats the config value
    assert cfg.points_override == 55


@pytest.mark.parametrize(
    "doc",
    [
        {"device": {"preset": "reference"}, "critical": {}},  # no version
        {"version": "2", "device": {"preset": "reference"}, "critical": {}},
        {"version": "1", "critical": {}},  # no device
        {"version": "1", "device": {"preset": "reference"}},  # no command
        reference_doc(critical={}, spectrum={"g": 1}),  # two commands
        reference_doc(critical={}, extra=1),  # unknown key
        reference_doc(critical=[1, 2]),  # command block not a mapping
        {"version": "1", "device": {"eta": 0.5}, "critical": {}},  # missing fields
        {"version": "1", "device": 42, "critical": {}},
    ],
)
def test_load_config_rejects(tmp_path, doc):
    with pytest.raises(ConfigError):
        cli.load_config(write_config(tmp_path / "bad.json", doc))


def test_load_config_rejects_broken_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        cli.load_config(str(path))
    array_root = tmp_path / "array.json"
    array_root.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        cli.load_config(str(array_root))


def test_load_config_rejects_bad_device_values(tmp_path):
    doc = {
        "version": "1",
        "device": {
            "cavity_freq": "5 GHz",
            "mech_freq": "755 kHz",
            "kappa": "420 kHz",
            "eta": 1.4,
            "gamma_m": "9.7 mHz",
        },
        "critical": {},
    }
    with pytest.raises(ConfigError):
        cli.load_config(write_config(tmp_path / "c.json", doc))


# ---------------------------------------------------------------------------
# commands end to end
# ---------------------------------------------------------------------------

def test_critical_command_output(tmp_path, capsys):
    path = write_config(tmp_path / "c.json", reference_doc(critical={"g": 17.66}))
    assert cli.main(["--config", path]) == 0
    out = dict(
        line.split("=", 1) for line in capsys.readouterr().out.strip().splitlines()
    )
    assert float(out["critical_coupling_hz"]) == pytest.approx(17.538158398, abs=1e-6)
    assert float(out["boundary_coupling_hz"]) == pytest.approx(29.687339202, abs=1e-6)
    assert float(out["t_z_power_db"]) == pytest.approx(-49.833, abs=1e-3)
    assert out["regime"] == "delay-side-absorbing"


def test_spectrum_command_writes_csv(tmp_path):
    path = write_config(
        tmp_path / "c.json", reference_doc(spectrum={"g": 23.93, "points": 51})
    )
    out_dir = tmp_path / "out"
    assert cli.main(["--config", path, "--out", str(out_dir)]) == 0
    lines = (out_dir / "spectrum.csv").read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    assert "# format=mcpa-csv/1" in header
    assert "# command=spectrum" in header
    assert any(ln.startswith("# kappa_hz=") for ln in header)
    cols = next(ln for ln in lines if not ln.startswith("#"))
    assert cols == "detuning_hz,re,im,amp_db,phase_rad,delay_s"
    data_rows = [ln for ln in lines if not ln.startswith("#")][1:]
    assert len(data_rows) == 51


def test_points_flag_overrides_config(tmp_path):
    path = write_config(
        tmp_path / "c.json", reference_doc(spectrum={"g": 23.93, "points": 51})
    )
    out_dir = tmp_path / "out"
    assert cli.main(["--config", path, "--out", str(out_dir), "--points", "31"]) == 0
    rows = [
        ln
        for ln in (out_dir / "spectrum.csv").read_text().splitlines()
        if not ln.startswith("#")
    ]
    assert len(rows) == 1 + 31


def test_spectrum_rerun_byte_identical(tmp_path):
    path = write_config(
        tmp_path / "c.json", reference_doc(spectrum={"g": 17.66, "points": 101})
    )
    assert cli.main(["--config", path, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["--config", path, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "spectrum.csv").read_bytes()
    b = (tmp_path / "b" / "spectrum.csv").read_bytes()
    assert a == b


def test_sweep_command_and_critical_sweep_fit(tmp_path, capsys):
    sweep_cfg = write_config(
        tmp_path / "sweep.json",
        reference_doc(sweep_g={"start": 5, "stop": 60, "points": 800}),
    )
    out_dir = tmp_path / "out"
    assert cli.main(["--config", sweep_cfg, "--out", str(out_dir)]) == 0
    fit_cfg = write_config(
        tmp_path / "fit.json",
        reference_doc(
            fit={"kind": "critical_sweep", "data": str(out_dir / "sweep_g.csv")}
        ),
    )
    assert cli.main(["--config", fit_cfg, "--out", str(out_dir)]) == 0
    report = json.loads((out_dir / "fit_report.json").read_text())
    assert report["critical_coupling_hz"] == pytest.approx(17.538, abs=0.01)


def test_pulse_command(tmp_path, capsys):
    path = write_config(
        tmp_path / "c.json", reference_doc(pulse={"g": 155.1, "samples": 1024})
    )
    out_dir = tmp_path / "out"
    assert cli.main(["--config", path, "--out", str(out_dir)]) == 0
    for name in ("pulse_input.csv", "pulse_output.csv", "pulse_reference.csv"):
        assert (out_dir / name).exists()
    out = capsys.readouterr().out
    extracted = float(out.split("extracted_delay_s=")[1].splitlines()[0])
    analytic = float(out.split("analytic_delay_s=")[1].splitlines()[0])
    assert extracted == pytest.approx(analytic, rel=0.05)


def test_fit_bare_roundtrip_via_cli(tmp_path):
    gen = write_config(
        tmp_path / "gen.json",
        reference_doc(
            spectrum={"g": 0, "start": "-1.2 MHz", "stop": "1.2 MHz", "points": 201}
        ),
    )
    out_dir = tmp_path / "out"
    assert cli.main(["--config", gen, "--out", str(out_dir)]) == 0
    fit = write_config(
        tmp_path / "fit.json",
        reference_doc(fit={"kind": "bare", "data": str(out_dir / "spectrum.csv")}),
    )
    assert cli.main(["--config", fit, "--out", str(out_dir)]) == 0
    report = json.loads((out_dir / "fit_report.json").read_text())
    assert report["converged"] is True
    assert report["params"]["kappa_hz"] == pytest.approx(420e3, rel=1e-6)
    assert report["params"]["eta"] == pytest.approx(0.651, rel=1e-6)


def test_fit_noise_reproducible_with_seed(tmp_path):
    gen = write_config(
        tmp_path / "gen.json",
        reference_doc(
            spectrum={"g": 0, "start": "-1.2 MHz", "stop": "1.2 MHz", "points": 201}
        ),
    )
    out_dir = tmp_path / "out"
    assert cli.main(["--config", gen, "--out", str(out_dir)]) == 0
    fit = write_config(
        tmp_path / "fit.json",
        reference_doc(
            fit={
                "kind": "bare",
                "data": str(out_dir / "spectrum.csv"),
                "add_noise_snr_db": 30,
            }
        ),
    )
    reports = []
    for run_dir, seed in (("r1", "11"), ("r2", "11"), ("r3", "12")):
        assert cli.main(
            ["--config", fit, "--out", str(tmp_path / run_dir), "--seed", seed]
        ) == 0
        reports.append((tmp_path / run_dir / "fit_report.json").read_bytes())
    assert reports[0] == reports[1]
    assert reports[0] != reports[2]
    assert json.loads(reports[0])["seed"] == 11


def test_fit_amplitude_only_csv(tmp_path):
    # hand-built amplitude-only data: the report must carry the mirror
    # candidate for eta
    from mcpa import model, spectra

    device = model.reference_device()
    delta = np.linspace(-1.2e6, 1.2e6, 201)
    amp_db = 20.0 * np.log10(np.abs(model.transmission_curve(device, 0.0, delta)))
    data = tmp_path / "amponly.csv"
    rows = "\n".join(f"{d:.17g},{a:.17g}" for d, a in zip(delta, amp_db))
    data.write_text("detuning_hz,amp_db\n" + rows + "\n")
    fit = write_config(
        tmp_path / "fit.json", reference_doc(fit={"kind": "bare", "data": str(data)})
    )
    out_dir = tmp_path / "out"
    assert cli.main(["--config", fit, "--out", str(out_dir)]) == 0
    report = json.loads((out_dir / "fit_report.json").read_text())
    etas = sorted([report["params"]["eta"], report["alternate_params"]["eta"]])
    assert etas[0] == pytest.approx(0.349, abs=1e-3)
    assert etas[1] == pytest.approx(0.651, abs=1e-3)


# ---------------------------------------------------------------------------
# exit codes and failure handling
# ---------------------------------------------------------------------------

def test_exit_code_bad_config(tmp_path, capsys):
    path = write_config(tmp_path / "c.json", reference_doc())
    assert cli.main(["--config", path]) == 2
    assert "config error" in capsys.readouterr().err


def test_exit_code_domain_error(tmp_path, capsys):
    doc = {
        "version": "1",
        "device": {
            "cavity_freq": "5.318 GHz",
            "mech_freq": "755.5 kHz",
            "kappa": "420 kHz",
            "eta": 0.4,
            "gamma_m": "9.7 mHz",
        },
        "critical": {},
    }
    path = write_config(tmp_path / "c.json", doc)
    assert cli.main(["--config", path]) == 3
    assert "error" in capsys.readouterr().err


def test_exit_code_missing_config(tmp_path, capsys):
    assert cli.main(["--config", str(tmp_path / "nope.json")]) == 4
    assert "io error" in capsys.readouterr().err


def test_exit_code_out_dir_is_a_file(tmp_path):
    blocker = tmp_path / "out"
    blocker.write_text("in the way")
    path = write_config(
        tmp_path / "c.json", reference_doc(spectrum={"g": 23.93, "points": 51})
    )
    assert cli.main(["--config", path, "--out", str(blocker)]) == 4


def test_atomic_write_leaves_no_partial_file(tmp_path, monkeypatch):
    def broken_replace(src, dst):
        raise OSError("simulated rename failure")

    monkeypatch.setattr(cli.os, "replace", broken_replace)
    path = write_config(
        tmp_path / "c.json", reference_doc(spectrum={"g": 23.93, "points": 51})
    )
    out_dir = tmp_path / "out"
    assert cli.main(["--config", path, "--out", str(out_dir)]) == 4
    assert list(out_dir.iterdir()) == []


def test_missing_config_flag_is_argparse_error():
    with pytest.raises(SystemExit):
        cli.main([])


def test_fit_rejects_unknown_kind(tmp_path):
    path = write_config(
        tmp_path / "c.json", reference_doc(fit={"kind": "mystery", "data": "x.csv"})
    )
    assert cli.main(["--config", path]) == 2


def test_spectrum_rejects_half_range(tmp_path):
    path = write_config(
        tmp_path / "c.json", reference_doc(spectrum={"g": 23.93, "start": -1.0})
    )
    assert cli.main(["--config", path, "--out", str(tmp_path / "o")]) == 2
