import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from swingup.cli import main
from swingup.config import ExperimentConfig
from swingup.io import read_json, read_spectral, read_table, write_decay_histogram, write_table
from swingup.photonstats import synthesize_decay_histogram
from swingup.pulsecraft import gaussian_source

SMALL_SCAN = """[super]
detunings = 280, 300, 320
n_amplitudes = 2
min_fraction = 0.5
"""


def write_cfg(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_pulse_design_report(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["pulse", "design", "--out-dir", str(out)]) == 0
    rep = read_json(out / "pulse_design_report.json")
    assert rep["bandwidth_fwhm_GHz"] == pytest.approx(42.3, rel=1e-3)
    assert rep["duration_fwhm_ps"] == pytest.approx(10.4, rel=0.01)
    assert "duration_fwhm_ps" in capsys.readouterr().out
    man = read_json(out / "pulse_design_manifest.json")
    cfg_text = (out / "config.ini").read_text()
    assert man["config_sha256"] == hashlib.sha256(cfg_text.encode()).hexdigest()
    assert man["exit_code"] == 0
    for name, digest in man["outputs"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    # inspect reads the written spectrum back
    assert main(["pulse", "inspect", "--input", str(out / "spectrum.csv"),
                 "--out-dir", str(out)]) == 0
    again = read_json(out / "pulse_inspect_report.json")
    assert again["duration_fwhm_ps"] == pytest.approx(rep["duration_fwhm_ps"], rel=1e-9)


def test_identity_mask_passes_source(tmp_path):
    e = 2e4
    c = write_cfg(tmp_path, f"[pulse]\nshape = identity\namplitude = {float(np.sqrt(e))!r}\n")
    out = tmp_path / "o"
    assert main(["pulse", "design", "--config", c, "--out-dir", str(out)]) == 0
    spec = read_spectral(out / "spectrum.csv")
    src = gaussian_source(2820.0, energy=e, n_points=2**14)
    assert np.allclose(spec.amplitude, src.amplitude, rtol=1e-10, atol=1e-12 * np.abs(
        src.amplitude).max())


def test_malformed_config_exits_3_without_files(tmp_path, capsys):
    c = write_cfg(tmp_path, "[super]\ndetunings =\n", "bad.ini")
    out = tmp_path / "never"
    assert main(["scan", "--config", c, "--out-dir", str(out)]) == 3
    assert "bad.ini:2:" in capsys.readouterr().err
    assert not out.exists()
    assert main(["pulse", "design", "--config", str(tmp_path / "missing.ini")]) == 3


def test_scan_outputs_are_deterministic(tmp_path):
    c = write_cfg(tmp_path, SMALL_SCAN)
    blobs = []
    for w, d in ((1, "a"), (2, "b"), (1, "c")):
        out = tmp_path / d
        assert main(["scan", "--config", c, "--workers", str(w), "--out-dir", str(out),
                     "--seed", "1"]) == 0
        blobs.append((out / "scan.csv").read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]
    svg = (tmp_path / "a" / "scan.svg").read_text()
    assert "detuning (GHz)" in svg and "amplitude (&#8730;pJ)" in svg
    cols, data = read_table(tmp_path / "a" / "scan.csv")
    assert cols == ["detuning_GHz", "amplitude_sqrt_pJ", "inversion"] and data.shape == (6, 3)


def test_scan_control(tmp_path):
    c = write_cfg(tmp_path, SMALL_SCAN)
    out = tmp_path / "o"
    assert main(["scan", "--config", c, "--control", "fixed", "--out-dir", str(out)]) == 0
    _, data = read_table(out / "control_fixed.csv")
    assert np.all(data[:, 2] < 0.05)


def test_fit_lifetime_and_rabi(tmp_path, capsys):
    h = synthesize_decay_histogram(16.2, 0.35, 200_000, 0.1, seed=1)
    write_decay_histogram(tmp_path / "d.csv", h)
    out = tmp_path / "o"
    assert main(["fit", str(tmp_path / "d.csv"), "lifetime", "--out-dir", str(out)]) == 0
    res = json.loads((out / "fit_lifetime.json").read_text())
    assert res["values"][res["names"].index("tau")] == pytest.approx(16.2, rel=0.02)

    a = np.linspace(0, 1.0, 141)
    y = np.random.default_rng(0).poisson(
        2e5 * np.exp(-a / 7.0) * np.sin(21.97 * a / 2) ** 2 + 5e3 * a**2 + 500).astype(float)
    write_table(tmp_path / "r.csv", ["amplitude_sqrt_pJ", "counts"], zip(a, y))
    assert main(["fit", str(tmp_path / "r.csv"), "rabi", "--out-dir", str(out)]) == 0
    assert "fidelity" in capsys.readouterr().out
    res = json.loads((out / "fit_rabi.json").read_text())
    assert res["values"][res["names"].index("kappa")] == pytest.approx(21.97, rel=0.01)


def test_fit_errors(tmp_path, capsys):
    write_table(tmp_path / "x.csv", ["foo", "bar"], [(1, 2), (3, 4)])
    assert main(["fit", str(tmp_path / "x.csv"), "nonsense"]) == 3
    assert "lifetime" in capsys.readouterr().err
    assert main(["fit", str(tmp_path / "x.csv"), "rabi"]) == 3


def test_lifetime_and_g2(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["lifetime", "--seed", "2", "--out-dir", str(out)]) == 0
    assert (out / "lifetime_fit.json").exists()
    assert main(["g2", "--out-dir", str(out)]) == 0
    assert "g2(0)" in capsys.readouterr().out


def test_out_dir_is_respected(tmp_path):
    out = tmp_path / "o"
    assert main(["evolve", "--samples", "33", "--out-dir", str(out)]) == 0
    files = {p.name for p in out.iterdir()}
    assert files == {"config.ini", "trajectory.csv", "trajectory.json", "evolve_manifest.json"}
    cfg = ExperimentConfig.load(out / "config.ini")
    assert cfg.run.out_dir == str(out)


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "swingup.cli", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "scan" in r.stdout
