"""CSV + JSON-header serialization of envelopes, trajectories, histograms, grids."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .photonstats import DecayHistogram
from .pulsecraft import SpectralEnvelope, TemporalEnvelope

FMT = "{:.12g}"


def _fmt(v):
    return FMT.format(float(v))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def header_path(path):
    p = Path(path)
    return p.with_name(p.stem + ".json")


def write_table(path, columns, rows, meta=None):
    """Write ``rows`` as CSV (12 significant digits) and ``meta`` as a sidecar JSON."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    if meta is not None:
        write_json(header_path(path), {"columns": list(columns), **meta})
    return path


def read_table(path):
    with Path(path).open() as fh:
        r = csv.reader(fh)
        cols = next(r)
        data = np.array([[float(v) for v in row] for row in r if row], dtype=float)
    if data.size == 0:
        data = np.zeros((0, len(cols)))
    return cols, data


def write_spectral(path, env, **meta):
    rows = zip(env.detuning_grid, env.amplitude.real, env.amplitude.imag)
    m = {"kind": "spectral_envelope", "units": {"grid": "GHz", "amplitude": "sqrt(pJ/GHz)"},
         "energy_pJ": env.energy_scale, **meta}
    return write_table(path, ["detuning_GHz", "re", "im"], rows, m)


def _uniform(col):
    """Rebuild a uniform axis from its rounded CSV form."""
    n = len(col)
    grid = col[0] + (col[-1] - col[0]) / (n - 1) * np.arange(n)
    if np.max(np.abs(grid - col)) > 1e-9 * max(np.ptp(col), 1e-300):
        raise ValueError("axis column is not uniform")
    return grid


def read_spectral(path):
    _, d = read_table(path)
    return SpectralEnvelope(_uniform(d[:, 0]), d[:, 1] + 1j * d[:, 2])


def write_temporal(path, env, **meta):
    rows = zip(env.time_grid, env.amplitude.real, env.amplitude.imag)
    m = {"kind": "temporal_envelope", "units": {"grid": "ps", "amplitude": "rad/ps"},
         "calibration_kappa": env.kappa, "source_energy_pJ": env.source_energy, **meta}
    return write_table(path, ["time_ps", "re", "im"], rows, m)


def read_temporal(path):
    _, d = read_table(path)
    meta = read_json(header_path(path)) if header_path(path).exists() else {}
    return TemporalEnvelope(_uniform(d[:, 0]), d[:, 1] + 1j * d[:, 2], meta.get("calibration_kappa", 1.0),
                            meta.get("source_energy_pJ"))


def write_trajectory(path, traj, model=None, **meta):
    n = traj.states.shape[1]
    cols = [f"time_{traj.time_unit}"] + [f"p{i}" for i in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    cols += [f"abs_rho{i}{j}" for i, j in pairs]
    rows = []
    for t, s in zip(traj.times, traj.states):
        rows.append([t] + [s[i, i].real for i in range(n)] + [abs(s[i, j]) for i, j in pairs])
    m = {"kind": "trajectory", "info": traj.info, **meta}
    if model is not None:
        m["model"] = {"levels": [lv.label for lv in model.levels], "t1_ns": model.t1,
                      "pure_dephasing_per_ns": model.pure_dephasing_rate}
    return write_table(path, cols, rows, m)


def write_decay_histogram(path, hist, **meta):
    rows = zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts)
    m = {"kind": "decay_histogram", "irf_sigma_ns": hist.irf_sigma,
         "total_events": hist.total_events, **meta}
    return write_table(path, ["bin_left_ns", "bin_right_ns", "counts"], rows, m)


def read_decay_histogram(path, irf_sigma=None):
    cols, d = read_table(path)
    if cols[:3] != ["bin_left_ns", "bin_right_ns", "counts"]:
        raise ValueError(f"unexpected columns {cols}")
    meta = read_json(header_path(path)) if header_path(path).exists() else {}
    sigma = irf_sigma if irf_sigma is not None else meta.get("irf_sigma_ns", 0.0)
    edges = np.append(d[:, 0], d[-1, 1])
    counts = d[:, 2].astype(np.int64)
    return DecayHistogram(edges, counts, sigma, int(counts.sum()))


def write_coincidences(path, hist, **meta):
    rows = zip(hist.delays, hist.counts)
    m = {"kind": "coincidence_histogram", "repetition_period_ns": hist.repetition_period,
         "peak_areas": {str(k): float(v) for k, v in hist.peak_areas.items()}, **meta}
    return write_table(path, ["delay_ns", "counts"], rows, m)


def write_scan(path, grid, **meta):
    rows = []
    for i, a in enumerate(grid.amplitudes):
        for j, d in enumerate(grid.detunings):
            rows.append([d, a, grid.inversion[i, j]])
    m = {"kind": "scan_grid", "shape": [len(grid.amplitudes), len(grid.detunings)],
         "metadata": grid.metadata, "failures": grid.failures, **meta}
    return write_table(path, ["detuning_GHz", "amplitude_sqrt_pJ", "inversion"], rows, m)
