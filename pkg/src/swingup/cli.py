"""Command-line front end: ``swingup <command> [options]``.

Commands: pulse (design|inspect), evolve, rabi, scan, fit, g2, lifetime.
Every run writes the effective ``config.ini`` and a ``<command>_manifest.json``
into the output directory. Exit codes: 0 ok, 2 partial grid failure,
3 configuration or input error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import estimators, io, protocols, svg
from .config import ConfigError, ExperimentConfig
from .dynamics import evolve, ground_state
from .pulsecraft import (
    _fwhm,
    autocorrelation,
    intensity_fwhm,
    pulse_area,
    resonant_rotation,
    to_time,
)

log = logging.getLogger("swingup")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 2, 3

FIT_MODELS = {
    "lifetime": ["bin_left_ns", "bin_right_ns", "counts"],
    "rabi": ["amplitude_sqrt_pJ", "counts"],
    "quasi_cw": ["time_ns", "counts"],
}


def tool_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.1.0"


@dataclass
class RunManifest:
    tool_version: str
    command: str
    config_sha256: str
    seed: int | None
    started: str
    finished: str = ""
    outputs: dict = field(default_factory=dict)  # file name -> sha256
    exit_code: int = 0


class Run:
    """Single writer for one command's outputs, confined to ``out_dir``."""

    def __init__(self, cfg, command):
        self.cfg = cfg
        self.out = Path(cfg.run.out_dir)
        self.manifest = RunManifest(tool_version(), command, cfg.digest(), cfg.run.seed,
                                    _now())

    def path(self, name):
        p = (self.out / name).resolve()
        if self.out.resolve() not in p.parents:
            raise ConfigError(f"refusing to write outside {self.out}: {name}")
        return p

    def begin(self):
        self.out.mkdir(parents=True, exist_ok=True)
        text = self.cfg.to_ini()
        self.path("config.ini").write_text(text)

    def record(self, *paths):
        for p in paths:
            p = Path(p)
            self.manifest.outputs[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()

    def table(self, writer, name, *args, **meta):
        p = writer(self.path(name), *args, **meta)
        self.record(p)
        side = io.header_path(p)
        if side.exists():
            self.record(side)
        return p

    def text(self, name, content):
        p = self.path(name)
        p.write_text(content)
        self.record(p)
        return p

    def finish(self, code=EXIT_OK):
        self.manifest.finished = _now()
        self.manifest.exit_code = code
        io.write_json(self.path(f"{self.manifest.command}_manifest.json"),
                      asdict(self.manifest))
        return code


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------- commands

def _pulse_report(src, p):
    delay, ac = autocorrelation(p)

    rep = {
        "bandwidth_fwhm_GHz": src.fwhm(),
        "duration_fwhm_ps": intensity_fwhm(p),
        "time_bandwidth_product": intensity_fwhm(p) * src.fwhm() * 1e-3,
        "energy_pJ": src.energy,
        "pulse_area_rad": pulse_area(p),
        "resonant_rotation_rad": resonant_rotation(p, src.centroid()),
        "autocorrelation_fwhm_ps": _fwhm(delay, ac),
    }
    return rep, delay, ac


def cmd_pulse(cfg, args):
    bench = protocols.bench_for(cfg)
    if args.action == "inspect" and args.input:
        try:
            src = io.read_spectral(args.input)
        except (OSError, ValueError, IndexError) as exc:
            raise ConfigError(f"cannot read spectrum {args.input}: {exc}") from None
        p = to_time(src, bench.kappa)
    else:
        amp = cfg.pulse.amplitude
        if amp is None:
            amp = np.pi / bench.shape_rotation_per_amplitude()
        src = bench.shaped_spectrum(amp)
        p = to_time(src, bench.kappa)
    rep, delay, ac = _pulse_report(src, p)
    run = Run(cfg, f"pulse_{args.action}")
    run.begin()
    if args.action == "design":
        run.table(io.write_spectral, "spectrum.csv", src, shape=cfg.pulse.shape)
        run.table(io.write_temporal, "envelope.csv", p, shape=cfg.pulse.shape)
        run.table(io.write_table, "autocorrelation.csv", ["delay_ps", "intensity"],
                  zip(delay, ac), {"kind": "autocorrelation"})
    run.text(f"pulse_{args.action}_report.json", json.dumps(rep, indent=2, sort_keys=True) + "\n")
    for k, v in rep.items():
        print(f"{k:28s} {v:.6g}")
    return run.finish()


def cmd_evolve(cfg, args):
    bench = protocols.bench_for(cfg)
    amp = cfg.pulse.amplitude
    if amp is None:
        amp = np.pi / bench.shape_rotation_per_amplitude()
    p = bench.shaped_pulse(amp)
    t = np.linspace(p.time_grid[0], p.time_grid[-1], args.samples)
    tr = evolve(bench.model, ground_state(bench.model), p, cfg.run.rel_tol, cfg.run.abs_tol,
                t_eval=t)
    run = Run(cfg, "evolve")
    run.begin()
    run.table(io.write_trajectory, "trajectory.csv", tr, bench.model,
              amplitude_sqrt_pJ=amp)
    pops = np.real(np.diag(tr.final))
    for lv, v in zip(bench.model.levels, pops):
        print(f"P[{lv.label}] = {v:.9f}")
    return run.finish()


def cmd_rabi(cfg, args):
    sw = protocols.run_rabi_sweep(cfg, args.shape)
    cols = ["amplitude_sqrt_pJ", "rotation_rad", "population"]
    data = [sw.amplitudes, sw.rotation, sw.inversion]
    if sw.counts is not None:
        cols += ["counts", "sigma"]
        data += [sw.counts, sw.sigma]
    run = Run(cfg, "rabi")
    run.begin()
    run.table(io.write_table, "rabi.csv", cols, zip(*data), {"kind": "rabi_sweep",
                                                            "shape": sw.shape})
    a_pi = protocols.calibrate_pi(cfg, sw.shape, sweep=sw)
    print(f"a_pi = {a_pi:.9g} sqrt(pJ)  (pi-pulse energy {a_pi**2:.6g} pJ)")
    return run.finish()


def cmd_scan(cfg, args):
    if args.control == "none":
        grid = protocols.run_super_scan(cfg, cfg.run.workers)
        stem, title = "scan", "two-color scan"
    else:
        _, grid = protocols.run_single_pulse_control(cfg, args.control, cfg.run.workers)
        stem, title = f"control_{args.control}", f"{args.control} color alone"
    run = Run(cfg, stem)
    run.begin()
    run.table(io.write_scan, f"{stem}.csv", grid)
    run.text(f"{stem}.svg", svg.heatmap(grid, title))
    best = grid.best(row=len(grid.amplitudes) - 1)
    print(f"max-amplitude row: inversion {best[0]:.4f} at {best[1]:g} GHz")
    print(f"grid maximum:      inversion {grid.best()[0]:.4f}")
    code = EXIT_OK
    if grid.failures:
        for f in grid.failures:
            print(f"failed point a[{f['amplitude_index']}] d[{f['detuning_index']}]: "
                  f"{f['error']}", file=sys.stderr)
        code = EXIT_PARTIAL
    if args.extension:
        ext = protocols.run_super_power_extension(cfg, workers=cfg.run.workers)
        run.table(io.write_table, "power_extension.csv",
                  ["multiplier", "best_inversion", "best_detuning_GHz"],
                  zip(ext.multipliers, ext.best_inversion, ext.best_detuning),
                  {"kind": "power_extension", "non_monotone": ext.non_monotone})
        for m, v, d in zip(ext.multipliers, ext.best_inversion, ext.best_detuning):
            print(f"x{m:<5g} best {v:.4f} at {d:.4g} GHz")
    return run.finish(code)


def _read_columns(path, model):
    if model not in FIT_MODELS:
        raise ConfigError(f"unknown model {model!r}; available: {', '.join(FIT_MODELS)}")
    try:
        cols, data = io.read_table(path)
    except (OSError, ValueError, StopIteration) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    need = FIT_MODELS[model]
    alt = {"counts": ("counts", "population")}
    idx = []
    for c in need:
        names = alt.get(c, (c,)) if model == "quasi_cw" else (c,)
        hit = [cols.index(n) for n in names if n in cols]
        if not hit:
            raise ConfigError(f"{path}: model {model!r} needs columns {need}, found {cols}")
        idx.append(hit[0])
    return cols, data, idx


def cmd_fit(cfg, args):
    cols, data, idx = _read_columns(args.data, args.model)
    if args.model == "lifetime":
        hist = io.read_decay_histogram(args.data, args.irf_sigma)
        res = estimators.fit_lifetime(hist, min_events=cfg.detector.min_events)
    elif args.model == "rabi":
        a, y = data[:, idx[0]], data[:, idx[1]]
        sigma = data[:, cols.index("sigma")] if "sigma" in cols else None
        res = estimators.fit_damped_rabi(a, y, sigma, trim=args.trim)
        if res.converged:
            f, sf = estimators.estimate_inversion_fidelity(res)
            res.extra["fidelity"] = f
            res.extra["fidelity_error"] = sf
    else:
        t, y = data[:, idx[0]], data[:, idx[1]]
        res = estimators.fit_quasi_cw(t, y, t1=args.t1, counts=cols[idx[1]] == "counts")
    run = Run(cfg, f"fit_{args.model}")
    run.begin()
    run.text(f"fit_{args.model}.json", res.to_json())
    print(res.report())
    for k in ("fidelity", "fidelity_error"):
        if k in res.extra:
            print(f"{k:14s} {res.extra[k]:.6g}")
    return run.finish()


def cmd_g2(cfg, args):
    g2, hist = protocols.run_g2(cfg, args.shape)
    run = Run(cfg, "g2")
    run.begin()
    run.table(io.write_coincidences, "coincidences.csv", hist, g2_zero=g2)
    print(f"g2(0) = {g2:.6g}")
    return run.finish()


def cmd_lifetime(cfg, args):
    res = protocols.run_lifetime_experiment(cfg)
    run = Run(cfg, "lifetime")
    run.begin()
    run.table(io.write_decay_histogram, "decay.csv", res.histogram,
              excited_population=res.excited_population, flags=res.flags)
    for f in res.flags:
        print(f"warning: {f}")
    if res.fit is not None:
        run.text("lifetime_fit.json", res.fit.to_json())
        print(res.fit.report())
    return run.finish()


# ---------------------------------------------------------------- parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="INI configuration file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out-dir", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="swingup", description=__doc__.splitlines()[0],
                                parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("pulse", parents=[common], help="design or inspect a carved pulse")
    sp.add_argument("action", choices=["design", "inspect"])
    sp.add_argument("--input", help="spectrum CSV to inspect instead of the config pulse")
    sp.set_defaults(func=cmd_pulse)

    sp = sub.add_parser("evolve", parents=[common], help="evolve the emitter under the pulse")
    sp.add_argument("--samples", type=int, default=1025)
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("rabi", parents=[common], help="Rabi sweep over pulse amplitude")
    sp.add_argument("--shape", choices=["narrowband", "subpicosecond", "identity", "custom"])
    sp.set_defaults(func=cmd_rabi)

    sp = sub.add_parser("scan", parents=[common], help="two-color detuning x amplitude scan")
    sp.add_argument("--control", choices=["none", "fixed", "scanned"], default="none",
                    help="block one color for the single-pulse control")
    sp.add_argument("--extension", action="store_true", help="also run the power extension")
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("fit", parents=[common], help="fit a data file")
    sp.add_argument("data")
    sp.add_argument("model")
    sp.add_argument("--irf-sigma", type=float, default=None, help="ns (lifetime)")
    sp.add_argument("--t1", type=float, default=None, help="fix T1 in ns (quasi_cw)")
    sp.add_argument("--trim", action="store_true", help="trim high-amplitude points (rabi)")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("g2", parents=[common], help="pulsed g2(0) at the pi amplitude")
    sp.add_argument("--shape", choices=["narrowband", "subpicosecond", "identity", "custom"])
    sp.set_defaults(func=cmd_g2)

    sp = sub.add_parser("lifetime", parents=[common], help="synthetic lifetime experiment")
    sp.set_defaults(func=cmd_lifetime)
    return p


def load_config(args):
    path = getattr(args, "config", None)
    cfg = ExperimentConfig.load(path) if path else ExperimentConfig()
    run = {}
    if getattr(args, "seed", None) is not None:
        run["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        run["workers"] = args.workers
    if getattr(args, "out_dir", None) is not None:
        run["out_dir"] = args.out_dir
    return cfg.with_overrides(run=run) if run else cfg


def main(argv=None):
    level = os.environ.get("SWINGUP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        if getattr(args, "config", None) and exc.filename == args.config:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        raise


if __name__ == "__main__":
    sys.exit(main())
