"""Simulated experiments: Rabi sweeps, lifetime, quasi-CW, g2 and the two-color scan.

Field amplitudes are square roots of pulse energy (sqrt(pJ)). Rotations
quoted "in pi units" are resonant-equivalent: the angle the envelope would
produce on a resonant transition at the envelope's own center.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import minimize_scalar

from . import estimators
from .config import ConfigError, ExperimentConfig
from .dynamics import DynamicsError, EmitterModel, evolve, evolve_quasi_cw, ground_state
from .photonstats import BackgroundModel, g2_pulsed, rng_stream, synthesize_decay_histogram
from .pulsecraft import (
    DispersionSpec,
    PulseError,
    Slit,
    SlitMask,
    apply_dispersion,
    apply_mask,
    gaussian_source,
    resonant_rotation,
    super_mask,
    to_time,
)

log = logging.getLogger(__name__)

INVERSION_EPS = 1e-6
YIELD_SAMPLES = 513


class CalibrationError(RuntimeError):
    pass


class ScanError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ScanGrid:
    """Normalized inversion on (amplitude, detuning); rows are amplitudes."""

    detunings: np.ndarray
    amplitudes: np.ndarray
    inversion: np.ndarray
    metadata: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def __post_init__(self):
        d = np.asarray(self.detunings, dtype=float)
        a = np.asarray(self.amplitudes, dtype=float)
        m = np.asarray(self.inversion, dtype=float)
        if m.shape != (len(a), len(d)):
            raise ScanError(f"inversion shape {m.shape} != ({len(a)}, {len(d)})")
        if np.any(np.diff(d) <= 0) or np.any(np.diff(a) <= 0):
            raise ScanError("axes must be strictly increasing")
        ok = m[np.isfinite(m)]
        if ok.size and (ok.min() < -INVERSION_EPS or ok.max() > 1 + INVERSION_EPS):
            raise ScanError("normalized inversion outside [0, 1]")
        object.__setattr__(self, "detunings", d)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "inversion", m)

    def best(self, row=None):
        """(inversion, detuning) of the maximum, over one row or the whole grid."""
        m = self.inversion if row is None else self.inversion[row : row + 1]
        i, j = np.unravel_index(np.nanargmax(m), m.shape)
        return float(m[i, j]), float(self.detunings[j])


@dataclass(frozen=True, eq=False)
class RabiSweep:
    amplitudes: np.ndarray
    rotation: np.ndarray  # nominal resonant-equivalent angle, rad
    inversion: np.ndarray  # final excited population
    counts: np.ndarray | None = None
    sigma: np.ndarray | None = None
    shape: str = "narrowband"


# ---------------------------------------------------------------- the bench

class Bench:
    """Source, calibration and emitter derived once from a config."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        s = cfg.source
        self.source = gaussian_source(s.fwhm, 0.0, s.energy, s.n_points, s.span_factor)
        self.model = build_model(cfg)
        ref = cfg.reference
        self.reference_slit = Slit(0.0, ref.width, 1.0, 0.0, ref.profile)
        unit = to_time(self._unit(SlitMask((self.reference_slit,))))
        # kappa * a_pi * (rotation per sqrt(pJ) at kappa = 1) = pi
        self.kappa = np.pi / (ref.a_pi * resonant_rotation(unit, 0.0))
        self._ref_pe = None

    # spectra ------------------------------------------------------------
    def _unit(self, mask):
        """Unit-energy spectrum through ``mask`` (fully open slits)."""
        return apply_mask(self.source, mask).scaled_to(1.0)

    def _open_energy(self, slit):
        return apply_mask(self.source, SlitMask((slit,))).energy

    def carve(self, slits, amplitudes, dispersion=None):
        """Spectrum with slit ``k`` passing energy ``amplitudes[k]**2``.

        Transmissions are set from the source energy; a request above what
        the source delivers through a slit raises ``PulseError``.
        """
        fixed = []
        for sl, a in zip(slits, amplitudes):
            t = abs(a) / np.sqrt(self._open_energy(sl))
            if t > 1:
                raise PulseError(
                    f"{a**2:.4g} pJ through the slit at {sl.center_detuning} GHz exceeds the source"
                )
            fixed.append(Slit(sl.center_detuning, sl.width, t, sl.phase, sl.profile))
        if len(fixed) == 2:
            a, b = fixed
            mask = super_mask(a.center_detuning, b.center_detuning, a.width, b.width,
                              a.transmission, b.transmission, a.phase, b.phase, a.profile)
            if a.profile != b.profile:
                mask = SlitMask(tuple(fixed))
        else:
            mask = SlitMask(tuple(fixed))
        spec = apply_mask(self.source, mask)
        if dispersion is not None:
            spec = apply_dispersion(spec, dispersion)
        return spec

    def pulse(self, slits, amplitudes, dispersion=None):
        return to_time(self.carve(slits, amplitudes, dispersion), self.kappa)

    def rotation_per_amplitude(self, slit, dispersion=None):
        """Resonant-equivalent rotation (rad) per sqrt(pJ) for one slit."""
        p = to_time(self._unit(SlitMask((slit,))), self.kappa)
        if dispersion is not None:
            p = to_time(apply_dispersion(self._unit(SlitMask((slit,))), dispersion), self.kappa)
        return resonant_rotation(p, slit.center_detuning)

    # shapes ---------------------------------------------------------------
    def shape_slits(self, shape=None):
        pc = self.cfg.pulse
        shape = shape or pc.shape
        if shape == "narrowband":
            return (self.reference_slit,)
        if shape == "subpicosecond":
            return (Slit(0.0, pc.subpicosecond_width, 1.0, 0.0, "hard"),)
        if shape == "identity":
            return ()
        if shape == "custom":
            return tuple(Slit(c, w, 1.0, ph, prof) for c, w, _, ph, prof in pc.slits)
        raise ConfigError(f"unknown pulse shape {shape!r}")

    def shaped_spectrum(self, amplitude, shape=None):
        """Spectrum of energy ``amplitude**2`` with the configured shape."""
        pc = self.cfg.pulse
        disp = DispersionSpec(pc.gdd, pc.tod) if (pc.gdd or pc.tod) else None
        slits = self.shape_slits(shape)
        if not slits:
            spec = self.source.scaled_to(amplitude**2)
            return spec if disp is None else apply_dispersion(spec, disp)
        # split energy by the open-slit energies, as a uniform attenuator would
        e = np.array([self._open_energy(s) for s in slits])
        return self.carve(slits, amplitude * np.sqrt(e / e.sum()), disp)

    def shaped_pulse(self, amplitude, shape=None):
        return to_time(self.shaped_spectrum(amplitude, shape), self.kappa)

    def shape_rotation_per_amplitude(self, shape=None):
        p = self.shaped_pulse(1.0, shape)
        return resonant_rotation(p, 0.0)

    # dynamics -----------------------------------------------------------
    def final_excited(self, pulse):
        """Emitted photons per pulse: excited population left at the window end
        plus what decayed inside the window (both end up as counts)."""
        m = self.model
        if not np.isfinite(m.t1):
            tr = evolve(m, ground_state(m), pulse, self.cfg.run.rel_tol, self.cfg.run.abs_tol)
            return excited_total(m, tr.final)
        t = np.linspace(pulse.time_grid[0], pulse.time_grid[-1], YIELD_SAMPLES)
        tr = evolve(m, ground_state(m), pulse, self.cfg.run.rel_tol, self.cfg.run.abs_tol,
                    t_eval=t)
        pe = np.array([excited_total(m, s) for s in tr.states])
        return float(pe[-1] + trapezoid(pe, t) / (m.t1 * 1e3))

    @property
    def reference_population(self):
        """Excited population after the resonant narrowband pi pulse."""
        if self._ref_pe is None:
            p = self.pulse((self.reference_slit,), [self.cfg.reference.a_pi])
            self._ref_pe = self.final_excited(p)
        return self._ref_pe

    # two-color pulses -------------------------------------------------
    def super_slits(self, det2, clip=False):
        """Fixed and scanned slits. With ``clip``, two slits that would overlap
        are both narrowed to the gap between their centers."""
        sc = self.cfg.super
        w1, w2 = sc.fixed_width, sc.scanned_width
        gap = abs(det2 - sc.fixed_detuning)
        if clip and (w1 + w2) / 2 > gap:
            w1 = w2 = gap
        fixed = Slit(sc.sign * sc.fixed_detuning, w1, 1.0, 0.0, sc.profile)
        scanned = Slit(sc.sign * det2, w2, 1.0, 0.0, sc.profile)
        return fixed, scanned

    def clipped(self, det2):
        sc = self.cfg.super
        return (sc.fixed_width + sc.scanned_width) / 2 > abs(det2 - sc.fixed_detuning)

    @property
    def fixed_amplitude(self):
        sc = self.cfg.super
        fixed, _ = self.super_slits(sc.detunings[0])
        return sc.fixed_rotation * np.pi / self.rotation_per_amplitude(fixed)

    @property
    def amplitude_max(self):
        sc = self.cfg.super
        if sc.amplitude_max is not None:
            return sc.amplitude_max
        mid = sc.detunings[len(sc.detunings) // 2]
        _, scanned = self.super_slits(mid)
        return sc.max_rotation * np.pi / self.rotation_per_amplitude(scanned)

    def amplitude_axis(self):
        sc = self.cfg.super
        if sc.amplitudes:
            return np.asarray(sc.amplitudes, dtype=float)
        amax = self.amplitude_max
        if sc.n_amplitudes == 1:
            return np.array([amax])
        return amax * np.logspace(np.log10(sc.min_fraction), 0.0, sc.n_amplitudes)

    def super_inversion(self, det2, a2, multiplier=1.0, colors=(True, True)):
        """Normalized inversion after the two-color pulse (or one color of it)."""
        fixed, scanned = self.super_slits(det2, clip=all(colors))
        slits, amps = [], []
        if colors[0]:
            slits.append(fixed)
            amps.append(self.fixed_amplitude * multiplier)
        if colors[1] and a2 > 0:
            slits.append(scanned)
            amps.append(a2 * multiplier)
        if not slits or all(a == 0 for a in amps):
            return 0.0
        pe = self.final_excited(self.pulse(slits, amps))
        return pe / self.reference_population


def build_model(cfg):
    e = cfg.emitter
    if e.kind == "two_level":
        return EmitterModel.two_level(e.t1, e.t2_star)
    return EmitterModel.four_level(e.t1, e.t2_star, e.ground_splitting, e.excited_splitting)


def excited_total(model, rho):
    return float(sum(rho[i, i].real for i in model.excited_indices))


# per-process bench cache, keyed by the config digest
_BENCHES = {}


def bench_for(cfg):
    key = cfg.digest()
    b = _BENCHES.get(key)
    if b is None:
        b = _BENCHES[key] = Bench(cfg)
    return b


# ---------------------------------------------------------------- Rabi sweeps

def sweep_axis(bench, shape=None):
    sw = bench.cfg.sweep
    if sw.amplitudes:
        return np.asarray(sw.amplitudes, dtype=float)
    a_max = sw.max_rotation * np.pi / bench.shape_rotation_per_amplitude(shape)
    return np.linspace(0.0, a_max, sw.n_points)


def run_rabi_sweep(cfg, shape=None, amplitudes=None):
    """Final excited population versus field amplitude for one pulse shape.

    With ``cfg.sweep.noisy`` the populations are turned into detected counts
    with the configured background (linear in pulse energy) and Poisson
    noise, one RNG stream per amplitude index.
    """
    bench = bench_for(cfg)
    shape = shape or cfg.pulse.shape
    a = sweep_axis(bench, shape) if amplitudes is None else np.asarray(amplitudes, dtype=float)
    if len(a) < 2 or np.any(np.diff(a) <= 0):
        raise ConfigError("sweep amplitudes must be strictly increasing")
    r_unit = bench.shape_rotation_per_amplitude(shape)
    if a.max() * r_unit < np.pi * (1 - 1e-9):
        raise ConfigError("amplitude axis does not reach a pi rotation")
    pe = np.empty(len(a))
    for k, ak in enumerate(a):
        if ak == 0:
            pe[k] = 0.0
            continue
        try:
            pe[k] = bench.final_excited(bench.shaped_pulse(ak, shape))
        except DynamicsError as exc:
            raise type(exc)(f"amplitude index {k} ({ak:.6g} sqrt(pJ)): {exc}") from exc
    counts = sigma = None
    if cfg.sweep.noisy:
        counts, sigma = detect_counts(cfg, a, pe, bench.reference_population, np.pi / r_unit)
    return RabiSweep(a, a * r_unit, pe, counts, sigma, shape)


def detect_counts(cfg, amplitudes, populations, reference_population=1.0, a_pi=None):
    """Expected counts plus background, Poisson sampled per point.

    ``sweep.fidelity_envelope < 1`` multiplies the signal by an exponential
    contrast envelope (needs ``a_pi``), the loss model assumed by the
    damped-Rabi estimator.
    """
    sw, det = cfg.sweep, cfg.detector
    if cfg.run.seed is None:
        raise ConfigError("noisy synthesis needs [run] seed")
    bg = BackgroundModel(det.background_rate, det.background_offset)
    a = np.asarray(amplitudes, dtype=float)
    scale = sw.counts_at_pi / reference_population
    envelope = 1.0
    if sw.fidelity_envelope < 1:
        # contrast decays as exp(-a / a_d), equal to fidelity_envelope at a_pi
        a_d = -a_pi / np.log(sw.fidelity_envelope)
        envelope = np.exp(-a / a_d)
    mean = scale * envelope * np.asarray(populations) + bg.counts(a**2)
    counts = np.array([rng_stream(cfg.run.seed, k).poisson(m) for k, m in enumerate(mean)],
                      dtype=float)
    return counts, np.sqrt(np.maximum(counts, 1.0))


def first_maximum(fn, axis, values=None, xatol=None):
    """Abscissa of the first local maximum of ``fn`` sampled on ``axis``.

    The sampled peak is refined by parabolic interpolation on ``fn``
    (bounded Brent search between the neighbours of the sampled peak).
    """
    x = np.asarray(axis, dtype=float)
    y = np.array([fn(v) for v in x]) if values is None else np.asarray(values, dtype=float)
    k = None
    for i in range(1, len(x) - 1):
        if y[i] >= y[i - 1] and y[i] > y[i + 1]:
            k = i
            break
    if k is None:
        raise CalibrationError("no maximum inside the amplitude range")
    xatol = xatol if xatol is not None else 1e-12 * max(abs(x[k]), 1.0)
    res = minimize_scalar(lambda v: -fn(v), bounds=(x[k - 1], x[k + 1]), method="bounded",
                          options={"xatol": xatol, "maxiter": 200})
    return float(res.x)


def calibrate_pi(cfg, shape=None, sweep=None):
    """Field amplitude of the first Rabi maximum (the pi pulse)."""
    bench = bench_for(cfg)
    shape = shape or cfg.pulse.shape
    if sweep is None:
        sweep = run_rabi_sweep(cfg.with_overrides(sweep={"noisy": False}), shape)

    def pe(a):
        return bench.final_excited(bench.shaped_pulse(a, shape))

    return first_maximum(pe, sweep.amplitudes, sweep.inversion)


# ---------------------------------------------------------------- two-color scan

def _point(args):
    digest_cfg, det2, a2, multiplier, colors = args
    bench = bench_for(digest_cfg)
    try:
        return bench.super_inversion(det2, a2, multiplier, colors), None
    except (DynamicsError, PulseError) as exc:
        return float("nan"), f"{type(exc).__name__}: {exc}"


def _map_points(cfg, tasks, workers):
    workers = max(1, int(workers))
    if workers == 1 or len(tasks) < 2:
        return [_point(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_point, tasks, chunksize=chunk))


def _grid(cfg, colors, workers, detunings=None, amplitudes=None, multiplier=1.0):
    bench = bench_for(cfg)
    d = np.asarray(cfg.super.detunings if detunings is None else detunings, dtype=float)
    a = bench.amplitude_axis() if amplitudes is None else np.asarray(amplitudes, dtype=float)
    tasks = [(cfg, float(dj), float(ai), multiplier, colors) for ai in a for dj in d]
    # a blocked color makes points identical; evaluate each distinct pulse once
    keys = [(t[1] if colors[1] else None, t[2] if colors[1] else None) for t in tasks]
    first = {}
    for k, key in enumerate(keys):
        first.setdefault(key, k)
    uniq = sorted(first.values())
    computed = dict(zip(uniq, _map_points(cfg, [tasks[k] for k in uniq], workers)))
    results = [computed[first[key]] for key in keys]
    inv = np.array([r[0] for r in results]).reshape(len(a), len(d))
    failures = [
        {"amplitude_index": k // len(d), "detuning_index": k % len(d), "error": r[1]}
        for k, r in enumerate(results) if r[1] is not None
    ]
    for f in failures:
        log.warning("grid point (%d, %d) failed: %s", f["amplitude_index"],
                    f["detuning_index"], f["error"])
    sc = cfg.super
    meta = {
        "fixed_detuning_GHz": sc.sign * sc.fixed_detuning,
        "fixed_rotation_pi": sc.fixed_rotation,
        "fixed_amplitude_sqrt_pJ": bench.fixed_amplitude,
        "slit_widths_GHz": [sc.fixed_width, sc.scanned_width],
        "slit_profile": sc.profile,
        "detuning_sign": sc.sign,
        "colors": list(colors),
        "clipped_detunings_GHz": [float(x) for x in d if all(colors) and bench.clipped(x)],
        "multiplier": multiplier,
        "reference_a_pi_sqrt_pJ": cfg.reference.a_pi,
        "reference_population": bench.reference_population,
        "kappa_rad_per_sqrt_pJ": bench.kappa,
        "config_sha256": cfg.digest(),
    }
    return ScanGrid(d, a, inv, meta, failures)


def run_super_scan(cfg, workers=None):
    """Normalized inversion over (scanned amplitude, scanned detuning magnitude)."""
    return _grid(cfg, (True, True), workers or cfg.run.workers)


def run_single_pulse_control(cfg, color="fixed", workers=None):
    """Scan the same grid with one color blocked; returns (max inversion, grid)."""
    if color not in ("fixed", "scanned"):
        raise ValueError("color must be 'fixed' or 'scanned'")
    colors = (True, False) if color == "fixed" else (False, True)
    grid = _grid(cfg, colors, workers or cfg.run.workers)
    return float(np.nanmax(grid.inversion)), grid


@dataclass(frozen=True, eq=False)
class PowerExtension:
    multipliers: np.ndarray
    best_inversion: np.ndarray
    best_detuning: np.ndarray
    non_monotone: list  # multipliers where the curve drops before its first plateau


def _refine(bench, mult, a2, center, step, levels=2, workers=1):
    best = (bench.super_inversion(center, a2, mult), center)
    for _ in range(levels):
        step /= 5
        cands = [best[1] + k * step for k in range(-4, 5) if k and best[1] + k * step > 0]
        tasks = [(bench.cfg, d, a2, mult, (True, True)) for d in cands]
        vals = [r[0] for r in _map_points(bench.cfg, tasks, workers)]
        for v, d in zip(vals, cands):
            if np.isfinite(v) and v > best[0]:
                best = (v, d)
    return best


def run_super_power_extension(cfg, multipliers=None, workers=None, plateau=0.99):
    """Best inversion over detuning as both colors are scaled by each multiplier.

    Each multiplier is searched on the extension detuning axis (plus the
    previous optimum), then refined on two finer grids around the best.
    """
    bench = bench_for(cfg)
    workers = workers or cfg.run.workers
    mults = np.asarray(cfg.super.multipliers if multipliers is None else multipliers, float)
    if np.any(mults < 1):
        raise ConfigError("multipliers must be >= 1")
    axis = np.asarray(cfg.super.extension_detunings, dtype=float)
    step = float(np.min(np.diff(axis))) if len(axis) > 1 else 5.0
    a2 = bench.amplitude_max
    best_inv, best_det = [], []
    prev = None
    for m in mults:
        cands = axis if prev is None else np.unique(np.append(axis, prev))
        tasks = [(cfg, float(d), a2, float(m), (True, True)) for d in cands]
        vals = np.array([r[0] for r in _map_points(cfg, tasks, workers)])
        j = int(np.nanargmax(vals))
        v, d = _refine(bench, float(m), a2, float(cands[j]), step, workers=workers)
        v = max(v, float(vals[j]))
        best_inv.append(v)
        best_det.append(d)
        prev = d
    best_inv = np.array(best_inv)
    reach = np.nonzero(best_inv >= plateau)[0]
    stop = reach[0] if reach.size else len(best_inv) - 1
    flags = [float(mults[i]) for i in range(1, stop + 1) if best_inv[i] < best_inv[i - 1] - 1e-6]
    if flags:
        log.warning("best inversion drops before reaching %.2f at multipliers %s", plateau,
                    flags)
    return PowerExtension(mults, best_inv, np.array(best_det), flags)


# ---------------------------------------------------------------- lifetime, quasi-CW, g2

@dataclass(frozen=True, eq=False)
class LifetimeRun:
    histogram: object
    fit: estimators.FitResult | None
    excited_population: float
    flags: list


def run_lifetime_experiment(cfg, stream=0):
    """Excite with the narrowband pulse, synthesize the decay, fit T1."""
    if cfg.run.seed is None:
        raise ConfigError("lifetime synthesis needs [run] seed")
    bench = bench_for(cfg)
    a = cfg.reference.a_pi * cfg.lifetime.rotation
    pe = bench.final_excited(bench.pulse((bench.reference_slit,), [a])) if a > 0 else 0.0
    det = cfg.detector
    rng = rng_stream(cfg.run.seed, 10_000 + stream)
    n = int(rng.poisson(det.events_at_pi * pe / bench.reference_population))
    flags = []
    if n == 0:
        edges = np.arange(0.0, 20 * cfg.emitter.t1 + det.bin_width, det.bin_width)
        from .photonstats import DecayHistogram

        hist = DecayHistogram(edges, np.zeros(len(edges) - 1, dtype=np.int64), det.irf_sigma, 0)
    else:
        hist = synthesize_decay_histogram(cfg.emitter.t1, det.irf_sigma, n, det.bin_width,
                                          cfg.run.seed, stream)
    fit = None
    if hist.total_events < det.min_events:
        flags.append(f"near-empty histogram ({hist.total_events} events)")
        log.warning(flags[-1])
    else:
        fit = estimators.fit_lifetime(hist, min_events=det.min_events)
    return LifetimeRun(hist, fit, pe, flags)


@dataclass(frozen=True, eq=False)
class QuasiCWRun:
    times: np.ndarray
    population: np.ndarray
    counts: np.ndarray
    fit: estimators.FitResult


def run_quasi_cw(cfg, stream=0, fix_t1=True):
    """Constant resonant drive, detected as counts per time bin, then fit."""
    if cfg.run.seed is None:
        raise ConfigError("quasi-CW synthesis needs [run] seed")
    q = cfg.quasi_cw
    model = build_model(cfg)
    tr = evolve_quasi_cw(model, q.rabi_frequency, q.duration, q.n_samples, rel_tol=1e-10,
                         abs_tol=1e-13)
    pe = np.array([excited_total(model, s) for s in tr.states])
    counts = rng_stream(cfg.run.seed, 20_000 + stream).poisson(q.counts_scale * pe).astype(float)
    fit = estimators.fit_quasi_cw(tr.times, counts, t1=cfg.emitter.t1 if fix_t1 else None,
                                  counts=True)
    return QuasiCWRun(tr.times, pe, counts, fit)


def run_g2(cfg, shape=None, amplitude=None):
    """Pulsed g2(0) at the pi amplitude of the chosen shape."""
    bench = bench_for(cfg)
    shape = shape or cfg.pulse.shape
    if amplitude is None:
        amplitude = cfg.pulse.amplitude
    if amplitude is None:
        amplitude = np.pi / bench.shape_rotation_per_amplitude(shape)
    pulse = bench.shaped_pulse(amplitude, shape)
    det = cfg.detector
    bg = BackgroundModel(det.background_rate, det.background_offset)
    g = cfg.g2
    if g.n_pulses is not None and cfg.run.seed is None:
        raise ConfigError("sampled coincidences need [run] seed")
    return g2_pulsed(bench.model, pulse, g.repetition_period, g.n_periods, bg, amplitude**2,
                     det.efficiency, g.n_pulses, cfg.run.seed or 0,
                     rel_tol=cfg.run.rel_tol, abs_tol=cfg.run.abs_tol)


def default_workers():
    return max(1, os.cpu_count() or 1)
