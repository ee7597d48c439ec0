"""Detector-level observables: decay histograms, pulsed g2 and background mixing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .dynamics import EmitterModel, evolve, ground_state
from .pulsecraft import TemporalEnvelope


class PhotonStatsError(ValueError):
    pass


def rng_stream(seed, stream=0):
    """Independent generator keyed by (seed, stream)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


@dataclass(frozen=True, eq=False)
class DecayHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    irf_sigma: float
    total_events: int

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts)
        if len(edges) != len(counts) + 1:
            raise PhotonStatsError("need len(edges) == len(counts) + 1")
        w = np.diff(edges)
        if np.any(w <= 0) or np.max(np.abs(w - w[0])) > 1e-9 * w[0]:
            raise PhotonStatsError("bins must be uniform")
        if np.any(counts < 0):
            raise PhotonStatsError("counts must be non-negative")
        if int(counts.sum()) != int(self.total_events):
            raise PhotonStatsError("counts do not sum to total_events")

    @property
    def centers(self):
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def bin_width(self):
        return float(self.bin_edges[1] - self.bin_edges[0])


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    delays: np.ndarray
    counts: np.ndarray
    repetition_period: float
    peak_areas: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float)
        if not np.allclose(d, -d[::-1], atol=1e-9 * max(1.0, np.max(np.abs(d)))):
            raise PhotonStatsError("delay bins must be symmetric about zero")
        if np.any(np.asarray(self.counts) < 0):
            raise PhotonStatsError("counts must be non-negative")


@dataclass(frozen=True)
class BackgroundModel:
    rate: float = 0.0  # counts per pulse per pJ
    offset: float = 0.0  # counts per pulse

    def __post_init__(self):
        if self.rate < 0 or self.offset < 0:
            raise PhotonStatsError("background coefficients must be non-negative")

    def counts(self, energy):
        return self.rate * energy + self.offset


def emission_curve(traj, t1, index=None):
    """Radiative intensity rho_ee(t) / T1 (per ns when T1 is in ns)."""
    i = traj.states.shape[1] - 1 if index is None else index
    return traj.states[:, i, i].real / t1


def synthesize_decay_histogram(t1, irf_sigma, n_events, bin_width, seed, stream=0,
                               t_min=None, t_max=None):
    """Exponential arrival times blurred by a Gaussian IRF, binned.

    Events outside ``[t_min, t_max)`` are dropped; the defaults make the
    loss negligible (below 1e-8 of events).
    """
    if not n_events > 0:
        raise PhotonStatsError("n_events must be positive")
    rng = rng_stream(seed, stream)
    t = rng.exponential(t1, int(n_events))
    if irf_sigma > 0:
        t = t + rng.normal(0.0, irf_sigma, int(n_events))
    if t_min is None:
        t_min = -np.ceil(6 * irf_sigma / bin_width) * bin_width if irf_sigma > 0 else 0.0
    if t_max is None:
        t_max = t_min + np.ceil(20 * t1 / bin_width) * bin_width
    nbins = int(round((t_max - t_min) / bin_width))
    edges = t_min + bin_width * np.arange(nbins + 1)
    counts, _ = np.histogram(t, edges)
    return DecayHistogram(edges, counts, float(irf_sigma), int(counts.sum()))


def mix_background(g2_signal, signal_counts, background_counts):
    """g2 of signal photons mixed with uncorrelated (Poissonian) background."""
    s, b = float(signal_counts), float(background_counts)
    if s < 0 or b < 0:
        raise PhotonStatsError("counts must be non-negative")
    if s + b == 0:
        raise ZeroDivisionError("g2 undefined for zero total counts")
    return (s * s * g2_signal + 2 * s * b + b * b) / (s + b) ** 2


def signal_fraction_for_g2(g2_measured, g2_signal=0.0):
    """Inverse of ``mix_background`` in terms of rho = s / (s + b)."""
    # rho^2 (g2_s - 1) + 1 = g2_m
    return float(np.sqrt((1 - g2_measured) / (1 - g2_signal)))


def _qrt_center_area(model, pulse, traj_times, traj_states, rel_tol, abs_tol, t1_ps,
                     tail_end):
    """int dt1 int_0^tail dtau G2(t1, t1 + tau) for the detected transition.

    After a detection at t1 the emitter is projected by sigma-; the
    conditional state is re-evolved under the remaining pulse, and its
    emission integrated to ``tail_end`` (decay after the pulse is analytic).
    """
    gamma = 1.0 / t1_ps
    lo, up = model.transitions[0].lower, model.transitions[0].upper
    inner = np.zeros(len(traj_times))
    t_end = pulse.time_grid[-1]
    for k, t1 in enumerate(traj_times[:-1]):
        rho = np.zeros_like(traj_states[k])
        rho[lo, lo] = 1.0  # sigma- rho sigma+ / tr for the C transition
        taus = np.linspace(t1, t_end, 64)
        tr = evolve(model, rho, pulse, rel_tol, abs_tol, t_eval=taus, t_span=(t1, t_end))
        pe = tr.states[:, up, up].real
        during = trapezoid(pe, taus)
        after = pe[-1] * t1_ps * -np.expm1(-(tail_end - (t_end - t1)) / t1_ps)
        inner[k] = gamma * (during + max(after, 0.0))
    emit = gamma * np.array([s[up, up].real for s in traj_states])
    return 2 * trapezoid(emit * inner, traj_times)


def g2_pulsed(model, pulse, rep_period, n_periods=10, background=None, pulse_energy=0.0,
              detection_efficiency=0.01, n_pulses=None, seed=0, n_t1=200,
              rel_tol=1e-9, abs_tol=1e-12, bins_per_period=100):
    """Pulsed g2(0) by the quantum regression procedure.

    Returns ``(g2_zero, CoincidenceHistogram)``. ``rep_period`` is in ns and
    must exceed both the pulse window and the decay (so each period starts
    in the ground state). The histogram is a Poisson sample of the expected
    coincidences when ``n_pulses`` is given; otherwise it holds expectations.
    """
    background = background or BackgroundModel()
    window_ns = (pulse.time_grid[-1] - pulse.time_grid[0]) * 1e-3
    if rep_period <= window_ns:
        raise PhotonStatsError("repetition period shorter than the pulse support")
    if rep_period < 10 * model.t1:
        raise PhotonStatsError("repetition period must exceed 10 T1")
    t1_ps = model.t1 * 1e3
    up = model.transitions[0].upper

    # photons per pulse from the driven window plus the analytic tail
    ts = np.linspace(pulse.time_grid[0], pulse.time_grid[-1], n_t1)
    traj = evolve(model, ground_state(model), pulse, rel_tol, abs_tol, t_eval=ts)
    pe = traj.states[:, up, up].real
    tail = rep_period * 1e3 / 2
    n_photon = (trapezoid(pe, ts) + pe[-1] * t1_ps * -np.expm1(-tail / t1_ps)) / t1_ps

    # restrict detection times t1 to where re-excitation is possible
    drive = np.abs(pulse.amplitude)
    on = np.nonzero(drive > 1e-6 * drive.max())[0] if drive.max() > 0 else np.array([0])
    t_on0, t_on1 = pulse.time_grid[on[0]], pulse.time_grid[on[-1]]
    sel = (ts >= t_on0 - pulse.dt) & (ts <= t_on1 + pulse.dt)
    center = 0.0
    if np.count_nonzero(sel) >= 2:
        fine = np.linspace(max(t_on0, ts[0]), min(t_on1, ts[-1]), n_t1)
        trf = evolve(model, ground_state(model), pulse, rel_tol, abs_tol, t_eval=fine)
        center = _qrt_center_area(model, pulse, fine, trf.states, rel_tol, abs_tol, t1_ps,
                                  tail)
    g2_signal = center / n_photon**2 if n_photon > 0 else 0.0

    s = detection_efficiency * n_photon
    b = background.counts(pulse_energy)
    g2 = mix_background(g2_signal, s, b) if s + b > 0 else float("nan")

    hist = coincidence_histogram(g2, s + b, rep_period, model.t1, n_periods,
                                 bins_per_period, n_pulses, seed)
    areas = dict(hist.peak_areas)
    areas.update(signal_center=center, photons_per_pulse=n_photon, g2_signal=g2_signal,
                 signal_counts=s, background_counts=b)
    hist = CoincidenceHistogram(hist.delays, hist.counts, hist.repetition_period, areas)
    return g2, hist


def coincidence_histogram(g2_zero, counts_per_pulse, rep_period, t1, n_periods=10,
                          bins_per_period=100, n_pulses=None, seed=0, stream=1):
    """Peaks at k*T with areas (counts/pulse)^2 and g2_zero times that at k=0.

    Peak shape is the two-sided exponential of two independent decays.
    """
    nb = (2 * n_periods + 1) * bins_per_period
    width = rep_period / bins_per_period
    edges = (np.arange(nb + 1) - nb / 2) * width
    centers = 0.5 * (edges[1:] + edges[:-1])
    expected = np.zeros(nb)
    side = counts_per_pulse**2 * (1 if n_pulses is None else n_pulses)
    for k in range(-n_periods, n_periods + 1):
        area = side * (g2_zero if k == 0 else 1.0)
        c0 = k * rep_period
        x = -np.abs(edges - c0) / t1
        cdf = 0.5 * np.where(edges < c0, np.exp(x), 2 - np.exp(x))
        expected += area * np.diff(cdf)
    if n_pulses is None:
        counts = expected
    else:
        counts = rng_stream(seed, stream).poisson(expected)
    areas = peak_areas(centers, counts, rep_period, n_periods)
    return CoincidenceHistogram(centers, counts, rep_period, areas)


def peak_areas(delays, counts, rep_period, n_periods):
    """Integrate +-T/2 windows around each peak."""
    areas = {}
    for k in range(-n_periods, n_periods + 1):
        w = np.abs(delays - k * rep_period) < rep_period / 2
        areas[k] = float(np.sum(np.asarray(counts)[w]))
    return areas


def g2_from_histogram(hist, n_side=None):
    """Center-peak area over the mean side-peak area."""
    areas = {k: v for k, v in hist.peak_areas.items() if isinstance(k, int)}
    if not areas:
        n = int(round(np.max(np.abs(hist.delays)) / hist.repetition_period))
        areas = peak_areas(hist.delays, hist.counts, hist.repetition_period, n)
    sides = [v for k, v in areas.items() if k != 0 and (n_side is None or abs(k) <= n_side)]
    mean_side = np.mean(sides)
    if mean_side == 0:
        raise ZeroDivisionError("empty side peaks")
    return areas[0] / mean_side
