"""Spectral pulse carving and Fourier synthesis of drive envelopes.

Frequencies are detunings from the C transition in GHz, times are in ps.
Spectral amplitudes carry units of sqrt(pJ/GHz) so that
``sum(|A|**2) * dnu`` is the pulse energy in pJ. Temporal envelopes are
Rabi frequencies in rad/ps, obtained from the field through a single
calibration constant ``kappa``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

FWHM_TBP_GAUSS = 2 * np.log(2) / np.pi  # 0.441
C_NM_GHZ = 299792458.0  # speed of light in nm*GHz

DEFAULT_POINTS = 2**14
DEFAULT_SPAN_FACTOR = 8.0


class PulseError(ValueError):
    pass


class OutOfRangeError(PulseError):
    pass


class ShapeError(PulseError):
    pass


def bandwidth_nm_to_ghz(dlambda_nm, center_nm):
    return C_NM_GHZ * dlambda_nm / center_nm**2


def symmetric_grid(n_points, spacing):
    """Uniform grid ``(k - n/2) * spacing`` so that index n/2 sits at zero."""
    return (np.arange(n_points) - n_points // 2) * spacing


@dataclass(frozen=True, eq=False)
class SpectralEnvelope:
    detuning_grid: np.ndarray
    amplitude: np.ndarray
    energy_scale: float = field(default=None)

    def __post_init__(self):
        nu = np.asarray(self.detuning_grid, dtype=float)
        amp = np.asarray(self.amplitude, dtype=complex)
        if nu.ndim != 1 or nu.shape != amp.shape:
            raise PulseError("grid and amplitude must be 1D arrays of equal length")
        if len(nu) < 2:
            raise PulseError("grid needs at least two points")
        steps = np.diff(nu)
        d = steps[0]
        if d <= 0 or np.max(np.abs(steps - d)) > 1e-12 * max(abs(d), np.max(np.abs(nu))):
            raise PulseError("detuning grid must be uniform and increasing")
        energy = float(np.sum(np.abs(amp) ** 2) * d)
        if not np.isfinite(energy):
            raise PulseError("spectral energy is not finite")
        if self.energy_scale is not None and not np.isclose(
            energy, self.energy_scale, rtol=1e-9, atol=1e-300
        ):
            raise PulseError(f"energy_scale {self.energy_scale} != spectral energy {energy}")
        nu.setflags(write=False)
        amp.setflags(write=False)
        object.__setattr__(self, "detuning_grid", nu)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "energy_scale", energy)

    @property
    def spacing(self):
        return self.detuning_grid[1] - self.detuning_grid[0]

    @property
    def power(self):
        return np.abs(self.amplitude) ** 2

    @property
    def energy(self):
        return self.energy_scale

    def centroid(self):
        p = self.power
        if p.sum() == 0:
            return 0.0
        return float(np.sum(self.detuning_grid * p) / p.sum())

    def scaled_to(self, energy):
        """Same shape, rescaled to ``energy`` pJ."""
        if energy < 0:
            raise PulseError("energy must be non-negative")
        if self.energy_scale == 0:
            if energy == 0:
                return self
            raise PulseError("cannot rescale an all-zero envelope")
        f = np.sqrt(energy / self.energy_scale)
        return SpectralEnvelope(self.detuning_grid, self.amplitude * f)

    def fwhm(self):
        """Power-spectrum FWHM in GHz (outermost half-maximum crossings)."""
        return _fwhm(self.detuning_grid, self.power, outermost=True)

    def digest(self):
        h = hashlib.sha256()
        h.update(self.detuning_grid.tobytes())
        h.update(self.amplitude.tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class TemporalEnvelope:
    time_grid: np.ndarray
    amplitude: np.ndarray
    kappa: float = 1.0
    source_energy: float | None = None

    def __post_init__(self):
        t = np.asarray(self.time_grid, dtype=float)
        a = np.asarray(self.amplitude, dtype=complex)
        if t.ndim != 1 or t.shape != a.shape or len(t) < 2:
            raise PulseError("time grid and amplitude must be matching 1D arrays")
        steps = np.diff(t)
        if steps[0] <= 0 or np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
            raise PulseError("time grid must be uniform and increasing")
        t.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "time_grid", t)
        object.__setattr__(self, "amplitude", a)

    @property
    def dt(self):
        return self.time_grid[1] - self.time_grid[0]

    @property
    def intensity(self):
        return np.abs(self.amplitude) ** 2

    @property
    def peak(self):
        return float(np.max(np.abs(self.amplitude)))

    def edge_ratio(self):
        """max(|Omega|) at the two grid edges relative to the peak."""
        pk = self.peak
        if pk == 0:
            return 0.0
        a = np.abs(self.amplitude)
        return float(max(a[0], a[-1]) / pk)

    def check_support(self, tol=1e-6):
        r = self.edge_ratio()
        if r >= tol:
            raise ShapeError(f"pulse not contained in time window (edge/peak = {r:.3g})")

    def scaled(self, factor):
        return TemporalEnvelope(
            self.time_grid,
            self.amplitude * factor,
            self.kappa,
            None if self.source_energy is None else self.source_energy * abs(factor) ** 2,
        )

    @cached_property
    def spline_coefficients(self):
        """Piecewise-cubic coefficients (4, n-1), highest power first."""
        cs = CubicSpline(self.time_grid, self.amplitude)
        return np.ascontiguousarray(cs.c)

    def digest(self):
        h = hashlib.sha256()
        h.update(self.time_grid.tobytes())
        h.update(self.amplitude.tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class Slit:
    center_detuning: float
    width: float
    transmission: float = 1.0
    phase: float = 0.0
    # "hard": rectangular pixel window; "gaussian": field transmission with
    # intensity FWHM equal to ``width``
    profile: str = "hard"

    def __post_init__(self):
        if not self.width > 0:
            raise PulseError("slit width must be positive")
        if not 0.0 <= self.transmission <= 1.0:
            raise PulseError("slit transmission must lie in [0, 1]")
        if self.profile not in ("hard", "gaussian"):
            raise PulseError(f"unknown slit profile {self.profile!r}")

    @property
    def lower(self):
        return self.center_detuning - self.width / 2

    @property
    def upper(self):
        return self.center_detuning + self.width / 2


@dataclass(frozen=True)
class SlitMask:
    slits: tuple[Slit, ...]

    def __post_init__(self):
        slits = tuple(sorted(self.slits, key=lambda s: s.center_detuning))
        for a, b in zip(slits, slits[1:]):
            if b.lower < a.upper:
                raise PulseError(
                    f"slits at {a.center_detuning} and {b.center_detuning} GHz overlap"
                )
        object.__setattr__(self, "slits", slits)

    def transfer(self, nu):
        """Complex field transmission evaluated on ``nu``."""
        h = np.zeros(len(nu), dtype=complex)
        for s in self.slits:
            w = s.transmission * np.exp(1j * s.phase)
            if s.profile == "hard":
                inside = np.abs(nu - s.center_detuning) <= s.width / 2 * (1 + 1e-12)
                h[inside] = w
            else:
                h += w * np.exp(-2 * np.log(2) * ((nu - s.center_detuning) / s.width) ** 2)
        return h


@dataclass(frozen=True)
class DispersionSpec:
    gdd: float = 0.0
    tod: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.gdd) and np.isfinite(self.tod)):
            raise PulseError("dispersion coefficients must be finite")


def gaussian_source(fwhm_bandwidth, center_detuning=0.0, energy=1.0,
                    n_points=DEFAULT_POINTS, span_factor=DEFAULT_SPAN_FACTOR):
    """Transform-limited Gaussian spectrum with intensity FWHM ``fwhm_bandwidth``.

    The grid is symmetric about zero detuning and covers at least
    ``span_factor`` FWHMs around the center.
    """
    if not fwhm_bandwidth > 0:
        raise PulseError("bandwidth must be positive")
    if energy < 0:
        raise PulseError("energy must be non-negative")
    if n_points < 2**12 or span_factor < 8:
        raise PulseError("grid must have >= 2**12 points spanning >= 8 FWHM")
    half = span_factor * fwhm_bandwidth / 2 + abs(center_detuning)
    spacing = 2 * half / n_points
    nu = symmetric_grid(n_points, spacing)
    shape = np.exp(-2 * np.log(2) * ((nu - center_detuning) / fwhm_bandwidth) ** 2)
    if energy == 0:
        return SpectralEnvelope(nu, np.zeros_like(shape, dtype=complex))
    norm = np.sqrt(energy / (np.sum(shape**2) * spacing))
    return SpectralEnvelope(nu, (shape * norm).astype(complex))


def apply_mask(src, mask):
    nu = src.detuning_grid
    for s in mask.slits:
        if s.lower < nu[0] or s.upper > nu[-1]:
            raise OutOfRangeError(f"slit at {s.center_detuning} GHz lies outside the grid")
    return SpectralEnvelope(nu, src.amplitude * mask.transfer(nu))


def super_mask(det1, det2, width1, width2, t1=1.0, t2=1.0, phase1=0.0, phase2=0.0,
               profile="hard"):
    """Two-color mask; both colors come from one source pulse, so they are simultaneous."""
    return SlitMask((
        Slit(det1, width1, t1, phase1, profile),
        Slit(det2, width2, t2, phase2, profile),
    ))


def apply_dispersion(src, d):
    if d.gdd == 0 and d.tod == 0:
        return src
    w = 2 * np.pi * (src.detuning_grid - src.centroid()) * 1e-3  # rad/ps
    phi = d.gdd / 2 * w**2 + d.tod / 6 * w**3
    return SpectralEnvelope(src.detuning_grid, src.amplitude * np.exp(1j * phi))


def chirped_fwhm(tau0, gdd):
    """Intensity FWHM of a Gaussian of transform-limited FWHM ``tau0`` after ``gdd``."""
    return tau0 * np.sqrt(1 + (4 * np.log(2) * gdd / tau0**2) ** 2)


def gdd_for_duration(tau0, tau):
    """Positive GDD (ps^2) stretching a Gaussian from ``tau0`` to ``tau``."""
    if tau < tau0:
        raise PulseError("target duration shorter than transform limit")
    return tau0**2 / (4 * np.log(2)) * np.sqrt((tau / tau0) ** 2 - 1)


def to_time(src, kappa=1.0):
    """Synthesize the drive envelope ``kappa * E(t)``.

    E(t) = int A(nu) exp(-2 pi i nu t) dnu on a centered time axis with
    ``dt = 1 / (N dnu)``; ``sum(|E|^2) dt`` equals the spectral energy.
    """
    n = len(src.detuning_grid)
    dnu = src.spacing
    dt = 1e3 / (n * dnu)
    t = symmetric_grid(n, dt)
    # phase of the first grid point relative to the centered DFT convention
    nu0 = src.detuning_grid[n // 2]
    e = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(src.amplitude))) * (dnu / np.sqrt(1e3))
    if nu0 != 0:
        e = e * np.exp(-2j * np.pi * nu0 * t * 1e-3)
    return TemporalEnvelope(t, kappa * e, kappa, src.energy_scale)


def time_energy(p):
    """sum |Omega/kappa|^2 dt, which equals the source spectral energy."""
    return float(np.sum(p.intensity) * p.dt / p.kappa**2)


def _fwhm(x, y, outermost=False):
    i = int(np.argmax(y))
    half = y[i] / 2
    if y[i] <= 0:
        raise ShapeError("no intensity")
    if outermost:
        above = np.nonzero(y >= half)[0]
        lo, hi = above[0], above[-1]
    else:
        lo = i
        while lo > 0 and y[lo - 1] >= half:
            lo -= 1
        hi = i
        while hi < len(y) - 1 and y[hi + 1] >= half:
            hi += 1
    if lo == 0 or hi == len(y) - 1:
        raise ShapeError("no half-maximum crossing inside the grid")
    xl = x[lo - 1] + (half - y[lo - 1]) * (x[lo] - x[lo - 1]) / (y[lo] - y[lo - 1])
    xr = x[hi] + (half - y[hi]) * (x[hi + 1] - x[hi]) / (y[hi + 1] - y[hi])
    return float(xr - xl)


def intensity_fwhm(p):
    """FWHM of |Omega(t)|^2 around the global maximum, in ps."""
    return _fwhm(p.time_grid, p.intensity)


def autocorrelation(p):
    """Background-free intensity autocorrelation, normalized to 1 at zero delay.

    Returns ``(delay, trace)``; the trace is symmetric in delay.
    """
    i = p.intensity
    n = len(i)
    spec = np.fft.rfft(i, 2 * n)
    a = np.fft.irfft(np.abs(spec) ** 2, 2 * n)
    a = np.concatenate([a[-(n - 1):], a[:n]])
    a = 0.5 * (a + a[::-1])
    if a[n - 1] > 0:
        a = a / a[n - 1]
    delay = (np.arange(2 * n - 1) - (n - 1)) * p.dt
    return delay, a


def pulse_area(p):
    """int |Omega(t)| dt in rad."""
    return float(np.sum(np.abs(p.amplitude)) * p.dt)


def resonant_rotation(p, detuning=0.0):
    """|int Omega(t) exp(2 pi i detuning t) dt|, the rotation a weak-coupling-free
    resonant two-level system would receive from this envelope at ``detuning``."""
    ph = np.exp(2j * np.pi * detuning * 1e-3 * p.time_grid)
    return float(abs(np.sum(p.amplitude * ph)) * p.dt)


def time_bandwidth_product(src, kappa=1.0):
    return intensity_fwhm(to_time(src, kappa)) * src.fwhm() * 1e-3
