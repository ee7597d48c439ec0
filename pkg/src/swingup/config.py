"""Experiment configuration: dataclass sections read from and written to INI text."""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field, fields, replace

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration; ``line`` points into the source text when known."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None or line is not None:
            where = f"{source or '<config>'}:{line if line is not None else '?'}: "
        super().__init__(where + message)


# ---------------------------------------------------------------- value codecs

def parse_axis(text):
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] == 0:
            raise ValueError(f"bad range {text!r}; expected start:stop:step")
        start, stop, step = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        if n < 1:
            raise ValueError(f"empty range {text!r}")
        # round to kill accumulation noise so axes print cleanly
        return tuple(float(np.round(start + k * step, 10)) for k in range(n))
    return tuple(float(v) for v in text.split(","))


def format_axis(values):
    return ", ".join(repr(float(v)) for v in values)


def parse_slits(text):
    """``center width [transmission [phase [profile]]]`` entries separated by ';'."""
    out = []
    for chunk in text.split(";"):
        tok = chunk.split()
        if not tok:
            continue
        if not 2 <= len(tok) <= 5:
            raise ValueError(f"bad slit {chunk.strip()!r}")
        c, w = float(tok[0]), float(tok[1])
        t = float(tok[2]) if len(tok) > 2 else 1.0
        ph = float(tok[3]) if len(tok) > 3 else 0.0
        prof = tok[4] if len(tok) > 4 else "hard"
        out.append((c, w, t, ph, prof))
    return tuple(out)


def format_slits(slits):
    return "; ".join(f"{c!r} {w!r} {t!r} {ph!r} {prof}" for c, w, t, ph, prof in slits)


def _parse_bool(text):
    v = text.strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_float(text):
    v = text.strip().lower()
    return None if v in ("", "none") else float(v)


def _parse_optional_int(text):
    v = text.strip().lower()
    return None if v in ("", "none") else int(v)


def _fmt_value(v, kind):
    if kind == "axis":
        return format_axis(v)
    if kind == "slits":
        return format_slits(v)
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_PARSERS = {
    "float": float,
    "int": int,
    "str": str.strip,
    "bool": _parse_bool,
    "ofloat": _parse_optional_float,
    "oint": _parse_optional_int,
    "axis": parse_axis,
    "slits": parse_slits,
}


def _f(default, kind, help=""):
    return field(default=default, metadata={"kind": kind, "help": help})


# ---------------------------------------------------------------- sections

@dataclass(frozen=True)
class EmitterConfig:
    kind: str = _f("two_level", "str", "two_level or four_level")
    t1: float = _f(16.2, "float", "excited-state lifetime, ns")
    t2_star: float | None = _f(None, "ofloat", "ns; none = lifetime limited")
    ground_splitting: float = _f(830.0, "float", "GHz")
    excited_splitting: float = _f(3000.0, "float", "GHz")


@dataclass(frozen=True)
class SourceConfig:
    fwhm: float = _f(2820.0, "float", "intensity FWHM of the laser spectrum, GHz")
    energy: float = _f(2.0e4, "float", "pJ available before carving")
    n_points: int = _f(2**14, "int")
    span_factor: float = _f(8.0, "float")


@dataclass(frozen=True)
class ReferenceConfig:
    """Resonant narrowband pulse that fixes the drive calibration."""

    width: float = _f(42.3, "float", "GHz")
    profile: str = _f("gaussian", "str")
    a_pi: float = _f(0.143, "float", "field amplitude of a pi rotation, sqrt(pJ)")


@dataclass(frozen=True)
class PulseConfig:
    shape: str = _f("narrowband", "str", "narrowband, subpicosecond, identity or custom")
    slits: tuple = _f((), "slits", "custom mask")
    subpicosecond_width: float = _f(1400.0, "float", "GHz")
    gdd: float = _f(0.0, "float", "ps^2")
    tod: float = _f(0.0, "float", "ps^3")
    amplitude: float | None = _f(None, "ofloat", "sqrt(pJ); none = pi pulse")


@dataclass(frozen=True)
class SweepConfig:
    max_rotation: float = _f(7.0, "float", "pi units, resonant-equivalent")
    n_points: int = _f(141, "int")
    amplitudes: tuple = _f((), "axis", "explicit axis, sqrt(pJ)")
    noisy: bool = _f(False, "bool")
    counts_at_pi: float = _f(2.0e4, "float", "detected counts at full inversion")
    fidelity_envelope: float = _f(1.0, "float", "contrast envelope at a_pi for synthetic data")


@dataclass(frozen=True)
class SuperConfig:
    fixed_detuning: float = _f(116.6, "float", "GHz, magnitude")
    fixed_rotation: float = _f(7.0, "float", "pi units, resonant-equivalent")
    fixed_width: float = _f(42.3, "float", "GHz")
    scanned_width: float = _f(42.3, "float", "GHz")
    profile: str = _f("hard", "str")
    sign: float = _f(-1.0, "float", "-1 red detuning, +1 blue")
    detunings: tuple = _f(parse_axis("150:400:5"), "axis", "GHz, magnitudes")
    amplitudes: tuple = _f((), "axis", "explicit axis, sqrt(pJ)")
    n_amplitudes: int = _f(20, "int")
    min_fraction: float = _f(0.05, "float", "lowest log-spaced amplitude / max")
    max_rotation: float = _f(3.6, "float", "max scanned amplitude, pi units resonant-equivalent")
    amplitude_max: float | None = _f(None, "ofloat", "sqrt(pJ); overrides max_rotation")
    multipliers: tuple = _f((1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0), "axis")
    extension_detunings: tuple = _f(parse_axis("150:1000:10"), "axis", "GHz, magnitudes")


@dataclass(frozen=True)
class DetectorConfig:
    irf_sigma: float = _f(0.35, "float", "ns")
    bin_width: float = _f(0.1, "float", "ns")
    events_at_pi: int = _f(1_000_000, "int", "decay events for a full inversion")
    min_events: int = _f(10_000, "int")
    efficiency: float = _f(0.01, "float", "photons detected per photon emitted")
    background_rate: float = _f(0.0, "float", "counts per pulse per pJ")
    background_offset: float = _f(0.0, "float", "counts per pulse")


@dataclass(frozen=True)
class LifetimeConfig:
    rotation: float = _f(1.0, "float", "pi units")


@dataclass(frozen=True)
class QuasiCWConfig:
    rabi_frequency: float = _f(2.0, "float", "rad/ns")
    duration: float = _f(40.0, "float", "ns")
    n_samples: int = _f(801, "int")
    counts_scale: float = _f(1.0e4, "float", "counts per unit excited population")


@dataclass(frozen=True)
class G2Config:
    repetition_period: float = _f(200.0, "float", "ns")
    n_periods: int = _f(5, "int")
    n_pulses: int | None = _f(None, "oint", "none = expected histogram")


@dataclass(frozen=True)
class RunConfig:
    seed: int | None = _f(None, "oint")
    workers: int = _f(1, "int")
    out_dir: str = _f("out", "str")
    rel_tol: float = _f(1e-9, "float")
    abs_tol: float = _f(1e-12, "float")


SECTIONS = {
    "emitter": EmitterConfig,
    "source": SourceConfig,
    "reference": ReferenceConfig,
    "pulse": PulseConfig,
    "sweep": SweepConfig,
    "super": SuperConfig,
    "detector": DetectorConfig,
    "lifetime": LifetimeConfig,
    "quasi_cw": QuasiCWConfig,
    "g2": G2Config,
    "run": RunConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    emitter: EmitterConfig = field(default_factory=EmitterConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    pulse: PulseConfig = field(default_factory=PulseConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    super: SuperConfig = field(default_factory=SuperConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    lifetime: LifetimeConfig = field(default_factory=LifetimeConfig)
    quasi_cw: QuasiCWConfig = field(default_factory=QuasiCWConfig)
    g2: G2Config = field(default_factory=G2Config)
    run: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        self.validate()

    def validate(self, lines=None, source=None):
        lines = lines or {}

        def fail(sec, key, msg):
            raise ConfigError(f"[{sec}] {key}: {msg}", lines.get((sec, key)), source)

        if self.emitter.kind not in ("two_level", "four_level"):
            fail("emitter", "kind", f"unknown emitter kind {self.emitter.kind!r}")
        if not self.emitter.t1 > 0:
            fail("emitter", "t1", "must be positive")
        if self.emitter.t2_star is not None and not (
                0 < self.emitter.t2_star <= 2 * self.emitter.t1):
            fail("emitter", "t2_star", "must lie in (0, 2 T1]")
        if self.pulse.shape not in ("narrowband", "subpicosecond", "identity", "custom"):
            fail("pulse", "shape", f"unknown shape {self.pulse.shape!r}")
        if self.pulse.shape == "custom" and not self.pulse.slits:
            fail("pulse", "slits", "custom shape needs at least one slit")
        for sec, key in (("sweep", "amplitudes"), ("super", "amplitudes"),
                         ("super", "detunings"), ("super", "extension_detunings")):
            ax = getattr(getattr(self, sec), key)
            if ax and np.any(np.diff(ax) <= 0):
                fail(sec, key, "axis must be strictly increasing")
        if not self.super.detunings:
            fail("super", "detunings", "empty axis")
        if not self.super.amplitudes and self.super.n_amplitudes < 1:
            fail("super", "n_amplitudes", "empty axis")
        if any(v < 0 for v in self.super.detunings):
            fail("super", "detunings", "give magnitudes; the sign is set by 'sign'")
        if self.super.sign not in (-1.0, 1.0):
            fail("super", "sign", "must be -1 or +1")
        if not self.super.multipliers or min(self.super.multipliers) < 1:
            fail("super", "multipliers", "multipliers must be >= 1")
        if self.sweep.noisy and self.run.seed is None:
            fail("run", "seed", "a seed is required when noisy synthesis is enabled")
        if not 0 < self.sweep.fidelity_envelope <= 1:
            fail("sweep", "fidelity_envelope", "must lie in (0, 1]")
        if self.run.workers < 1:
            fail("run", "workers", "must be >= 1")
        if not (0 < self.run.rel_tol < 1e-3):
            fail("run", "rel_tol", "must lie in (0, 1e-3)")

    # ------------------------------------------------------------ text form
    def to_ini(self):
        lines = []
        for name, cls in SECTIONS.items():
            sec = getattr(self, name)
            lines.append(f"[{name}]")
            for f in fields(cls):
                lines.append(f"{f.name} = {_fmt_value(getattr(sec, f.name), f.metadata['kind'])}")
            lines.append("")
        return "\n".join(lines)

    def digest(self):
        return hashlib.sha256(self.to_ini().encode()).hexdigest()

    def with_overrides(self, **sections):
        """``cfg.with_overrides(run={"seed": 3})`` returns a modified copy."""
        kw = {}
        for name, values in sections.items():
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]")
            kw[name] = replace(getattr(self, name), **values)
        return replace(self, **kw)

    @classmethod
    def from_ini(cls, text, source=None):
        lines = _key_lines(text)
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        try:
            cp.read_string(text, source=source or "<config>")
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(str(exc).splitlines()[0], line, source) from None
        kw = {}
        for name in cp.sections():
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]", lines.get((name, None)), source)
            scls = SECTIONS[name]
            known = {f.name: f for f in fields(scls)}
            vals = {}
            for key, raw in cp.items(name):
                if key not in known:
                    raise ConfigError(f"[{name}] unknown key {key!r}", lines.get((name, key)),
                                      source)
                kind = known[key].metadata["kind"]
                try:
                    vals[key] = _PARSERS[kind](raw)
                except ValueError as exc:
                    raise ConfigError(f"[{name}] {key}: {exc}", lines.get((name, key)),
                                      source) from None
            kw[name] = scls(**vals)
        cfg = object.__new__(cls)
        for f in fields(cls):
            object.__setattr__(cfg, f.name, kw.get(f.name, f.default_factory()))
        cfg.validate(lines, source)
        return cfg

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            text = fh.read()
        return cls.from_ini(text, source=str(path))


def _key_lines(text):
    """Map (section, key) and (section, None) to 1-based line numbers."""
    out = {}
    sec = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            sec = m.group(1).strip()
            out.setdefault((sec, None), i)
            continue
        m = re.match(r"([A-Za-z0-9_]+)\s*[=:]", s)
        if m and sec is not None:
            out.setdefault((sec, m.group(1).lower()), i)
    return out
