"""Rotating-frame Lindblad dynamics of a tin-vacancy-like emitter.

The frame rotates at the C transition (|1> <-> |3>). Ground-level energies
are offsets from |1>, excited-level energies offsets from |3>, all in GHz.
Drive envelopes live on ps time grids; lifetimes and rates are in ns.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import _rk
from .pulsecraft import TemporalEnvelope

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi


class DynamicsError(RuntimeError):
    pass


class StiffnessError(DynamicsError):
    pass


class IntegratorFailure(DynamicsError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Level:
    label: str
    energy: float = 0.0
    excited: bool = False


@dataclass(frozen=True)
class Transition:
    lower: int
    upper: int
    relative_dipole: float = 1.0
    branching: float = 1.0
    name: str = ""


@dataclass(frozen=True)
class EmitterModel:
    levels: tuple[Level, ...]
    transitions: tuple[Transition, ...]
    t1: float = 16.2
    pure_dephasing_rate: float = 0.0

    def __post_init__(self):
        if not self.t1 > 0:
            raise ValueError("t1 must be positive")
        if self.pure_dephasing_rate < 0:
            raise ValueError("pure dephasing rate must be non-negative")
        n = len(self.levels)
        for lv in self.levels:
            if not np.isfinite(lv.energy):
                raise ValueError("level energies must be finite")
        for tr in self.transitions:
            if not 0 < tr.relative_dipole <= 1:
                raise ValueError("relative dipole must lie in (0, 1]")
            if not (0 <= tr.lower < n and 0 <= tr.upper < n):
                raise ValueError("transition index out of range")
            if self.levels[tr.lower].excited or not self.levels[tr.upper].excited:
                raise ValueError("transitions connect a ground level to an excited level")
            if tr.branching < 0:
                raise ValueError("branching must be non-negative")

    @property
    def dim(self):
        return len(self.levels)

    @property
    def excited_indices(self):
        return [i for i, lv in enumerate(self.levels) if lv.excited]

    def index(self, label):
        for i, lv in enumerate(self.levels):
            if lv.label == label:
                return i
        raise KeyError(label)

    def lossless(self):
        """Same levels and couplings with decay and dephasing switched off."""
        return replace(self, t1=np.inf, pure_dephasing_rate=0.0)

    @classmethod
    def two_level(cls, t1=16.2, t2_star=None, detuning=0.0):
        """|1>, |3> and the C transition; ``t2_star=None`` means lifetime-limited."""
        return cls(
            (Level("1", 0.0, False), Level("3", detuning, True)),
            (Transition(0, 1, 1.0, 1.0, "C"),),
            t1=t1,
            pure_dephasing_rate=pure_dephasing_from_t2(t1, t2_star),
        )

    @classmethod
    def four_level(cls, t1=16.2, t2_star=None, ground_splitting=830.0,
                   excited_splitting=3000.0, dipoles=None, branching=None):
        """Ground doublet |1>,|2> and excited doublet |3>,|4>.

        Transition frequencies relative to C: D (2-3) at -ground_splitting,
        B (1-4) at +excited_splitting, A (2-4) at the difference.
        """
        dipoles = {"C": 1.0, "D": 1.0, "A": 1.0, "B": 1.0, **(dipoles or {})}
        branching = {"C": 0.5, "D": 0.5, "A": 0.5, "B": 0.5, **(branching or {})}
        levels = (
            Level("1", 0.0, False),
            Level("2", ground_splitting, False),
            Level("3", 0.0, True),
            Level("4", excited_splitting, True),
        )
        pairs = {"C": (0, 2), "D": (1, 2), "B": (0, 3), "A": (1, 3)}
        transitions = tuple(
            Transition(lo, up, dipoles[k], branching[k], k) for k, (lo, up) in pairs.items()
        )
        return cls(levels, transitions, t1=t1,
                   pure_dephasing_rate=pure_dephasing_from_t2(t1, t2_star))


def pure_dephasing_from_t2(t1, t2_star):
    """gamma* = 1/T2* - 1/(2 T1), in 1/ns."""
    if t2_star is None:
        return 0.0
    rate = 1.0 / t2_star - 0.5 / t1
    if rate < -1e-12:
        raise ValueError("T2* cannot exceed 2 T1")
    return max(rate, 0.0)


def ground_state(model):
    rho = np.zeros((model.dim, model.dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def excited_state(model, index=None):
    i = model.excited_indices[0] if index is None else index
    rho = np.zeros((model.dim, model.dim), dtype=complex)
    rho[i, i] = 1.0
    return rho


def check_density_matrix(rho, herm_tol=1e-12, trace_tol=1e-9, eig_tol=1e-9):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError("density matrix must be square")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise IntegratorFailure(f"state not Hermitian ({herm:.2e})")
    tr = abs(np.trace(rho) - 1)
    if tr > trace_tol:
        raise IntegratorFailure(f"trace deviates from 1 by {tr:.2e}")
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if ev < -eig_tol:
        raise IntegratorFailure(f"negative eigenvalue {ev:.2e}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    time_unit: str = "ps"
    info: dict = field(default_factory=dict)

    def population(self, index):
        return self.states[:, index, index].real

    def populations(self):
        return np.einsum("tii->ti", self.states).real

    def coherence(self, i, j):
        return self.states[:, i, j]

    @property
    def final(self):
        return self.states[-1]


def _frame_energies(model, frame):
    """Diagonal of H in rad per ps for a frame detuned by ``frame`` GHz from C."""
    e = np.array([lv.energy - (frame if lv.excited else 0.0) for lv in model.levels])
    return TWO_PI * e * 1e-3


def build_hamiltonian(model, drive, frame=0.0):
    """H (rad/ps) for complex Rabi frequency ``drive`` (rad/ps)."""
    drive = complex(drive)
    if not np.isfinite(drive):
        raise ValueError("drive must be finite")
    h = np.diag(_frame_energies(model, frame)).astype(complex)
    for tr in model.transitions:
        h[tr.upper, tr.lower] += 0.5 * tr.relative_dipole * drive
        h[tr.lower, tr.upper] += 0.5 * tr.relative_dipole * np.conj(drive)
    return h


def collapse_operators(model, time_unit="ps"):
    """Lindblad operators with their rates folded in, for rates per ``time_unit``."""
    scale = 1e-3 if time_unit == "ps" else 1.0
    n = model.dim
    ops = []
    gamma = scale / model.t1
    for e in (model.excited_indices if gamma > 0 else []):
        outs = [tr for tr in model.transitions if tr.upper == e and tr.branching > 0]
        total = sum(tr.branching for tr in outs)
        for tr in outs:
            op = np.zeros((n, n), dtype=complex)
            op[tr.lower, e] = np.sqrt(gamma * tr.branching / total)
            ops.append(op)
    if model.pure_dephasing_rate > 0:
        for e in model.excited_indices:
            op = np.zeros((n, n), dtype=complex)
            op[e, e] = np.sqrt(2 * model.pure_dephasing_rate * scale)
            ops.append(op)
    return ops


class _Problem:
    """Arrays handed to the compiled kernel."""

    def __init__(self, model, coef, t0, dt, frame=0.0, time_unit="ps"):
        self.n = model.dim
        self.h0 = _frame_energies(model, frame).astype(complex)
        if time_unit == "ns":
            self.h0 = self.h0 * 1e3
        self.up = np.array([t.upper for t in model.transitions], dtype=np.int64)
        self.lo = np.array([t.lower for t in model.transitions], dtype=np.int64)
        self.dip = np.array([t.relative_dipole for t in model.transitions], dtype=float)
        # integration runs in the interaction picture of the diagonal h0
        self.energies = self.h0.real.copy()
        self.w = self.energies[self.up] - self.energies[self.lo]
        self._static_superoperator(collapse_operators(model, time_unit))
        self.coef = np.ascontiguousarray(coef, dtype=complex)
        self.t0 = float(t0)
        self.dt = float(dt)

    def _static_superoperator(self, ops):
        """Nonzeros of the dissipator on row-major vec(rho).

        Decay and dephasing operators are phase covariant, so the dissipator
        is unchanged by the interaction-picture transformation.
        """
        n = self.n
        eye = np.eye(n)
        L = np.zeros((n * n, n * n), dtype=complex)
        for c in ops:
            cdc = c.conj().T @ c
            L = L + np.kron(c, c.conj()) - 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
        rows, cols = np.nonzero(L)
        self.oi, self.oj = rows // n, rows % n
        self.ri, self.rj = cols // n, cols % n
        self.vals = np.ascontiguousarray(L[rows, cols], dtype=complex)

    def args(self):
        return (self.oi, self.oj, self.ri, self.rj, self.vals, self.up, self.lo, self.dip,
                self.w, self.t0, self.dt, self.coef)

    def phases(self, t):
        """exp(-i (E_i - E_j) t), mapping interaction-picture states back."""
        e = self.energies
        return np.exp(-1j * np.subtract.outer(e, e) * t)

    def to_interaction(self, rho, t):
        return rho * np.conj(self.phases(t))

    def from_interaction(self, rho, t):
        return rho * self.phases(t)


def _validate_tol(rel_tol, abs_tol):
    for v in (rel_tol, abs_tol):
        if not 0 < v <= 1e-2:
            raise ValueError("tolerances must lie in (0, 1e-2]")


def _run(problem, rho0, t_start, t_end, t_eval, rel_tol, abs_tol, h_max, h_init=None,
         max_steps=10_000_000, check_states=True, t_log=None):
    rho0 = np.ascontiguousarray(rho0, dtype=complex)
    if rho0.shape != (problem.n, problem.n):
        raise DimensionError("initial state does not match model dimension")
    check_density_matrix(rho0)
    t_eval = np.ascontiguousarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) <= 0):
        raise ValueError("output times must be strictly increasing")
    h_init = min(h_max, problem.dt) if h_init is None else h_init
    inv_tol = np.array([1e-9, 1e-12])
    status, n_acc, n_rej, states, final, dtr, dherm = _rk.dopri5(
        problem.to_interaction(rho0, t_start), float(t_start), float(t_end), rel_tol, abs_tol, h_init, h_max, t_eval,
        *problem.args(), inv_tol, max_steps,
        np.empty(0) if t_log is None else t_log)
    if status == _rk.UNDERFLOW:
        raise StiffnessError(f"step size underflow after {n_acc} steps")
    if status == _rk.INVARIANT:
        raise IntegratorFailure(f"trace/Hermiticity drift {dtr:.2e}/{dherm:.2e}")
    if status == _rk.MAXSTEPS:
        raise StiffnessError("step budget exhausted")
    states = np.array([problem.from_interaction(s, t) for s, t in
                       zip(states, np.clip(t_eval, t_start, t_end))]).reshape(states.shape)
    final = problem.from_interaction(final, t_end)
    if check_states:
        # positivity drifts with the integration error, not with rounding
        eig_tol = max(1e-9, 10 * rel_tol)
        for s in states:
            check_density_matrix(s, eig_tol=eig_tol)
    info = dict(accepted=int(n_acc), rejected=int(n_rej), trace_dev=float(dtr),
                herm_dev=float(dherm), rel_tol=rel_tol, abs_tol=abs_tol)
    return states, final, info


def evolve(model, rho0, pulse, rel_tol=1e-8, abs_tol=1e-10, t_eval=None, frame=0.0,
           t_span=None, max_step=None, record_mesh=False):
    """Integrate the master equation across the pulse time window.

    ``t_eval`` defaults to the window end points. The drive is zero outside
    the pulse grid, so ``t_span`` may extend past it (e.g. to follow decay).
    With ``record_mesh`` the accepted step boundaries go to ``info["mesh"]``.
    """
    _validate_tol(rel_tol, abs_tol)
    tg = pulse.time_grid
    t_start, t_end = (tg[0], tg[-1]) if t_span is None else t_span
    if t_eval is None:
        t_eval = np.array([t_start, t_end])
    problem = _Problem(model, pulse.spline_coefficients, tg[0], pulse.dt, frame)
    # several samples per step keep the spline resolved
    h_max = 4 * pulse.dt if max_step is None else max_step
    log = np.zeros(1 << 17 if record_mesh else 0)
    states, _, info = _run(problem, rho0, t_start, t_end, t_eval, rel_tol, abs_tol, h_max,
                           t_log=log)
    if record_mesh:
        if info["accepted"] > len(log):
            log = np.zeros(info["accepted"])
            _run(problem, rho0, t_start, t_end, t_eval, rel_tol, abs_tol, h_max,
                 check_states=False, t_log=log)
        info["mesh"] = np.concatenate([[t_start], log[:info["accepted"]]])
    info["pulse"] = pulse.digest()
    return Trajectory(np.asarray(t_eval, dtype=float), states, "ps", info)


def rk4_refined(model, rho0, pulse, mesh, refine=10, frame=0.0):
    """Fixed-step RK4 with every interval of ``mesh`` split ``refine`` times.

    Fed ``info["mesh"]`` from ``evolve``, this is a reference ``refine`` times finer
    than the adaptive integrator everywhere along the trajectory.
    """
    tg = pulse.time_grid
    problem = _Problem(model, pulse.spline_coefficients, tg[0], pulse.dt, frame)
    mesh = np.ascontiguousarray(mesh, dtype=float)
    rho = _rk.rk4_mesh(problem.to_interaction(np.asarray(rho0, dtype=complex), mesh[0]),
                       mesh, int(refine), *problem.args())
    return problem.from_interaction(rho, mesh[-1])


def rk4_reference(model, rho0, pulse, n_steps, frame=0.0, t_span=None):
    """Fixed-step RK4 final state; used to cross-check ``evolve``."""
    tg = pulse.time_grid
    t_start, t_end = (tg[0], tg[-1]) if t_span is None else t_span
    problem = _Problem(model, pulse.spline_coefficients, tg[0], pulse.dt, frame)
    rho = _rk.rk4_fixed(problem.to_interaction(np.asarray(rho0, dtype=complex), t_start),
                        float(t_start), float(t_end), int(n_steps), *problem.args())
    return problem.from_interaction(rho, t_end)


def _constant_coef(omega, duration):
    c = np.zeros((4, 1), dtype=complex)
    c[3, 0] = omega
    return c


def evolve_quasi_cw(model, rabi_frequency, duration, n_samples=1001, rel_tol=1e-8,
                    abs_tol=1e-10, rho0=None):
    """Constant resonant drive (rad/ns) switched on at t=0; times in ns."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    problem = _Problem(model, _constant_coef(rabi_frequency, duration), 0.0, duration,
                       time_unit="ns")
    t = np.linspace(0.0, duration, n_samples)
    rho0 = ground_state(model) if rho0 is None else rho0
    h_max = duration / 20
    if rabi_frequency != 0:
        h_max = min(h_max, 0.5 / abs(rabi_frequency))
    states, _, info = _run(problem, rho0, 0.0, duration, t, rel_tol, abs_tol, h_max)
    return Trajectory(t, states, "ns", info)


def free_decay(model, rho0, duration, n_samples=1001, rel_tol=1e-10, abs_tol=1e-13):
    """Undriven evolution over ``duration`` ns."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    problem = _Problem(model, np.zeros((4, 1), dtype=complex), 0.0, duration,
                       time_unit="ns")
    t = np.linspace(0.0, duration, n_samples)
    states, _, info = _run(problem, rho0, 0.0, duration, t, rel_tol, abs_tol,
                           h_max=model.t1 / 20)
    return Trajectory(t, states, "ns", info)


def bloch_vector(rho):
    """(x, y, z) with z = +1 in the excited state."""
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise DimensionError("Bloch vector requires a two-level state")
    x = 2 * rho[0, 1].real
    y = -2 * rho[0, 1].imag
    z = (rho[1, 1] - rho[0, 0]).real
    return np.array([x, y, z])


def excited_population(model, rho):
    return float(sum(rho[i, i].real for i in model.excited_indices))


def cross_coupling_leakage(model, pulse, rel_tol=1e-9, abs_tol=1e-12):
    """Population outside {|1>, |3>} after the pulse, starting in |1>."""
    if model.dim != 4:
        raise DimensionError("leakage needs the four-level model")
    if pulse.peak == 0:
        return 0.0
    traj = evolve(model, ground_state(model), pulse, rel_tol, abs_tol)
    rho = traj.final
    keep = model.index("1"), model.index("3")
    return float(1.0 - sum(rho[i, i].real for i in keep))
