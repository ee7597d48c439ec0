"""Least-squares fitting engine and the fit models used on Rabi, lifetime and
quasi-CW data.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import log_ndtr, ndtr

log = logging.getLogger(__name__)


class FitError(ValueError):
    pass


class FitRangeError(FitError):
    pass


class AliasingError(FitError):
    pass


class UndefinedVisibility(ZeroDivisionError):
    pass


@dataclass
class FitResult:
    names: list
    values: np.ndarray
    covariance: np.ndarray
    chi2: float
    dof: int
    converged: bool
    n_iter: int = 0
    units: dict = field(default_factory=dict)
    fit_range: tuple = None
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    @property
    def errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def error(self, name):
        return float(self.errors[self.names.index(name)])

    def as_dict(self):
        return {
            "names": list(self.names),
            "units": dict(self.units),
            "values": [float(v) for v in self.values],
            "errors": [float(e) for e in self.errors],
            "covariance": np.asarray(self.covariance, dtype=float).tolist(),
            "chi2": float(self.chi2),
            "dof": int(self.dof),
            "reduced_chi2": float(self.reduced_chi2),
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
            "fit_range": None if self.fit_range is None else [float(v) for v in self.fit_range],
            "message": self.message,
            "extra": _jsonable(self.extra),
        }

    def to_json(self, **kw):
        return json.dumps(self.as_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        return cls(
            names=list(d["names"]),
            values=np.asarray(d["values"], dtype=float),
            covariance=np.asarray(d["covariance"], dtype=float),
            chi2=d["chi2"],
            dof=d["dof"],
            converged=d["converged"],
            n_iter=d.get("n_iter", 0),
            units=d.get("units", {}),
            fit_range=None if d.get("fit_range") is None else tuple(d["fit_range"]),
            message=d.get("message", ""),
            extra=d.get("extra", {}),
        )

    def report(self):
        lines = [f"{'parameter':<12}{'value':>16}{'error':>14}  unit"]
        for n, v, e in zip(self.names, self.values, self.errors):
            lines.append(f"{n:<12}{v:>16.6g}{e:>14.3g}  {self.units.get(n, '')}")
        lines.append(f"reduced chi2 = {self.reduced_chi2:.4g} (dof {self.dof}), "
                     f"converged = {self.converged}")
        return "\n".join(lines)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _jacobian(fun, p, r0, lower, upper):
    """Forward differences, stepping inward at active bounds."""
    m, n = len(r0), len(p)
    J = np.empty((m, n))
    for j in range(n):
        h = 1.5e-8 * max(abs(p[j]), 1e-3)
        if p[j] + h > upper[j]:
            h = -h
        q = p.copy()
        q[j] += h
        J[:, j] = (fun(q) - r0) / h
    return J


def least_squares(residual, p0, bounds=None, jac=None, max_iter=500, ftol=1e-10,
                  gtol=1e-10, lam0=1e-3):
    """Levenberg-Marquardt minimization of ``sum(residual(p)**2)``.

    Bounds are enforced by projection. Returns
    ``(p, cost, J, converged, n_iter, message)`` with ``cost = sum r^2``.
    """
    p = np.array(p0, dtype=float)
    n = len(p)
    if bounds is None:
        lower, upper = np.full(n, -np.inf), np.full(n, np.inf)
    else:
        lower = np.asarray(bounds[0], dtype=float) * np.ones(n)
        upper = np.asarray(bounds[1], dtype=float) * np.ones(n)
    p = np.clip(p, lower, upper)
    jacobian = jac or (lambda q, r: _jacobian(residual, q, r, lower, upper))

    r = residual(p)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals are not finite at the initial guess")
    cost = float(r @ r)
    lam = lam0
    converged = False
    message = "maximum iterations reached"
    it = 0
    J = jacobian(p, r)
    for it in range(1, max_iter + 1):
        g = J.T @ r
        if np.linalg.norm(g) < gtol:
            converged, message = True, "gradient norm below tolerance"
            break
        A = J.T @ J
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        improved = False
        for _ in range(60):
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            q = np.clip(p + step, lower, upper)
            rq = residual(q)
            cq = float(rq @ rq) if np.all(np.isfinite(rq)) else np.inf
            if cq <= cost:
                improved = True
                break
            lam *= 10
        if not improved:
            converged = cost == 0 or np.linalg.norm(g) < 1e-6 * max(1.0, cost)
            message = "no downhill step found"
            break
        rel = (cost - cq) / max(cost, 1e-300)
        p, r = q, rq
        cost = cq
        lam = max(lam / 10, 1e-12)
        J = jacobian(p, r)
        if rel < ftol:
            converged, message = True, "relative cost change below tolerance"
            break
    return p, cost, J, converged, it, message


def _covariance(J):
    A = J.T @ J
    try:
        return np.linalg.inv(A)
    except np.linalg.LinAlgError:
        # singular normal equations: damp once, then give up
        d = np.diag(A)
        try:
            return np.linalg.inv(A + 1e-12 * np.diag(np.where(d > 0, d, 1.0)))
        except np.linalg.LinAlgError as exc:
            raise FitError("singular normal equations") from exc


def fit_nlls(model_fn, x, y, sigma, initial_guess, bounds=None, names=None,
             units=None, absolute_sigma=True, **kw):
    """Weighted nonlinear least squares of ``model_fn(x, *p)`` to ``y``.

    With ``absolute_sigma`` the covariance is ``(J^T W J)^-1``; otherwise it
    is rescaled by the reduced chi-square.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    if x.shape[0] != y.shape[0]:
        raise FitError("x and y lengths differ")
    if np.any(~(sigma > 0)):
        raise FitError("sigma must be strictly positive")
    p0 = np.atleast_1d(np.asarray(initial_guess, dtype=float))
    if len(y) < len(p0):
        raise FitError("fewer data points than parameters")

    def residual(p):
        return (model_fn(x, *p) - y) / sigma

    p, cost, J, conv, it, msg = least_squares(residual, p0, bounds, **kw)
    dof = len(y) - len(p)
    cov = _covariance(J)
    if not absolute_sigma and dof > 0:
        cov = cov * cost / dof
    names = list(names) if names else [f"p{i}" for i in range(len(p))]
    return FitResult(names, p, cov, cost, dof, conv, it, units or {},
                     (float(x.min()), float(x.max())), msg)


# ---------------------------------------------------------------- damped Rabi

def damped_rabi(a, amp, kappa, a_d, c, b):
    """Counts vs field amplitude a (sqrt pJ); background linear in energy a^2."""
    return amp * np.exp(-a / a_d) * np.sin(kappa * a / 2) ** 2 + c * a**2 + b


RABI_NAMES = ["amp", "kappa", "a_d", "c", "b"]
RABI_UNITS = {"amp": "counts", "kappa": "rad/sqrt(pJ)", "a_d": "sqrt(pJ)",
              "c": "counts/pJ", "b": "counts"}


def _count_extrema(y):
    d = np.sign(np.diff(y))
    d = d[d != 0]
    return int(np.sum(d[1:] != d[:-1]))


def _rabi_initial(a, y, w):
    """Deterministic grid over (kappa, a_d); linear LS for the rest."""
    span = a.max() - a.min()
    if span <= 0:
        raise FitRangeError("degenerate amplitude axis")
    best = None
    kappas = np.linspace(2 * np.pi / span * 0.5, 2 * np.pi / np.median(np.diff(np.sort(a))) / 6,
                         400)
    for a_d in (0.5 * a.max(), 2 * a.max(), 10 * a.max(), 1e3 * a.max()):
        env = np.exp(-a / a_d)
        for k in kappas:
            X = np.column_stack([env * np.sin(k * a / 2) ** 2, a**2, np.ones_like(a)])
            coef, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
            r = (X @ coef - y) * w
            cost = r @ r
            if coef[0] > 0 and (best is None or cost < best[0]):
                best = (cost, [coef[0], k, a_d, coef[1], coef[2]])
    if best is None:
        raise FitRangeError("no oscillating component found")
    return np.array(best[1])


def fit_damped_rabi(amplitude, counts, sigma=None, trim=False, trim_threshold=0.05,
                    min_points=10, initial_guess=None):
    """Fit ``amp * exp(-a/a_d) * sin^2(kappa a / 2) + c a^2 + b``.

    With ``trim`` the highest-amplitude points are dropped one at a time
    while the reduced chi-square improves by more than ``trim_threshold``.
    """
    a = np.asarray(amplitude, dtype=float)
    y = np.asarray(counts, dtype=float)
    order = np.argsort(a)
    a, y = a[order], y[order]
    if sigma is None:
        s = np.sqrt(np.maximum(y, 1.0))
    else:
        s = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)[order]
    if len(a) < min_points:
        raise FitRangeError(f"need at least {min_points} points")
    if _count_extrema(y) < 1:
        raise FitRangeError("no oscillation extremum in range")

    def fit(n):
        aa, yy, ss = a[:n], y[:n], s[:n]
        p0 = _rabi_initial(aa, yy, 1 / ss) if initial_guess is None else initial_guess
        bounds = ([0, 1e-9, 1e-9, -np.inf, -np.inf], [np.inf, np.inf, np.inf, np.inf, np.inf])
        res = fit_nlls(damped_rabi, aa, yy, ss, p0, bounds, RABI_NAMES, RABI_UNITS)
        return res

    n = len(a)
    res = fit(n)
    if trim:
        while n - 1 >= min_points:
            cand = fit(n - 1)
            if cand.reduced_chi2 < (1 - trim_threshold) * res.reduced_chi2:
                res, n = cand, n - 1
            else:
                break
    periods = res["kappa"] * (a[n - 1] - a[0]) / (2 * np.pi)
    res.extra["periods_in_range"] = float(periods)
    res.extra["n_used"] = int(n)
    if periods < 1:
        log.warning("fit spans only %.2f oscillation periods", periods)
    return res


def estimate_inversion_fidelity(fit):
    """Contrast envelope exp(-a_pi / a_d) at a_pi = pi / kappa, with 1-sigma error."""
    if not fit.converged:
        raise FitError("fit did not converge; fidelity unavailable")
    k, ad = fit["kappa"], fit["a_d"]
    ik, iad = fit.names.index("kappa"), fit.names.index("a_d")
    a_pi = np.pi / k
    f = float(np.exp(-a_pi / ad))
    grad = np.zeros(len(fit.values))
    grad[ik] = f * np.pi / (k**2 * ad)
    grad[iad] = f * a_pi / ad**2
    err = float(np.sqrt(max(grad @ fit.covariance @ grad, 0.0)))
    return f, err


def visibility(i_pi, i_2pi):
    if i_2pi == 0:
        raise UndefinedVisibility("I(2 pi) is zero")
    return i_pi / i_2pi


# ------------------------------------------------------------------ lifetime

def emg_cdf(t, tau, sigma, t0=0.0):
    """CDF of an exponential (time constant tau) convolved with a Gaussian IRF."""
    x = np.asarray(t, dtype=float) - t0
    if sigma == 0:
        return np.where(x > 0, -np.expm1(-np.clip(x, 0, None) / tau), 0.0)
    u = x / sigma - sigma / tau
    log_tail = sigma**2 / (2 * tau**2) - x / tau + log_ndtr(u)
    return ndtr(x / sigma) - np.exp(log_tail)


def emg_binned(edges, n, tau, sigma, t0=0.0):
    c = emg_cdf(edges, tau, sigma, t0)
    return n * np.diff(c)


def _poisson_deviance_residual(mu, k):
    mu = np.maximum(mu, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(k > 0, k * np.log(k / mu), 0.0)
    d = 2 * (mu - k + term)
    return np.sign(mu - k) * np.sqrt(np.maximum(d, 0.0))


def fit_lifetime(hist, tau_guess=None, fit_t0=True, min_events=10_000):
    """Poisson maximum-likelihood fit of an IRF-convolved exponential.

    Deviance residuals make the least-squares minimum coincide with the
    likelihood maximum, so sparse tail bins are handled correctly.
    """
    edges = np.asarray(hist.bin_edges, dtype=float)
    k = np.asarray(hist.counts, dtype=float)
    total = k.sum()
    if total < min_events:
        raise FitError(f"histogram holds {int(total)} events, need >= {min_events}")
    centers = 0.5 * (edges[1:] + edges[:-1])
    if tau_guess is None:
        tail = centers > centers[np.argmax(k)]
        tau_guess = max(np.sum(k[tail] * centers[tail]) / max(k[tail].sum(), 1)
                        - centers[np.argmax(k)], edges[1] - edges[0])
    sigma = float(hist.irf_sigma)
    names = ["n", "tau", "t0"] if fit_t0 else ["n", "tau"]

    def model(p):
        t0 = p[2] if fit_t0 else 0.0
        return emg_binned(edges, p[0], p[1], sigma, t0)

    def residual(p):
        return _poisson_deviance_residual(model(p), k)

    p0 = [total, tau_guess, 0.0][: len(names)]
    lo = [0, 1e-6 * tau_guess, -10 * (sigma + edges[1] - edges[0])][: len(names)]
    hi = [np.inf, np.inf, 10 * (sigma + edges[1] - edges[0])][: len(names)]
    p, cost, J, conv, it, msg = least_squares(residual, p0, (lo, hi))
    # Fisher information from the Pearson-weighted Jacobian of the model
    mu = np.maximum(model(p), 1e-12)
    Jm = _jacobian(model, p, model(p), np.array(lo, float), np.array(hi, float))
    cov = _covariance(Jm / np.sqrt(mu)[:, None])
    res = FitResult(names, p, cov, cost, len(k) - len(p), conv, it,
                    {"n": "events", "tau": "ns", "t0": "ns"},
                    (float(edges[0]), float(edges[-1])), msg)
    res.extra["range_warning"] = bool(edges[-1] - edges[0] < 2 * tau_guess)
    return res


# ------------------------------------------------------------------ quasi-CW

def bloch_populations(t, omega, t1, t2, delta=0.0):
    """Excited population of the optical Bloch equations from the ground state.

    Integrates d(u, v, w)/dt = M (u, v, w) + (0, 0, -1/T1) with the
    propagator exp(M t); rates in 1/ns, omega in rad/ns.
    """
    g1, g2 = 1.0 / t1, 1.0 / t2
    M = np.array([
        [-g2, -delta, 0.0, 0.0],
        [delta, -g2, -omega, 0.0],
        [0.0, omega, -g1, -g1],
        [0.0, 0.0, 0.0, 0.0],
    ])
    t = np.asarray(t, dtype=float)
    dt = np.diff(t)
    y = np.array([0.0, 0.0, -1.0, 1.0])
    out = np.empty(len(t))
    if len(t) > 2 and np.allclose(dt, dt[0], rtol=1e-9):
        step = expm(M * dt[0])
        if t[0] != 0:
            y = expm(M * t[0]) @ y
        for i in range(len(t)):
            out[i] = y[2]
            y = step @ y
    else:
        for i, ti in enumerate(t):
            out[i] = (expm(M * ti) @ y)[2]
    return 0.5 * (1 + out)


def _dominant_frequency(t, y):
    y = y - y.mean()
    n = len(y)
    pad = 8 * n
    spec = np.abs(np.fft.rfft(y * np.hanning(n), pad))
    freqs = np.fft.rfftfreq(pad, t[1] - t[0])
    spec[0] = 0
    i = int(np.argmax(spec))
    return freqs[i], spec[i] / max(np.sum(np.abs(y)), 1e-300)


def fit_quasi_cw(t, signal, sigma=None, t1=None, counts=False, t2_guess=None):
    """Fit drive and decay parameters to a quasi-CW Rabi trace.

    ``signal`` is either P_e(t) or detector counts (``counts=True`` adds a
    scale and an offset). Passing ``t1`` fixes the lifetime, as when it was
    measured separately.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(signal, dtype=float)
    if np.ptp(y) <= 1e-12 * max(1.0, np.max(np.abs(y))):
        raise FitRangeError("trace shows no oscillation")
    f, strength = _dominant_frequency(t, y)
    if f == 0 or not np.isfinite(f):
        raise FitRangeError("trace shows no oscillation")
    dt = np.median(np.diff(t))
    if 1.0 / (f * dt) < 6:
        raise AliasingError(f"only {1 / (f * dt):.1f} samples per Rabi period")
    periods = f * (t[-1] - t[0])
    if periods < 3:
        raise FitRangeError(f"trace spans {periods:.1f} periods, need >= 3")
    # the Fourier peak sits at the damped Rabi frequency, close to omega
    omega0 = 2 * np.pi * f
    free_t1 = t1 is None
    t1_0 = 16.0 if free_t1 else t1
    t2_0 = t2_guess or min(t1_0, 2 * t1_0)

    names = ["omega"] + (["t1"] if free_t1 else []) + ["t2_star"]
    p0 = [omega0] + ([t1_0] if free_t1 else []) + [t2_0]
    lo = [0.0] + ([1e-3] if free_t1 else []) + [1e-3]
    hi = [np.inf] + ([np.inf] if free_t1 else []) + [np.inf if free_t1 else 2 * t1]
    if counts:
        scale0 = np.ptp(y) / 0.5
        names += ["scale", "offset"]
        p0 += [scale0, float(y.min())]
        lo += [0.0, -np.inf]
        hi += [np.inf, np.inf]
    if sigma is None:
        s = np.sqrt(np.maximum(y, 1.0)) if counts else np.full_like(y, 1e-3)
    else:
        s = np.asarray(sigma, dtype=float) * np.ones_like(y)

    def unpack(p):
        i = 0
        om = p[i]; i += 1
        tt1 = p[i] if free_t1 else t1
        i += 1 if free_t1 else 0
        tt2 = min(p[i], 2 * tt1); i += 1
        return om, tt1, tt2, p[i:]

    def model(_, *p):
        om, tt1, tt2, rest = unpack(np.asarray(p))
        pe = bloch_populations(t, om, tt1, tt2)
        if counts:
            return rest[0] * pe + rest[1]
        return pe

    res = fit_nlls(model, t, y, s, p0, (lo, hi), names,
                   {"omega": "rad/ns", "t1": "ns", "t2_star": "ns", "scale": "counts",
                    "offset": "counts"}, absolute_sigma=sigma is not None or counts)
    res.extra["samples_per_period"] = float(1 / (f * dt))
    res.extra["t2_capped"] = bool(res["t2_star"] >= 2 * (res["t1"] if free_t1 else t1) - 1e-9)
    return res
