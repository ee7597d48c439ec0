import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swingup.dynamics import EmitterModel, evolve_quasi_cw
from swingup.estimators import (
    AliasingError,
    FitError,
    FitRangeError,
    FitResult,
    UndefinedVisibility,
    bloch_populations,
    damped_rabi,
    emg_cdf,
    estimate_inversion_fidelity,
    fit_damped_rabi,
    fit_lifetime,
    fit_nlls,
    fit_quasi_cw,
    least_squares,
    visibility,
)
from swingup.photonstats import synthesize_decay_histogram


def line(x, a, b):
    return a * x + b


# ---------------------------------------------------------------- generic engine

def test_exact_data_returns_truth():
    x = np.linspace(0, 5, 30)
    f = lambda x, a, k: a * np.exp(-k * x)
    r = fit_nlls(f, x, f(x, 3.0, 0.7), 1.0, [3.0, 0.7])
    assert r.converged and r.chi2 < 1e-20
    assert np.allclose(r.values, [3.0, 0.7])


def test_linear_fit_matches_ols_formula():
    rng = np.random.default_rng(0)
    x = np.linspace(-2, 3, 60)
    sigma = 0.1 + 0.05 * np.abs(x)
    y = line(x, 1.7, -0.4) + rng.normal(0, sigma)
    r = fit_nlls(line, x, y, sigma, [0.0, 0.0], names=["a", "b"])
    X = np.column_stack([x, np.ones_like(x)]) / sigma[:, None]
    cov = np.linalg.inv(X.T @ X)
    beta = cov @ X.T @ (y / sigma)
    assert np.allclose(r.values, beta, rtol=1e-8, atol=1e-10)
    assert np.allclose(r.covariance, cov, rtol=0.05)
    assert abs(r["a"] - 1.7) < 3 * r.error("a") and abs(r["b"] + 0.4) < 3 * r.error("b")
    assert np.allclose(r.covariance, r.covariance.T)
    assert np.linalg.eigvalsh(r.covariance).min() >= 0
    assert r.reduced_chi2 >= 0


def test_rejects_bad_inputs():
    x = np.arange(5.0)
    with pytest.raises(FitError):
        fit_nlls(line, x, x, np.zeros(5), [1, 0])
    with pytest.raises(FitError):
        fit_nlls(line, x, x[:4], 1.0, [1, 0])
    with pytest.raises(FitError):
        fit_nlls(line, x[:1], x[:1], 1.0, [1, 0])


def test_converged_gradient_vanishes():
    rng = np.random.default_rng(1)
    x = np.linspace(0, 4, 80)
    f = lambda x, a, k, c: a * np.exp(-k * x) + c
    y = f(x, 2.0, 1.3, 0.2) + rng.normal(0, 0.01, len(x))
    r = fit_nlls(f, x, y, 0.01, [1.0, 1.0, 0.0])
    assert r.converged

    def cost(p):
        return np.sum(((f(x, *p) - y) / 0.01) ** 2)

    # central differences of the cost, scaled like the residual gradient
    g = np.array([(cost(r.values + e) - cost(r.values - e)) / (2 * e.sum())
                  for e in np.eye(3) * 1e-6])
    scale = np.sqrt(cost(r.values) * np.trace(np.linalg.inv(r.covariance)))
    assert np.linalg.norm(g) / scale < 1e-6


def test_non_convergence_is_flagged():
    r = least_squares(lambda p: np.array([np.exp(p[0]), 1.0]), [50.0], max_iter=2)
    assert not r[3]


def test_fit_result_json_round_trip():
    x = np.linspace(0, 1, 10)
    r = fit_nlls(line, x, 2 * x, 0.1, [1, 1], names=["a", "b"], units={"a": "u"})
    d = json.loads(r.to_json())
    r2 = FitResult.from_dict(d)
    assert r2.names == r.names and np.allclose(r2.values, r.values)
    assert "reduced chi2" in r.report()


# ---------------------------------------------------------------- damped Rabi

TRUTH = dict(amp=2e5, kappa=21.97, a_d=3.0, c=5e3, b=500.0)


def rabi_data(seed, truth=TRUTH, n=141, a_max=7 * np.pi / 21.97, noise=True):
    a = np.linspace(0, a_max, n)
    mu = damped_rabi(a, *truth.values())
    y = np.random.default_rng(seed).poisson(mu).astype(float) if noise else mu
    return a, y


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_rabi_recovery(seed):
    r = fit_damped_rabi(*rabi_data(seed))
    assert r.converged
    for k, v in TRUTH.items():
        assert r[k] == pytest.approx(v, rel=0.05), k


def test_pure_rabi_kappa():
    truth = dict(amp=1e4, kappa=21.97, a_d=1e9, c=0.0, b=0.0)
    r = fit_damped_rabi(*rabi_data(0, truth, noise=False), sigma=1.0)
    assert r["kappa"] == pytest.approx(21.97, rel=1e-3)


def test_trimming_keeps_kappa():
    a, y = rabi_data(3)
    # corrupt the high-amplitude end as a saturating background would
    y = y.copy()
    y[-15:] += 0.004 * np.arange(1, 16) ** 4 * 10
    full = fit_damped_rabi(a, y)
    trimmed = fit_damped_rabi(a, y, trim=True)
    assert trimmed.extra["n_used"] < len(a)
    assert trimmed.reduced_chi2 < full.reduced_chi2
    assert abs(trimmed["kappa"] - TRUTH["kappa"]) < 3 * trimmed.error("kappa") + 0.01


def test_rabi_needs_an_extremum():
    a = np.linspace(0, 0.05, 20)
    with pytest.raises(FitRangeError):
        fit_damped_rabi(a, 1 + a)
    with pytest.raises(FitRangeError):
        fit_damped_rabi(a[:5], np.sin(a[:5]))


def _fake_fit(kappa, a_d, converged=True):
    return FitResult(["amp", "kappa", "a_d", "c", "b"], np.array([1.0, kappa, a_d, 0, 0]),
                     np.diag([1.0, 1e-4, 1e-4, 1.0, 1.0]), 1.0, 10, converged)


def test_fidelity_limits():
    f, _ = estimate_inversion_fidelity(_fake_fit(21.97, 1e12))
    assert f == pytest.approx(1.0, abs=1e-9)
    f, e = estimate_inversion_fidelity(_fake_fit(21.97, np.pi / 21.97))
    assert f == pytest.approx(np.exp(-1))
    assert e > 0
    with pytest.raises(FitError):
        estimate_inversion_fidelity(_fake_fit(21.97, 3.0, converged=False))


def test_fidelity_round_trip():
    a_pi = np.pi / TRUTH["kappa"]
    truth = dict(TRUTH, a_d=-a_pi / np.log(0.98))
    fs = [estimate_inversion_fidelity(fit_damped_rabi(*rabi_data(s, truth))) for s in range(6)]
    vals = np.array([f for f, _ in fs])
    errs = np.array([e for _, e in fs])
    assert np.all(np.abs(vals - 0.98) < 3 * errs)
    # the propagated error describes the seed-to-seed scatter
    assert np.std(vals) < 3 * np.mean(errs)


@settings(max_examples=8)
@given(st.floats(1e-2, 1e3))
def test_fidelity_invariant_under_count_scaling(scale):
    a, y = rabi_data(0, noise=False)
    f1, _ = estimate_inversion_fidelity(fit_damped_rabi(a, y))
    f2, _ = estimate_inversion_fidelity(fit_damped_rabi(a, scale * y))
    assert f2 == pytest.approx(f1, rel=1e-6)


def test_visibility():
    assert visibility(46, 1) == 46
    assert visibility(1.38, 1) == pytest.approx(1.38)
    assert visibility(7, 7) == 1
    with pytest.raises(UndefinedVisibility):
        visibility(3, 0)


# ---------------------------------------------------------------- lifetime

def test_emg_limits():
    t = np.linspace(-1, 50, 200)
    assert np.allclose(emg_cdf(t, 16.2, 0.0), np.where(t > 0, 1 - np.exp(-t / 16.2), 0))
    assert np.allclose(emg_cdf(t, 16.2, 1e-6), emg_cdf(t, 16.2, 0.0), atol=1e-6)
    # large positive times: the IRF only delays by its mean (zero)
    assert emg_cdf(np.array([200.0]), 16.2, 0.35)[0] == pytest.approx(1, abs=1e-5)


def test_lifetime_round_trip():
    h = synthesize_decay_histogram(16.2, 0.35, 1_000_000, 0.1, seed=7)
    r = fit_lifetime(h)
    assert r.converged
    assert r["tau"] == pytest.approx(16.2, rel=0.02)
    assert abs(r["tau"] - 16.2) < 4 * r.error("tau")
    assert not r.extra["range_warning"]


def test_lifetime_zero_irf():
    h = synthesize_decay_histogram(16.2, 0.0, 200_000, 0.1, seed=2)
    r = fit_lifetime(h, fit_t0=False)
    assert r["tau"] == pytest.approx(16.2, rel=0.02)


def test_lifetime_seed_consistency():
    r1 = fit_lifetime(synthesize_decay_histogram(16.2, 0.35, 100_000, 0.1, seed=1))
    r2 = fit_lifetime(synthesize_decay_histogram(16.2, 0.35, 100_000, 0.1, seed=2))
    assert abs(r1["tau"] - r2["tau"]) < 3 * np.hypot(r1.error("tau"), r2.error("tau"))


def test_lifetime_guards():
    with pytest.raises(FitError):
        fit_lifetime(synthesize_decay_histogram(16.2, 0.35, 500, 0.1, seed=1))
    h = synthesize_decay_histogram(16.2, 0.35, 20_000, 0.1, seed=1, t_max=20.0)
    assert fit_lifetime(h, tau_guess=16.2).extra["range_warning"]


# ---------------------------------------------------------------- quasi-CW

def test_bloch_equations_match_master_equation():
    m = EmitterModel.two_level(16.2, 10.9)
    tr = evolve_quasi_cw(m, 2.0, 40.0, n_samples=401, rel_tol=1e-10, abs_tol=1e-12)
    pe = bloch_populations(tr.times, 2.0, 16.2, 10.9)
    assert np.max(np.abs(pe - tr.states[:, 1, 1].real)) < 1e-7


@pytest.mark.parametrize("seed", [0, 1])
def test_quasi_cw_round_trip(seed):
    m = EmitterModel.two_level(16.2, 10.9)
    omega = 2 * np.pi * 5 / 40  # about five visible periods
    tr = evolve_quasi_cw(m, omega, 40.0, n_samples=401, rel_tol=1e-10, abs_tol=1e-12)
    mu = 1e4 * tr.states[:, 1, 1].real + 20
    y = np.random.default_rng(seed).poisson(mu).astype(float)
    r = fit_quasi_cw(tr.times, y, counts=True, t1=16.2)
    assert r["t2_star"] == pytest.approx(10.9, rel=0.05)
    assert r["omega"] == pytest.approx(omega, rel=0.01)


def test_quasi_cw_lifetime_limited():
    m = EmitterModel.two_level(16.2)
    tr = evolve_quasi_cw(m, 1.0, 60.0, n_samples=601)
    r = fit_quasi_cw(tr.times, tr.states[:, 1, 1].real, t1=16.2, t2_guess=20.0)
    assert r["t2_star"] == pytest.approx(32.4, rel=0.05)
    assert r["t2_star"] <= 32.4 + 1e-9


def test_quasi_cw_rejections():
    t = np.linspace(0, 40, 401)
    with pytest.raises(FitRangeError):
        fit_quasi_cw(t, np.zeros_like(t))
    m = EmitterModel.two_level(16.2, 10.9)
    tr = evolve_quasi_cw(m, 2 * np.pi / 0.5, 40.0, n_samples=161)  # 2 samples per period
    with pytest.raises(AliasingError):
        fit_quasi_cw(tr.times, tr.states[:, 1, 1].real)
