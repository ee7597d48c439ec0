import time
from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from swingup.config import ExperimentConfig

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cfg():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def lossless_cfg():
    return ExperimentConfig().with_overrides(emitter={"t1": float("inf")})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance report

class _Criteria:
    def __init__(self, config):
        self.config = config

    @contextmanager
    def __call__(self, number, title, limit_s):
        """Time a criterion block; record one PASS/FAIL line for the summary."""
        detail = {}
        t0 = time.perf_counter()
        try:
            yield detail
        except BaseException as exc:
            self._record(number, title, False, time.perf_counter() - t0, limit_s, detail,
                         f"{type(exc).__name__}: {exc}".splitlines()[0])
            raise
        elapsed = time.perf_counter() - t0
        ok = elapsed < limit_s
        self._record(number, title, ok, elapsed, limit_s, detail,
                     "" if ok else "runtime over limit")
        assert ok, f"criterion {number} took {elapsed:.1f} s (limit {limit_s} s)"

    def _record(self, number, title, ok, elapsed, limit_s, detail, why):
        info = ", ".join(f"{k}={v}" for k, v in detail.items())
        line = (f"[{'PASS' if ok else 'FAIL'}] {number:2d} {title}: {info} "
                f"({elapsed:.1f} s / {limit_s} s){' - ' + why if why else ''}")
        self.config._acceptance_lines.append((number, line))


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def criterion(request):
    return _Criteria(request.config)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config._acceptance_lines)
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in lines:
            terminalreporter.write_line(line)
