import time

import numpy as np
import pytest

from tailsitter.sim import load_scenario, run_scenario
from tailsitter.vehicle import load_params

_RUNS: dict = {}
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def params():
    return load_params()


@pytest.fixture(scope="session")
def params_down():
    return load_params(frame="z_down")


def run_bundled(name: str):
    """Run a bundled scenario once per session; returns ``(scenario, log, seconds)``."""
    if name not in _RUNS:
        p = load_params()
        s = load_scenario(name, p)
        t0 = time.perf_counter()
        log = run_scenario(s, p)
        _RUNS[name] = (s, log, time.perf_counter() - t0)
    return _RUNS[name]


def record_criterion(key: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")

    def order(k):
        digits = "".join(c for c in k if c.isdigit())
        return int(digits), k

    for key in sorted(ACCEPTANCE, key=order):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} ({detail})")


def random_unit_quat(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)
