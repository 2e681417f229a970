import numpy as np
import pytest

from a2sbnn import kernels


def backends():
    out = [pytest.param(kernels.pure, id="python")]
    if kernels.compiled is not None:
        out.append(pytest.param(kernels.compiled, id="cython"))
    return out


@pytest.fixture(params=backends())
def backend(request, monkeypatch):
    """Route the public API through one kernel backend."""
    mod = request.param
    for name in ("ndtri", "a2_inv_generator", "cholesky_lower", "sq_exp_cov"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return mod


def random_spd(rng, n):
    a = rng.normal(size=(n, n))
    return a @ a.T / n + np.eye(n)


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE = {}


def record(number: int, name: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE[number] = (name, ok, detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {name}: {detail}")
