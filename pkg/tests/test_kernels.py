"""The compiled and numpy kernels must agree with each other and with scipy/numpy references."""

import numpy as np
import pytest
from scipy import special

from a2sbnn import kernels
from conftest import random_spd

needs_compiled = pytest.mark.skipif(kernels.compiled is None, reason="compiled kernels not built")


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("mod", [kernels.pure] + ([kernels.compiled] if kernels.compiled else []))
def test_ndtri_matches_scipy(mod):
    p = np.concatenate([np.linspace(1e-12, 1 - 1e-12, 20001), [1e-300, 1e-50, 0.5]])
    assert np.max(np.abs(mod.ndtri(p) - special.ndtri(p))) < 1e-12


@pytest.mark.parametrize("mod", [kernels.pure] + ([kernels.compiled] if kernels.compiled else []))
def test_cholesky_matches_lapack(mod):
    a = random_spd(np.random.default_rng(3), 60)
    np.testing.assert_allclose(mod.cholesky_lower(a, 0.0), np.linalg.cholesky(a), atol=1e-12)


@pytest.mark.parametrize("mod", [kernels.pure] + ([kernels.compiled] if kernels.compiled else []))
def test_cholesky_signals_failure(mod):
    assert mod.cholesky_lower(np.array([[1.0, 2.0], [2.0, 1.0]]), 0.0) is None


@needs_compiled
def test_backends_agree():
    rng = np.random.default_rng(0)
    t = rng.random(5000)
    np.testing.assert_allclose(kernels.compiled.a2_inv_generator(t, 3.0),
                               kernels.pure.a2_inv_generator(t, 3.0), rtol=0, atol=1e-15)
    pts = rng.random((200, 2))
    np.testing.assert_allclose(kernels.compiled.sq_exp_cov(pts, 1.3, 0.2),
                               kernels.pure.sq_exp_cov(pts, 1.3, 0.2), rtol=0, atol=1e-15)
    a = random_spd(rng, 100)
    np.testing.assert_allclose(kernels.compiled.cholesky_lower(a, 1e-6),
                               kernels.pure.cholesky_lower(a, 1e-6), rtol=0, atol=1e-13)
