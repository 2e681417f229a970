import numpy as np
import pytest
from scipy import stats as sps

from a2sbnn.errors import DegenerateInputError, DomainError
from a2sbnn.swilk import shapiro_wilk


def test_too_small():
    with pytest.raises(DomainError):
        shapiro_wilk([1.0, 2.0])


def test_too_large():
    with pytest.raises(DomainError):
        shapiro_wilk(np.arange(5001.0))


def test_constant():
    with pytest.raises(DegenerateInputError):
        shapiro_wilk([3.0] * 10)


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 11, 12, 50, 500, 5000])
def test_matches_reference_normal(n):
    x = np.random.default_rng(n).normal(size=n)
    w, p = shapiro_wilk(x)
    ref = sps.shapiro(x)
    assert w == pytest.approx(ref.statistic, abs=1e-6)
    assert p == pytest.approx(ref.pvalue, abs=1e-6)


def test_normal_sample_500():
    x = np.random.default_rng(42).normal(size=500)
    assert shapiro_wilk(x)[1] == pytest.approx(sps.shapiro(x).pvalue, abs=1e-3)


def test_exponential_rejected():
    x = np.random.default_rng(42).exponential(size=500)
    assert shapiro_wilk(x)[1] < 0.01


def test_w_in_unit_interval():
    for seed in range(20):
        w, p = shapiro_wilk(np.random.default_rng(seed).uniform(size=30))
        assert 0 < w <= 1 and 0 <= p <= 1


def test_size_and_power():
    rng = np.random.default_rng(123)
    normal_rejects = sum(shapiro_wilk(rng.normal(size=256))[1] < 0.05 for _ in range(200))
    uniform_rejects = sum(shapiro_wilk(rng.uniform(size=256))[1] < 0.05 for _ in range(200))
    assert normal_rejects <= 20
    assert uniform_rejects >= 180
