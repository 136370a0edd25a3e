"""Tests for the normal CDF/quantile, mid-rank empirical CDF and closed-form W2."""

import math

import numpy as np
import pytest
import sympy

from ggrpo_lab.core.errors import DomainError
from ggrpo_lab.core.models import SortedSample
from ggrpo_lab.core.quantiles import (
    empirical_cdf,
    normal_cdf,
    normal_quantile,
    normal_quantiles,
    rank_quantiles,
    wasserstein2_to_normal,
)


def oracle_quantile(p: sympy.Rational) -> float:
    """Phi^-1(p) = sqrt(2) * erfinv(2p - 1) evaluated at 40 digits."""
    return float((sympy.sqrt(2) * sympy.erfinv(2 * p - 1)).evalf(40))


def test_normal_cdf_examples():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)
    assert normal_cdf(-1.959964) == pytest.approx(0.025, abs=1e-6)


def test_normal_cdf_rejects_non_finite():
    with pytest.raises(DomainError):
        normal_cdf(float("nan"))
    with pytest.raises(DomainError):
        normal_cdf(float("inf"))


def test_normal_quantile_examples():
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.875) == pytest.approx(1.150349, abs=1e-5)
    assert normal_quantile(0.125) == pytest.approx(-1.150349, abs=1e-5)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_normal_quantile_domain(p):
    with pytest.raises(DomainError):
        normal_quantile(p)


def test_normal_quantile_exact_antisymmetry():
    for k in range(1, 64):
        p = k / 64
        assert normal_quantile(1 - p) == -normal_quantile(p)


def test_normal_quantile_against_high_precision_oracle():
    for k in range(1, 200):
        p = sympy.Rational(k, 200)
        assert normal_quantile(k / 200) == pytest.approx(oracle_quantile(p), abs=1e-12)


def test_normal_quantile_round_trips_through_cdf():
    for p in np.linspace(0.001, 0.999, 101):
        assert normal_cdf(normal_quantile(p)) == pytest.approx(p, abs=1e-12)


def test_normal_quantile_round_trips_into_the_tails():
    rng = np.random.default_rng(2024)
    for p in rng.uniform(1e-6, 1 - 1e-6, size=1000):
        assert abs(normal_cdf(normal_quantile(p)) - p) <= 1e-10
    for p in (1e-6, 1e-5, 1 - 1e-5, 1 - 1e-6):
        assert abs(normal_cdf(normal_quantile(p)) - p) <= 1e-10


def test_normal_quantile_strictly_increasing():
    p = np.concatenate([[1e-9, 1e-6], np.linspace(1e-4, 1 - 1e-4, 2001), [1 - 1e-6]])
    q = [normal_quantile(x) for x in p]
    assert all(b > a for a, b in zip(q, q[1:]))


def test_normal_quantiles_matches_scalar():
    ps = [0.01, 0.2, 0.5, 0.7, 0.999]
    np.testing.assert_array_equal(normal_quantiles(ps), [normal_quantile(p) for p in ps])


def test_normal_quantiles_domain():
    with pytest.raises(DomainError):
        normal_quantiles([0.5, 1.0])


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7, 64, 1025])
def test_rank_quantiles_symmetry(n):
    q = rank_quantiles(n)
    assert q.size == n
    np.testing.assert_array_equal(q, -q[::-1])
    assert np.all(np.diff(q) > 0) or n == 1
    if n % 2:
        assert q[n // 2] == 0.0


def test_rank_quantiles_oracle():
    for n in (2, 5, 16, 33):
        expected = [oracle_quantile(sympy.Rational(2 * i - 1, 2 * n)) for i in range(1, n + 1)]
        np.testing.assert_allclose(rank_quantiles(n), expected, rtol=0, atol=1e-12)


def test_rank_quantiles_needs_a_rank():
    with pytest.raises(DomainError):
        rank_quantiles(0)


def test_empirical_cdf_examples():
    assert empirical_cdf(SortedSample(values=[1, 2, 3, 4]), 3) == 0.625
    assert empirical_cdf(SortedSample(values=[5]), 5) == 0.5


def test_empirical_cdf_mid_ranks_ties():
    # Two tied zeros at the bottom of four values: (0 + 0.5 * 2) / 4
    assert empirical_cdf(SortedSample(values=[0, 0, 1, 1]), 0) == 0.25
    assert empirical_cdf(SortedSample(values=[0, 0, 1, 1]), 1) == 0.75


def test_empirical_cdf_between_and_outside_support():
    sample = SortedSample(values=[1, 2, 3, 4])
    assert empirical_cdf(sample, 2.5) == 0.5
    assert empirical_cdf(sample, -10) == 0.0
    assert empirical_cdf(sample, 10) == 1.0


def test_empirical_cdf_empty():
    with pytest.raises(DomainError):
        empirical_cdf(SortedSample(values=[]), 0.0)


def test_sorted_sample_rejects_unsorted_and_non_finite():
    with pytest.raises(ValueError):
        SortedSample(values=[2, 1])
    with pytest.raises(ValueError):
        SortedSample(values=[0, float("nan")])
    assert SortedSample.of([3, 1, 2]).values == [1, 2, 3]


def test_w2_zero_for_target_quantiles():
    sample = SortedSample(values=rank_quantiles(4).tolist())
    assert wasserstein2_to_normal(sample) == pytest.approx(0.0, abs=1e-10)


def test_w2_of_constant_sample():
    q = rank_quantiles(4)
    expected = math.sqrt(float(np.mean(q * q)))
    result = wasserstein2_to_normal(SortedSample(values=[0, 0, 0, 0]))
    assert result == pytest.approx(expected, abs=1e-12)
    assert result == pytest.approx(0.844, abs=1e-3)


def test_w2_shift_is_continuous_and_non_negative():
    base = rank_quantiles(8)
    previous = None
    for c in np.linspace(-1, 1, 41):
        d = wasserstein2_to_normal(SortedSample(values=(base + c).tolist()))
        assert d >= 0.0
        # Shifting matched quantiles by c moves every point by exactly |c|
        assert d == pytest.approx(abs(c), abs=1e-12)
        if previous is not None:
            assert abs(d - previous) <= 0.05 + 1e-12
        previous = d


def test_w2_of_normal_draws_shrinks_with_sample_size():
    def mean_w2(n):
        distances = [
            wasserstein2_to_normal(SortedSample.of(np.random.default_rng(seed).standard_normal(n)))
            for seed in range(20)
        ]
        return float(np.mean(distances))

    assert mean_w2(1024) < mean_w2(64)


def test_w2_empty():
    with pytest.raises(DomainError):
        wasserstein2_to_normal(SortedSample(values=[]))


def test_w2_matches_pot():
    ot = pytest.importorskip("ot")
    rng = np.random.default_rng(3)
    values = np.sort(rng.normal(0.3, 1.7, size=50))
    q = rank_quantiles(values.size)
    expected = math.sqrt(ot.wasserstein_1d(values, q, p=2))
    assert wasserstein2_to_normal(SortedSample(values=values.tolist())) == pytest.approx(
        expected, rel=1e-9
    )
