import math

import numpy as np
import pytest

from epochfpa.distributions import (
    DistributionError,
    FiniteSupport,
    InverseCdf,
    Uniform,
    auction_scalars,
    from_spec,
    monopoly_reserve,
    myerson_detail,
    myerson_revenue,
    myerson_revenue_mc,
    myerson_win_prob,
    tail_quantile,
    to_spec,
    upper_tail_mean,
    win_quantile,
)
from epochfpa.rng import substream
from epochfpa.suites import brute_force_myerson

from conftest import random_finite


# -- construction and validation --------------------------------------------


def test_finite_rejects_bad_probabilities():
    with pytest.raises(DistributionError):
        FiniteSupport(((1.0, 0.5), (2.0, 0.6)))
    with pytest.raises(DistributionError):
        FiniteSupport(((1.0, 0.0), (2.0, 1.0)))


def test_finite_rejects_unordered_or_negative_values():
    with pytest.raises(DistributionError):
        FiniteSupport(((2.0, 0.5), (1.0, 0.5)))
    with pytest.raises(DistributionError):
        FiniteSupport(((-1.0, 0.5), (1.0, 0.5)))


def test_uniform_rejects_degenerate_bounds():
    with pytest.raises(DistributionError):
        Uniform(1.0, 1.0)
    with pytest.raises(DistributionError):
        Uniform(-0.5, 1.0)


def test_inverse_cdf_rejects_nonmonotone():
    with pytest.raises(DistributionError):
        InverseCdf(lambda p: 1.0 - p)


def test_spec_round_trip(uniform01, two_point):
    for dist in (uniform01, two_point):
        assert from_spec(to_spec(dist)) == dist
    with pytest.raises(DistributionError):
        from_spec({"kind": "weird"})


# -- sampling -----------------------------------------------------------------


def test_sampling_law_of_large_numbers(uniform01, two_point, point_mass):
    rng = substream(1, "lln")
    assert abs(two_point.sample_block(rng, 10**6).mean() - 1.5) < 0.01
    assert abs(uniform01.sample_block(rng, 10**6).mean() - 0.5) < 0.01
    draws = point_mass.sample_block(rng, 1000)
    assert np.all(draws == 3.0)


def test_empirical_cdf_converges(uniform01):
    rng = substream(2, "cdf")
    draws = uniform01.sample_block(rng, 200_000)
    for q in (0.1, 0.5, 0.9):
        assert abs(np.mean(draws <= q) - q) < 0.01


def test_inverse_cdf_kind_sampling_matches_uniform():
    dist = InverseCdf(lambda p: p)
    rng = substream(3, "inv")
    assert abs(dist.sample_block(rng, 50_000).mean() - 0.5) < 0.01


# -- quantiles ----------------------------------------------------------------


def test_inv_cdf_examples(uniform01, two_point):
    assert uniform01.inv_cdf(0.5) == 0.5
    assert two_point.inv_cdf(0.5) == 1.0
    assert two_point.inv_cdf(0.0) == 1.0
    assert uniform01.inv_cdf(0.0) == 0.0
    with pytest.raises(DistributionError):
        uniform01.inv_cdf(1.5)
    with pytest.raises(DistributionError):
        uniform01.inv_cdf(-0.1)


def test_tail_quantile_examples(uniform01, two_point):
    assert tail_quantile(uniform01, 2) == 0.5
    assert tail_quantile(uniform01, 4) == 0.75
    assert tail_quantile(uniform01, 1) == 0.0
    assert tail_quantile(two_point, 1) == 1.0
    with pytest.raises(DistributionError):
        tail_quantile(uniform01, 0)


def test_upper_tail_mean_examples(uniform01, two_point):
    assert upper_tail_mean(uniform01, 2) == pytest.approx(0.75, abs=1e-12)
    assert upper_tail_mean(uniform01, 4) == pytest.approx(0.875, abs=1e-12)
    assert upper_tail_mean(uniform01, 1) == pytest.approx(0.5, abs=1e-12)
    assert upper_tail_mean(two_point, 1) == pytest.approx(1.5, abs=1e-12)
    assert upper_tail_mean(uniform01, 0) == 0.0


def test_inverse_cdf_kind_matches_uniform_scalars(uniform01):
    via_icdf = InverseCdf(lambda p: p)
    for m in (1, 2, 3, 5):
        assert tail_quantile(via_icdf, m) == pytest.approx(tail_quantile(uniform01, m))
        assert upper_tail_mean(via_icdf, m) == pytest.approx(
            upper_tail_mean(uniform01, m), abs=1e-8
        )


# -- monopoly reserve ---------------------------------------------------------


def test_monopoly_reserve_examples(uniform01, two_point, point_mass):
    assert monopoly_reserve(uniform01) == pytest.approx(0.5, abs=1e-8)
    # both support prices yield revenue 1; the tie goes to the smaller price
    assert monopoly_reserve(two_point) == 1.0
    assert monopoly_reserve(point_mass) == 3.0


# -- optimal auction ----------------------------------------------------------


def test_myerson_uniform_values(uniform01):
    assert myerson_revenue(uniform01, 1) == pytest.approx(0.25, abs=1e-6)
    assert myerson_revenue(uniform01, 2) == pytest.approx(5.0 / 12.0, abs=1e-6)
    assert myerson_revenue(uniform01, 3) == pytest.approx(17.0 / 32.0, abs=1e-6)
    assert myerson_revenue(uniform01, 0) == 0.0
    assert myerson_win_prob(uniform01, 1) == pytest.approx(0.5, abs=1e-6)
    assert myerson_win_prob(uniform01, 2) == pytest.approx(3.0 / 8.0, abs=1e-6)


def test_myerson_two_point(two_point):
    detail = myerson_detail(two_point, 2)
    assert detail.reserve == 2.0
    assert detail.revenue == pytest.approx(1.5, abs=1e-12)
    assert detail.win_prob == pytest.approx(3.0 / 8.0, abs=1e-12)


def test_myerson_matches_enumeration_oracle():
    rng = substream(4, "supports")
    for k in range(12):
        dist = random_finite(rng, 2 + k % 3)
        for n in (1, 2, 3):
            reserve, revenue, win = brute_force_myerson(dist, n)
            detail = myerson_detail(dist, n)
            assert detail.reserve == reserve
            assert detail.revenue == pytest.approx(revenue, abs=1e-12)
            assert detail.win_prob == pytest.approx(win, abs=1e-12)


def test_enumeration_budget_guard(two_point):
    with pytest.raises(ValueError):
        brute_force_myerson(two_point, 3, budget=4)


def test_myerson_monte_carlo_brackets_exact(uniform01):
    est = myerson_revenue_mc(uniform01, 2, substream(5, "mc"))
    assert est.ci_halfwidth > 0
    assert abs(est.revenue - 5.0 / 12.0) < 3 * est.ci_halfwidth + 1e-3


def test_win_quantile_examples(uniform01, two_point):
    assert win_quantile(uniform01, 2) == pytest.approx(0.625, abs=1e-6)
    assert win_quantile(uniform01, 1) == pytest.approx(0.5, abs=1e-6)
    assert win_quantile(two_point, 2) == 2.0


# -- cross-scalar invariants ----------------------------------------------------


def test_quantiles_monotone_in_m():
    rng = substream(6, "mono")
    dists = [Uniform(0.0, 1.0), Uniform(0.5, 4.0)] + [
        random_finite(rng, 2 + k % 3) for k in range(6)
    ]
    for dist in dists:
        qs = [tail_quantile(dist, m) for m in range(1, 9)]
        ts = [upper_tail_mean(dist, m) for m in range(1, 9)]
        assert all(a <= b + 1e-12 for a, b in zip(qs, qs[1:]))
        assert all(a <= b + 1e-12 for a, b in zip(ts, ts[1:]))
        assert all(q <= t + 1e-12 for q, t in zip(qs, ts))


def test_scaled_tail_mean_decreasing():
    # (1/m) * upper_tail_mean is nonincreasing, and for any good/bad counts
    # with the bad count at least n/2 the good side is at least half the bad
    # side; a property of continuous priors (atoms can break it because the
    # conditional tail mean then averages over more than a 1/m mass)
    dists = [Uniform(0.0, 1.0), Uniform(0.5, 4.0), InverseCdf(lambda p: p * p)]
    n = 6
    for dist in dists:
        scaled = {m: upper_tail_mean(dist, m) / m for m in range(1, n + 1)}
        for m1 in range(1, n + 1):
            for m2 in range(m1, n + 1):
                assert scaled[m1] >= scaled[m2] - 1e-12
        for m_g in range(1, n + 1):
            for m_b in range(math.ceil(n / 2), n + 1):
                assert scaled[m_g] >= 0.5 * scaled[m_b] - 1e-12


def test_win_prob_capped_by_inverse_count():
    rng = substream(8, "cap")
    dists = [Uniform(0.0, 1.0)] + [random_finite(rng, 2 + k % 3) for k in range(6)]
    for dist in dists:
        for m in range(1, 7):
            assert myerson_win_prob(dist, m) <= 1.0 / m + 1e-9


def test_revenue_monotone_and_below_tail_mean(uniform01, two_point):
    for dist in (uniform01, two_point):
        revs = [myerson_revenue(dist, n) for n in range(0, 5)]
        assert all(a <= b + 1e-9 for a, b in zip(revs, revs[1:]))
        for n in range(1, 5):
            assert revs[n] <= upper_tail_mean(dist, n) + 1e-9


def test_expected_max_below_upper_tail_mean():
    # Monte Carlo mean of the maximum of n draws against the exact tail mean;
    # valid for continuous priors, where the tail event has mass exactly 1/n
    rng = substream(9, "maxchain")
    for dist in (Uniform(0.0, 1.0), Uniform(0.5, 4.0)):
        for n in (2, 4):
            draws = dist.sample_block(rng, (40_000, n))
            tops = draws.max(axis=1)
            mean = tops.mean()
            se = tops.std(ddof=1) / math.sqrt(len(tops))
            assert mean <= upper_tail_mean(dist, n) + 3 * se


def test_auction_scalars_bundle(uniform01):
    scalars = auction_scalars(uniform01, 2, 2)
    assert scalars.tail_quantile == 0.5
    assert scalars.upper_tail_mean == pytest.approx(0.75)
    assert scalars.win_prob == pytest.approx(0.375, abs=1e-6)
    assert scalars.win_quantile == pytest.approx(0.625, abs=1e-6)
    assert scalars.myerson_revenue == pytest.approx(5.0 / 12.0, abs=1e-6)
