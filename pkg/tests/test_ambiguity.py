import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import nature_grid_lp
from netplan.ambiguity import (MomentError, MomentInfo, multi_commodity_derivative, multi_commodity_shortfall,
                               shortfall_curve, shortfall_derivative, threshold, worst_case_distribution,
                               worst_case_shortfall)
from netplan.lp import solve_lp

M10 = MomentInfo(10.0, 100.0)

means = st.floats(1.0, 50.0)
variances = st.floats(1.0, 400.0)


def low_branch(d, m):
    return m.mean - d * m.mean * m.mean / (m.mean * m.mean + m.variance)


def high_branch(d, m):
    return 0.5 * (m.mean - d + math.sqrt((d - m.mean) ** 2 + m.variance))


@pytest.mark.parametrize("mu, var, expected", [(10, 100, 10.0), (10, 0, 5.0), (20, 100, 12.5)])
def test_threshold(mu, var, expected):
    assert threshold(MomentInfo(mu, var)) == expected


@pytest.mark.parametrize("d, expected", [(0.0, 10.0), (10.0, 5.0), (20.0, 0.5 * (-10 + math.sqrt(200)))])
def test_shortfall_values(d, expected):
    assert worst_case_shortfall(d, M10) == pytest.approx(expected, abs=1e-12)


def test_shortfall_at_twenty_rounded():
    assert round(worst_case_shortfall(20.0, M10), 6) == 2.071068


def test_derivative_values():
    assert shortfall_derivative(10.0, M10) == pytest.approx(-0.5)
    assert 0.5 * ((10.0 - 10.0) / math.sqrt(100.0) - 1.0) == pytest.approx(-0.5)
    assert shortfall_derivative(20.0, M10) == pytest.approx(0.5 * (10 / math.sqrt(200) - 1))
    assert round(shortfall_derivative(20.0, M10), 7) == -0.1464466
    assert -1e-6 < shortfall_derivative(1e6, M10) < 0.0


def test_low_branch_distribution():
    dist = worst_case_distribution(5.0, M10)
    assert (dist.lower_point, dist.upper_point) == (0.0, 20.0)
    assert (dist.lower_mass, dist.upper_mass) == (0.5, 0.5)


def test_high_branch_distribution():
    dist = worst_case_distribution(20.0, M10)
    assert dist.upper_point == pytest.approx(34.142136, abs=1e-6)
    assert dist.lower_mass == pytest.approx(0.853553, abs=1e-6)
    assert dist.lower_point == pytest.approx(5.857864, abs=1e-6)
    q, chi = dist.lower_mass, dist.upper_point
    assert dist.lower_point == pytest.approx((10.0 - (1 - q) * chi) / q, abs=1e-9)
    assert dist.expected_shortfall(20.0) == pytest.approx(2.071068, abs=1e-6)


def test_distribution_oracle_random():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        m = MomentInfo(rng.uniform(1, 50), rng.uniform(1, 400))
        d = rng.uniform(0, 3 * m.mean)
        dist = worst_case_distribution(d, m)
        assert abs(dist.expected_shortfall(d) - worst_case_shortfall(d, m)) <= 1e-9 * max(1.0, m.mean)
        assert abs(dist.mean - m.mean) <= 1e-9 * m.mean
        assert abs(dist.variance - m.variance) <= 1e-9 * m.variance
        assert min(dist.lower_mass, dist.upper_mass) >= 0.0
        assert dist.lower_point >= 0.0


def test_zero_variance_is_point_mass():
    m = MomentInfo(10.0, 0.0)
    assert worst_case_shortfall(4.0, m) == 6.0
    assert worst_case_shortfall(12.0, m) == 0.0
    with pytest.raises(MomentError):
        worst_case_distribution(4.0, m)


def test_threshold_uses_low_branch_and_branches_agree():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        m = MomentInfo(rng.uniform(1, 50), rng.uniform(1, 400))
        t = threshold(m)
        assert worst_case_shortfall(t, m) == low_branch(t, m)
        assert abs(low_branch(t, m) - high_branch(t, m)) < 1e-9 * max(1.0, m.mean)
        slope = -m.mean ** 2 / (m.mean ** 2 + m.variance)
        high_slope = 0.5 * ((t - m.mean) / math.sqrt((t - m.mean) ** 2 + m.variance) - 1.0)
        assert shortfall_derivative(t, m) == pytest.approx(slope, abs=1e-12)
        assert high_slope == pytest.approx(slope, abs=1e-9)


def test_derivative_matches_finite_differences():
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 1000:
        m = MomentInfo(rng.uniform(1, 50), rng.uniform(1, 400))
        d = rng.uniform(0, 3 * m.mean)
        if abs(d - threshold(m)) < 1e-3:
            continue
        h = 1e-5 * max(1.0, d)
        lo = max(d - h, 0.0)
        fd = (worst_case_shortfall(d + h, m) - worst_case_shortfall(lo, m)) / (d + h - lo)
        assert shortfall_derivative(d, m) == pytest.approx(fd, abs=1e-5)
        checked += 1


def test_midpoint_convexity():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        m = MomentInfo(rng.uniform(1, 50), rng.uniform(1, 400))
        a, b = rng.uniform(0, 4 * m.mean, 2)
        mid = worst_case_shortfall(0.5 * (a + b), m)
        assert mid <= 0.5 * (worst_case_shortfall(a, m) + worst_case_shortfall(b, m)) + 1e-9


@settings(max_examples=200, deadline=None)
@given(mu=means, var=variances)
def test_derivative_nondecreasing_and_value_decreasing(mu, var):
    m = MomentInfo(mu, var)
    grid = np.linspace(0, 4 * mu, 200)
    slopes = [shortfall_derivative(float(d), m) for d in grid]
    values = [worst_case_shortfall(float(d), m) for d in grid]
    assert all(b >= a - 1e-12 for a, b in zip(slopes, slopes[1:]))
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[0] == mu


@settings(max_examples=200, deadline=None)
@given(mu=means, var=variances, ratio=st.floats(0, 5))
def test_dominates_mean_shortfall(mu, var, ratio):
    m = MomentInfo(mu, var)
    d = ratio * mu
    assert worst_case_shortfall(d, m) >= max(0.0, mu - d) - 1e-12


def test_grid_lp_attains_closed_form():
    rng = np.random.default_rng(5)
    for _ in range(50):
        m = MomentInfo(rng.uniform(1, 50), rng.uniform(1, 400))
        d = rng.uniform(0, 3 * m.mean)
        chi2 = d + math.sqrt((d - m.mean) ** 2 + m.variance)
        hi = worst_case_distribution(max(d, threshold(m) + 1e-9), m)
        grid = [0.0, (m.variance + m.mean ** 2) / m.mean, hi.lower_point, chi2]
        grid += list(np.linspace(0, 2 * chi2, 200))
        value = nature_grid_lp(m.mean, m.variance, d, grid, solve_lp)
        assert value == pytest.approx(worst_case_shortfall(d, m), abs=1e-6)


def test_multi_commodity():
    assert multi_commodity_shortfall([10.0], [M10]) == worst_case_shortfall(10.0, M10)
    assert multi_commodity_shortfall([10.0, 10.0], [M10, M10]) == pytest.approx(10.0)
    ms = [MomentInfo(5, 20), MomentInfo(12, 3), M10]
    ds = [1.0, 30.0, 7.5]
    assert multi_commodity_shortfall(ds, ms) == multi_commodity_shortfall(ds[::-1], ms[::-1])
    assert multi_commodity_derivative(ds, ms) == pytest.approx([shortfall_derivative(d, m) for d, m in zip(ds, ms)])
    with pytest.raises(MomentError):
        multi_commodity_shortfall([1.0], ms)


def test_curve_from_zero_to_forty():
    curve = shortfall_curve(M10, 0.0, 40.0, 0.5)
    assert len(curve) == 81 and curve[0] == (0.0, 10.0) and curve[-1][0] == 40.0
    values = np.array([v for _, v in curve])
    assert (np.diff(values) < 0).all()
    assert (values[:-2] + values[2:] - 2 * values[1:-1] >= -1e-12).all()


@pytest.mark.parametrize("mean, var", [(0.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (float("nan"), 1.0)])
def test_moment_validation(mean, var):
    with pytest.raises(MomentError):
        MomentInfo(mean, var)


def test_negative_commitment_rejected():
    with pytest.raises(MomentError):
        worst_case_shortfall(-1.0, M10)
