import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from conftest import random_instance, single_arc
from netplan.evaluation import (DRSO_LAMBDAS, ROBUST_LAMBDAS, EvaluationReport, SamplerConfig, cvar,
                                empirical_moments, evaluate_plan, evaluate_totals, run_experiment, sample_scenarios,
                                scale_sweep)
from netplan.drso import DrsoConfig


def truncated_gamma_mean(shape=4.0, scale=5.0, cap=50.0):
    dist = stats.gamma(shape, scale=scale)
    num, _ = integrate.quad(lambda t: t * dist.pdf(t), 0, cap)
    return num / dist.cdf(cap)


def test_truncated_mean_oracle():
    # E[X; X <= c] = shape * scale * F_{shape+1}(c) for a gamma law
    closed = 4 * 5 * stats.gamma(5, scale=5).cdf(50) / stats.gamma(4, scale=5).cdf(50)
    assert truncated_gamma_mean() == pytest.approx(closed, rel=1e-10)
    assert round(closed, 4) == 19.6177


def test_sampler_range_and_mean():
    draws = sample_scenarios(SamplerConfig(seed=0), 10_000, 1)
    assert draws.shape == (10_000, 1)
    assert ((draws > 0) & (draws <= 50)).all()
    assert abs(draws.mean() - truncated_gamma_mean()) <= 0.3


def test_sampler_deterministic():
    cfg = SamplerConfig(seed=12)
    assert np.array_equal(sample_scenarios(cfg, 60, 20), sample_scenarios(cfg, 60, 20))
    assert not np.array_equal(sample_scenarios(cfg, 60, 20), sample_scenarios(SamplerConfig(seed=13), 60, 20))


def test_sampler_truncation_with_low_cap():
    draws = sample_scenarios(SamplerConfig(cap=5.0, seed=1), 2000, 3)
    assert (draws <= 5.0).all() and (draws > 0).all()


def test_empirical_moments():
    (m,) = empirical_moments([[4.0], [6.0]])
    assert (m.mean, m.variance) == (5.0, 2.0)
    (c,) = empirical_moments([[3.0], [3.0], [3.0]])
    assert c.variance == 0.0
    data = np.random.default_rng(0).uniform(0, 50, (30, 4))
    assert empirical_moments(data) == empirical_moments(data[::-1])
    with pytest.raises(ValueError):
        empirical_moments([[1.0]])


def test_cvar_examples():
    assert cvar(np.arange(1, 101), 0.95) == 98.0
    assert cvar([7.5] * 13, 0.75) == 7.5
    assert cvar([1, 2, 3, 4], 0.75) == 4.0
    assert cvar([3, 1, 2], 1e-12) == pytest.approx(2.0)
    assert cvar([3, 1, 2], 0.9) == 3.0
    with pytest.raises(ValueError):
        cvar([], 0.9)
    with pytest.raises(ValueError):
        cvar([1.0], 1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1000), min_size=1, max_size=200))
def test_report_metric_ordering(values):
    rep = EvaluationReport.from_totals(values, values)
    tol = 1e-9 * (1 + rep.max_outsourced)
    assert rep.max_outsourced + tol >= rep.cvar95 >= rep.cvar75 - tol
    assert rep.cvar75 + tol >= rep.expected_outsourced >= -tol


def test_hand_three_scenarios():
    inst = single_arc(u=4, c=1)
    rep = evaluate_plan(inst, [0.0], [[2.0], [5.0], [9.0]])
    assert list(rep.outsourced) == pytest.approx([0.0, 1.0, 5.0])
    assert rep.expected_outsourced == pytest.approx(2.0)
    assert rep.max_outsourced == pytest.approx(5.0)
    assert list(rep.satisfied) == pytest.approx([2.0, 4.0, 4.0])
    # same thing with base capacity folded into the expansion
    rep2 = evaluate_plan(single_arc(u=0, c=1), [4.0], [[2.0], [5.0], [9.0]])
    assert rep2.metrics() == pytest.approx(rep.metrics())


def test_uncongested_and_empty_networks(rng):
    inst = random_instance(rng, u_max=0.0)
    scen = sample_scenarios(SamplerConfig(seed=2), 20, inst.n_commodities)
    big = np.full(len(inst.network.arcs), 1e4)
    rep = evaluate_plan(inst, big, scen)
    assert rep.expected_outsourced == pytest.approx(0.0, abs=1e-7)
    assert rep.cvar95 == pytest.approx(0.0, abs=1e-7)
    assert rep.expected_satisfied == pytest.approx(scen.sum(axis=1).mean())
    rep0 = evaluate_plan(inst, np.zeros(len(inst.network.arcs)), scen)
    assert rep0.expected_outsourced == pytest.approx(scen.sum(axis=1).mean())
    assert rep0.expected_satisfied == pytest.approx(0.0, abs=1e-9)


def test_order_invariance_and_threads(rng):
    inst = random_instance(rng, k=3)
    scen = sample_scenarios(SamplerConfig(seed=3), 60, 3)
    x = rng.uniform(0, 15, len(inst.network.arcs))
    totals = evaluate_totals(inst, x, scen)
    perm = rng.permutation(60)
    assert np.array_equal(evaluate_totals(inst, x, scen[perm]), totals[perm])
    assert np.array_equal(evaluate_totals(inst, x, scen, threads=3), totals)
    assert evaluate_plan(inst, x, scen[perm]).metrics() == evaluate_plan(inst, x, scen).metrics()


def test_backends_agree_on_evaluation(rng):
    inst = random_instance(rng, n_nodes=4, k=2)
    scen = sample_scenarios(SamplerConfig(seed=4), 10, 2)
    x = rng.uniform(0, 10, len(inst.network.arcs))
    a = evaluate_totals(inst, x, scen)
    b = evaluate_totals(inst, x, scen, backend="simplex")
    assert b == pytest.approx(a, abs=1e-7)


def test_sweep_identity_zero_and_monotone(rng):
    inst = random_instance(rng, k=3, u_max=0.0)
    scen = sample_scenarios(SamplerConfig(seed=5), 40, 3)
    x = rng.uniform(0, 20, len(inst.network.arcs))
    rows = scale_sweep(inst, x, [0.0] + DRSO_LAMBDAS, scen)
    assert rows[1][1].metrics() == evaluate_plan(inst, x, scen).metrics()
    assert rows[0][1].expected_outsourced == pytest.approx(scen.sum(axis=1).mean())
    assert rows[1][2] == pytest.approx(float(inst.network.costs @ x))
    values = [r[1].expected_outsourced for r in rows]
    assert all(b <= a + 1e-6 for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        scale_sweep(inst, x, [-0.5], scen)


def test_lambda_grids():
    assert len(DRSO_LAMBDAS) == 11 and DRSO_LAMBDAS[0] == 1.0 and DRSO_LAMBDAS[-1] == 1.8
    assert len(ROBUST_LAMBDAS) == 11 and ROBUST_LAMBDAS[0] == 1.0 and ROBUST_LAMBDAS[-1] == 0.5
    assert np.diff(DRSO_LAMBDAS) == pytest.approx([0.08] * 10)
    assert np.diff(ROBUST_LAMBDAS) == pytest.approx([-0.05] * 10)


def test_experiment_row_composes_components(rng):
    inst = random_instance(rng, k=2)
    res = run_experiment(inst, "robust", 1, train_n=5, eval_n=1, sampler=SamplerConfig(seed=6))
    (row,) = res.rows
    plan = res.plans[0]
    assert row["cap_inv"] == pytest.approx(plan.capacity_cost)
    assert row["in_sample_os"] == pytest.approx(plan.outsourcing_value / inst.penalty)
    assert row["expected_os"] == row["max_os"] == row["cvar95"] == row["cvar75"]
    assert row["cap_add"] == pytest.approx(plan.capacity_added)
    if row["cap_add"] > 0:
        assert row["unit_cost"] == pytest.approx(row["cap_inv"] / row["cap_add"])


def test_experiment_deterministic_and_model_independent_samples(rng):
    inst = random_instance(rng, k=2)
    cfg = SamplerConfig(seed=7)
    a = run_experiment(inst, "drso", 2, train_n=10, eval_n=20, sampler=cfg, sweep=True)
    b = run_experiment(inst, "drso", 2, train_n=10, eval_n=20, sampler=cfg, sweep=True)
    assert a.rows == b.rows and a.sweep == b.sweep
    assert len(a.sweep) == 11
    for row in a.rows:
        assert row["nature"] == row["in_sample_os"]
        assert row["total_objective"] == pytest.approx(row["cap_inv"] + inst.penalty * row["nature"])
    r = run_experiment(inst, "robust", 2, train_n=10, eval_n=20, sampler=cfg, sweep=True)
    assert len(r.sweep) == 11
    assert [s["lambda"] for s in r.sweep] == ROBUST_LAMBDAS


def test_experiment_validation(rng):
    inst = random_instance(rng)
    with pytest.raises(ValueError):
        run_experiment(inst, "stochastic", 1)
    with pytest.raises(ValueError):
        run_experiment(inst, "drso", 1, train_n=1)


def test_nonconverged_drso_still_evaluates(rng):
    inst = random_instance(rng, k=2)
    res = run_experiment(inst, "drso", 1, train_n=10, eval_n=5, sampler=SamplerConfig(seed=1),
                         drso_cfg=DrsoConfig(max_iterations=2, restarts=0))
    assert math.isfinite(res.rows[0]["expected_os"])
