"""Demand sampling, out-of-sample evaluation, risk metrics and the experiment loop."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ambiguity import MomentInfo
from .drso import DrsoConfig, solve_drso
from .formulations import (PER_COMMODITY, SHARED, build_evaluation, check_scenario,
                           check_uncertainty_set)
from .lp import HighsSession, LpError, OPTIMAL, solve_lp
from .network import Instance
from .robust import solve_robust

log = logging.getLogger(__name__)

DRSO_LAMBDAS = [round(1.0 + 0.08 * i, 10) for i in range(11)]
ROBUST_LAMBDAS = [round(1.0 - 0.05 * i, 10) for i in range(11)]


@dataclass(frozen=True)
class SamplerConfig:
    shape: float = 4.0
    scale: float = 5.0
    cap: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0 and self.cap > 0):
            raise ValueError("shape, scale and cap must be positive")


def sample_scenarios(cfg: SamplerConfig, n: int, k: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """n x k i.i.d. gamma demands; draws above ``cfg.cap`` (or <= 0) are redrawn."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    out = rng.gamma(cfg.shape, cfg.scale, size=(n, k))
    bad = (out > cfg.cap) | (out <= 0)
    while bad.any():
        out[bad] = rng.gamma(cfg.shape, cfg.scale, size=int(bad.sum()))
        bad = (out > cfg.cap) | (out <= 0)
    return out


def empirical_moments(training) -> list[MomentInfo]:
    """Per-commodity sample mean and unbiased (n - 1) sample variance."""
    data = np.asarray(training, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("need at least two scenarios to estimate a variance")
    n = data.shape[0]
    out = []
    # fsum is correctly rounded, so the result does not depend on row order
    for col in data.T:
        mean = math.fsum(col) / n
        var = math.fsum((col - mean) ** 2) / (n - 1)
        out.append(MomentInfo(mean, var))
    return out


def cvar(values, level: float) -> float:
    """Mean of the ceil((1 - level) * n) largest values."""
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ValueError("cvar of an empty list")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    count = max(1, math.ceil(round((1.0 - level) * vals.size, 9)))
    top = np.sort(vals)[::-1][:count]
    return float(math.fsum(top) / count)


@dataclass
class EvaluationReport:
    n_scenarios: int
    expected_outsourced: float
    max_outsourced: float
    cvar95: float
    cvar75: float
    expected_satisfied: float
    outsourced: np.ndarray = field(repr=False, default=None)
    satisfied: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_totals(cls, outsourced, satisfied) -> "EvaluationReport":
        o = np.asarray(outsourced, dtype=float)
        s = np.asarray(satisfied, dtype=float)
        return cls(int(o.size), float(math.fsum(o) / o.size), float(o.max()), cvar(o, 0.95),
                   cvar(o, 0.75), float(math.fsum(s) / s.size), o, s)

    def metrics(self) -> dict[str, float]:
        return dict(expected_os=self.expected_outsourced, max_os=self.max_outsourced,
                    cvar95=self.cvar95, cvar75=self.cvar75, expected_satisfied=self.expected_satisfied)


class Evaluator:
    """Solves the shortfall-minimizing routing LP for many scenarios.

    Each solve starts cold, so a scenario's result does not depend on what
    was solved before it.
    """

    def __init__(self, inst: Instance, x, capacity_mode: str = SHARED, backend: str = "highs"):
        self.inst = inst
        self.capacity_mode = capacity_mode
        self.backend = backend
        x = np.asarray(x, dtype=float)
        self.x = x
        k = inst.n_commodities
        self._lp = build_evaluation(inst, x, np.zeros(k), capacity_mode)
        self._session = HighsSession(self._lp, fresh=True) if backend == "highs" else None

    def set_expansion(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.x.shape or (x < 0).any():
            raise ValueError("invalid expansion vector")
        self.x = x
        cap = self.inst.network.capacities + x
        if self.capacity_mode == PER_COMMODITY:
            cap = np.repeat(cap, self.inst.n_commodities)
        if self._session is not None:
            self._session.set_rhs(self._lp.meta["cap_rows"], cap)

    def solve(self, d) -> tuple[float, float]:
        """(total outsourced, total satisfied) for one scenario."""
        d = check_scenario(self.inst, d)
        if self._session is None:
            lp = build_evaluation(self.inst, self.x, d, self.capacity_mode)
            sol = solve_lp(lp, self.backend)
        else:
            meta = self._lp.meta
            self._session.set_col_bounds(meta["sat_cols"], 0.0, d)
            self._session.set_rhs(meta["short_rows"], d)
            lp = self._session.lp
            sol = self._session.solve()
        if sol.status != OPTIMAL:
            raise LpError(sol.status, f"evaluation LP: {sol.status}")
        meta = lp.meta
        outsourced = float(math.fsum(sol.values[meta["tau_cols"]]))
        satisfied = float(math.fsum(sol.values[meta["sat_cols"]]))
        return outsourced, satisfied


def _evaluate_chunk(inst, x, scenarios, capacity_mode, backend, offset):
    ev = Evaluator(inst, x, capacity_mode, backend)
    out = np.empty((len(scenarios), 2))
    for i, d in enumerate(scenarios):
        try:
            out[i] = ev.solve(d)
        except LpError as exc:
            raise LpError(exc.status, f"scenario {offset + i}: {exc}") from None
    return out


def evaluate_totals(inst: Instance, x, scenarios, capacity_mode: str = SHARED,
                    backend: str = "highs", threads: int = 1) -> np.ndarray:
    """Per-scenario (outsourced, satisfied) totals, shape (n, 2)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (len(inst.network.arcs),) or not np.isfinite(x).all() or (x < 0).any():
        raise ValueError("x must be a nonnegative vector with one entry per arc")
    u = check_uncertainty_set(inst, scenarios)
    threads = max(1, min(int(threads), len(u)))
    if threads == 1:
        return _evaluate_chunk(inst, x, u, capacity_mode, backend, 0)
    bounds = np.linspace(0, len(u), threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = [pool.submit(_evaluate_chunk, inst, x, u[lo:hi], capacity_mode, backend, lo)
                 for lo, hi in zip(bounds[:-1], bounds[1:])]
        return np.vstack([p.result() for p in parts])


def evaluate_plan(inst: Instance, x, scenarios, capacity_mode: str = SHARED,
                  backend: str = "highs", threads: int = 1) -> EvaluationReport:
    totals = evaluate_totals(inst, x, scenarios, capacity_mode, backend, threads)
    return EvaluationReport.from_totals(totals[:, 0], totals[:, 1])


def scale_sweep(inst: Instance, x, lambdas: Sequence[float], scenarios, capacity_mode: str = SHARED,
                backend: str = "highs", threads: int = 1):
    """Re-evaluate lambda * x for each factor; returns (lambda, report, scaled capacity cost)."""
    x = np.asarray(x, dtype=float)
    costs = inst.network.costs
    rows = []
    for lam in lambdas:
        if not lam >= 0:
            raise ValueError("scaling factors must be nonnegative")
        xs = lam * x
        rep = evaluate_plan(inst, xs, scenarios, capacity_mode, backend, threads)
        rows.append((float(lam), rep, float(costs @ xs)))
    return rows


# ---------------------------------------------------------------- experiment

EXPERIMENT_COLUMNS = ["rep", "model", "cap_inv", "total_objective", "in_sample_os", "nature",
                      "d_tilde_total", "expected_os", "max_os", "cvar95", "cvar75",
                      "expected_satisfied", "cap_add", "unit_cost"]
SWEEP_COLUMNS = ["rep", "model", "lambda", "cap_cost", "expected_os", "max_os", "cvar95", "cvar75",
                 "expected_satisfied"]


@dataclass
class ExperimentResult:
    rows: list[dict]
    sweep: list[dict]
    plans: list = field(default_factory=list, repr=False)


def repetition_streams(seed: int, repetitions: int):
    """Independent (training, evaluation) generators per repetition.

    They depend only on the master seed and the repetition index, so two
    models run with the same seed see the same demand samples.
    """
    children = np.random.SeedSequence(seed).spawn(repetitions)
    return [tuple(np.random.default_rng(s) for s in child.spawn(2)) for child in children]


def run_experiment(inst: Instance, model: str, repetitions: int, train_n: int = 60, eval_n: int = 5000,
                   sampler: SamplerConfig | None = None, drso_cfg: DrsoConfig | None = None,
                   capacity_mode: str = SHARED, backend: str = "highs", sweep: bool = False,
                   threads: int = 1) -> ExperimentResult:
    """Train, solve and evaluate ``repetitions`` times.

    With ``sweep`` the first repetition's plan is rescaled over the model's
    lambda grid and re-evaluated on that repetition's evaluation sample.
    """
    if model not in ("drso", "robust"):
        raise ValueError("model must be 'drso' or 'robust'")
    if repetitions < 1 or train_n < 2 or eval_n < 1:
        raise ValueError("need repetitions >= 1, train_n >= 2, eval_n >= 1")
    sampler = sampler or SamplerConfig()
    drso_cfg = drso_cfg or DrsoConfig(capacity_mode=capacity_mode, backend=backend)
    k = inst.n_commodities
    arc_ids = inst.network.arc_ids
    phi = inst.penalty
    rows, sweep_rows, plans = [], [], []
    for rep, (train_rng, eval_rng) in enumerate(repetition_streams(sampler.seed, repetitions), start=1):
        training = sample_scenarios(sampler, train_n, k, train_rng)
        evaluation = sample_scenarios(sampler, eval_n, k, eval_rng)
        if model == "robust":
            plan = solve_robust(inst, training, capacity_mode, backend)
            in_sample = plan.outsourcing_value / phi
            nature = d_total = None
            total = plan.total_objective
        else:
            sol = solve_drso(inst, empirical_moments(training), drso_cfg)
            plan = sol.plan
            in_sample = nature = sol.nature_value
            d_total = float(sol.d_tilde.sum())
            total = sol.objective
        x = plan.x_vector(arc_ids)
        report = evaluate_plan(inst, x, evaluation, capacity_mode, backend, threads)
        cap_add = float(x.sum())
        rows.append(dict(rep=rep, model=model, cap_inv=plan.capacity_cost, total_objective=total,
                         in_sample_os=in_sample, nature=nature, d_tilde_total=d_total,
                         **report.metrics(), cap_add=cap_add,
                         unit_cost=plan.capacity_cost / cap_add if cap_add > 0 else math.nan))
        plans.append(plan)
        log.info("rep %d/%d %s: cap_inv=%.2f E[O/S]=%.2f", rep, repetitions, model,
                 plan.capacity_cost, report.expected_outsourced)
        if sweep and rep == 1:
            grid = DRSO_LAMBDAS if model == "drso" else ROBUST_LAMBDAS
            for lam, rpt, cost in scale_sweep(inst, x, grid, evaluation, capacity_mode, backend, threads):
                sweep_rows.append(dict(rep=rep, model=model, **{"lambda": lam}, cap_cost=cost, **rpt.metrics()))
    return ExperimentResult(rows, sweep_rows, plans)
