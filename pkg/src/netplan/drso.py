"""Distributionally robust capacity planning under mean/variance information.

The plan is found by minimizing over the committed amounts ``d`` the convex
function F(d) = G(d) + penalty * sum_k N_k(d_k), where G is the cheapest
expansion routing exactly ``d`` and N_k the worst-case expected shortfall.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ambiguity import MomentInfo, multi_commodity_shortfall
from .formulations import SHARED, SUBPROBLEM, PlanSolution, build_capacity_subproblem, extract_plan
from .lp import HighsSession, require_optimal, solve_lp
from .neldermead import adaptive_coefficients, nelder_mead
from .network import Instance

log = logging.getLogger(__name__)


@dataclass
class DrsoConfig:
    max_iterations: int | None = None  # None -> 5000 * K
    simplex_tolerance: float | None = None  # None -> rel_tolerance * (1 + |best|)
    rel_tolerance: float = 1e-6
    initial_point: Sequence[float] | None = None  # None -> the means
    initial_step: float = 0.25
    restarts: int = 2
    adaptive: bool = False
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    capacity_mode: str = SHARED
    backend: str = "highs"

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.simplex_tolerance is not None and not self.simplex_tolerance > 0:
            raise ValueError("simplex_tolerance must be positive")
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


@dataclass
class DrsoSolution:
    plan: PlanSolution
    d_tilde: np.ndarray
    nature_value: float
    objective: float
    iterations: int
    f_evaluations: int
    converged: bool
    history: list = field(default_factory=list)

    @property
    def capacity_cost(self) -> float:
        return self.plan.capacity_cost


class CapacityCost:
    """Repeated evaluation of G(d) on one instance.

    With the HiGHS backend one model is kept loaded and only the sink and
    source right-hand sides change between calls.
    """

    def __init__(self, inst: Instance, capacity_mode: str = SHARED, backend: str = "highs"):
        self.inst = inst
        self.capacity_mode = capacity_mode
        self.backend = backend
        self.calls = 0
        self._session = None
        if backend == "highs":
            lp = build_capacity_subproblem(inst, np.zeros(inst.n_commodities), capacity_mode)
            self._session = HighsSession(lp)
            self._sink = lp.meta["sink_rows"]
            self._source = lp.meta["source_rows"]

    def solve(self, d_tilde):
        d_tilde = np.asarray(d_tilde, dtype=float)
        self.calls += 1
        if self._session is None:
            lp = build_capacity_subproblem(self.inst, d_tilde, self.capacity_mode)
            return lp, solve_lp(lp, self.backend)
        self._session.set_rhs(self._sink, d_tilde)
        self._session.set_rhs(self._source, -d_tilde)
        return self._session.lp, self._session.solve()

    def __call__(self, d_tilde) -> float:
        _, sol = self.solve(d_tilde)
        return require_optimal(sol, "capacity subproblem").objective_value


def capacity_cost(inst: Instance, d_tilde, capacity_mode: str = SHARED, backend: str = "highs") -> float:
    lp = build_capacity_subproblem(inst, d_tilde, capacity_mode)
    return require_optimal(solve_lp(lp, backend), "capacity subproblem").objective_value


def objective_f(inst: Instance, moments: Sequence[MomentInfo], d_tilde, *,
                g: CapacityCost | None = None) -> float:
    d_tilde = np.asarray(d_tilde, dtype=float)
    g_value = g(d_tilde) if g is not None else capacity_cost(inst, d_tilde)
    return g_value + inst.penalty * multi_commodity_shortfall(d_tilde, moments)


def _initial_simplex(base: np.ndarray, scale: np.ndarray, step: float) -> np.ndarray:
    k = base.size
    pts = np.tile(base, (k + 1, 1))
    for i in range(k):
        pts[i + 1, i] += step * scale[i]
    return pts


def solve_drso(inst: Instance, moments: Sequence[MomentInfo], cfg: DrsoConfig | None = None) -> DrsoSolution:
    cfg = cfg or DrsoConfig()
    k = inst.n_commodities
    if len(moments) != k:
        raise ValueError(f"{len(moments)} moment pairs for {k} commodities")
    means = np.array([m.mean for m in moments], dtype=float)
    g = CapacityCost(inst, cfg.capacity_mode, cfg.backend)
    phi = inst.penalty

    def f(d):
        return g(d) + phi * multi_commodity_shortfall(d, moments)

    def project(p):
        return np.maximum(p, 0.0)

    if cfg.simplex_tolerance is None:
        rel = cfg.rel_tolerance
        tol = lambda best: rel * (1.0 + abs(best))  # noqa: E731
    else:
        tol = cfg.simplex_tolerance
    max_it = cfg.max_iterations if cfg.max_iterations is not None else 5000 * k
    if cfg.adaptive and k >= 2:
        coefs = adaptive_coefficients(k)
    else:
        coefs = dict(reflection=cfg.reflection, expansion=cfg.expansion,
                     contraction=cfg.contraction, shrink=cfg.shrink)

    start = means.copy() if cfg.initial_point is None else np.asarray(cfg.initial_point, dtype=float)
    if start.shape != (k,):
        raise ValueError("initial_point has the wrong length")
    best_x, best_f = None, math.inf
    iterations = nfev = 0
    converged = False
    history = []
    base = start
    for attempt in range(cfg.restarts + 1):
        simplex = _initial_simplex(project(base), means, cfg.initial_step)
        res = nelder_mead(f, simplex, tol=tol, max_iterations=max_it, project=project, **coefs)
        iterations += res.iterations
        nfev += res.nfev
        history.append((attempt, res.fun, res.iterations, res.converged))
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
        converged = res.converged
        base = best_x
    if not converged:
        log.warning("Nelder-Mead did not converge after %d restarts; returning best point (F=%.6g)",
                    cfg.restarts, best_f)

    lp, sol = g.solve(best_x)
    require_optimal(sol, "capacity subproblem")
    plan = extract_plan(lp, sol, SUBPROBLEM)
    nature = multi_commodity_shortfall(best_x, moments)
    plan.outsourcing_value = phi * nature
    plan.total_objective = plan.capacity_cost + plan.outsourcing_value
    plan.model = "drso"
    plan.satisfied = {c.id: float(v) for c, v in zip(inst.commodities, best_x)}
    return DrsoSolution(plan, best_x.copy(), nature, plan.total_objective, iterations,
                        nfev, converged, history)
