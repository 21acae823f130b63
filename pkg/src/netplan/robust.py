"""Robust expansion against a finite set of demand scenarios."""

from __future__ import annotations

from .formulations import ROBUST, SHARED, PlanSolution, build_robust, extract_plan
from .lp import require_optimal, solve_lp
from .network import Instance


def solve_robust(inst: Instance, scenarios, capacity_mode: str = SHARED, backend: str = "highs") -> PlanSolution:
    """Minimize expansion cost plus the worst scenario's shortfall penalty.

    All scenario flow copies live in one LP. ``outsourcing_value`` is the
    worst-case penalty (the epigraph variable) and
    ``extra["scenario_outsourced"]`` the shortfall recorded per scenario.
    """
    lp = build_robust(inst, scenarios, capacity_mode)
    sol = require_optimal(solve_lp(lp, backend), "robust model")
    plan = extract_plan(lp, sol, ROBUST)
    plan.extra["lp_iterations"] = sol.iterations
    return plan
