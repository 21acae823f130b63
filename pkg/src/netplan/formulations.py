"""LP formulations of the expansion models and decoding of their solutions.

Variable names follow one fixed scheme so a solution can always be decoded:
``x[arc]``, ``f[k][arc]`` (robust: ``f[k][s][arc]``), ``sat[k]`` / ``sat[k][s]``
for the routed amount, ``tau[k]`` / ``tau[k][s]`` for the shortfall and
``omega`` for the robust epigraph variable. The penalty form of the
capacity subproblem adds ``dev+[k]`` / ``dev-[k]``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lp import EQ, GE, LE, LinearProgram, LpBuilder, LpError, LpSolution, OPTIMAL
from .network import Instance

SHARED = "shared"
PER_COMMODITY = "per-commodity"
CAPACITY_MODES = (SHARED, PER_COMMODITY)

NOMINAL = "nominal"
ROBUST = "robust"
SUBPROBLEM = "subproblem"
PENALTY = "penalty"
EVALUATION = "evaluation"
MODEL_KINDS = (NOMINAL, ROBUST, SUBPROBLEM, PENALTY, EVALUATION)


class FormulationError(ValueError):
    pass


def check_scenario(inst: Instance, d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (inst.n_commodities,):
        raise FormulationError(f"scenario has {d.size} entries, instance has {inst.n_commodities} commodities")
    if not np.isfinite(d).all() or (d < 0).any():
        raise FormulationError("demands must be finite and nonnegative")
    return d


def check_uncertainty_set(inst: Instance, scenarios) -> np.ndarray:
    u = np.asarray(scenarios, dtype=float)
    if u.ndim != 2 or u.shape[0] == 0:
        raise FormulationError("uncertainty set must be a nonempty list of scenarios")
    if u.shape[1] != inst.n_commodities:
        raise FormulationError(f"scenarios have {u.shape[1]} entries, instance has {inst.n_commodities} commodities")
    if not np.isfinite(u).all() or (u < 0).any():
        raise FormulationError("demands must be finite and nonnegative")
    return u


def _check_mode(mode: str):
    if mode not in CAPACITY_MODES:
        raise FormulationError(f"capacity mode must be one of {CAPACITY_MODES}")


def _flow_block(b: LpBuilder, inst: Instance, tag: str):
    """Flow variables f[k]{tag}[arc]; returns an int array (K, |A|)."""
    arcs = inst.network.arcs
    idx = np.empty((inst.n_commodities, len(arcs)), dtype=np.int64)
    for k, com in enumerate(inst.commodities):
        for j, arc in enumerate(arcs):
            idx[k, j] = b.add_var(f"f[{com.id}]{tag}[{arc.id}]")
    return idx


def _balance_rows(b: LpBuilder, inst: Instance, flows, tag: str, routed=None, fixed=None,
                  skip_source=False, sink_slack=None):
    """Node balance rows (inflow - outflow) for every commodity.

    ``routed[k]`` is a variable index for the routed amount, or ``fixed[k]``
    a constant; the sink row equals it and the source row its negative.
    Returns (sink_rows, source_rows).
    """
    net = inst.network
    sink_rows, source_rows = [], []
    for k, com in enumerate(inst.commodities):
        for v in net.nodes:
            cols = [int(flows[k, j]) for j in net.incoming[v]] + [int(flows[k, j]) for j in net.outgoing[v]]
            coefs = [1.0] * len(net.incoming[v]) + [-1.0] * len(net.outgoing[v])
            rhs = 0.0
            name = f"bal[{com.id}]{tag}[{v}]"
            if v == com.sink:
                if routed is not None:
                    cols.append(routed[k])
                    coefs.append(-1.0)
                else:
                    rhs = fixed[k]
                if sink_slack is not None:
                    plus, minus = sink_slack[k]
                    cols += [plus, minus]
                    coefs += [-1.0, 1.0]
                sink_rows.append(b.add_row(cols, coefs, EQ, rhs, name))
            elif v == com.source:
                if skip_source:
                    continue
                if routed is not None:
                    cols.append(routed[k])
                    coefs.append(1.0)
                else:
                    rhs = -fixed[k]
                source_rows.append(b.add_row(cols, coefs, EQ, rhs, name))
            else:
                b.add_row(cols, coefs, EQ, 0.0, name)
    return np.asarray(sink_rows, dtype=np.int64), np.asarray(source_rows, dtype=np.int64)


def _capacity_rows(b: LpBuilder, inst: Instance, flows, tag: str, mode: str, x_vars=None, x_fixed=None):
    """Capacity rows; with ``x_vars`` the expansion is a variable, else a constant."""
    rows = []
    for j, arc in enumerate(inst.network.arcs):
        cap = arc.base_capacity
        if x_vars is None:
            cap += float(x_fixed[j])
        groups = [range(inst.n_commodities)] if mode == SHARED else [[k] for k in range(inst.n_commodities)]
        for g in groups:
            cols = [int(flows[k, j]) for k in g]
            coefs = [1.0] * len(cols)
            if x_vars is not None:
                cols.append(x_vars[j])
                coefs.append(-1.0)
            suffix = "" if mode == SHARED else f"[{inst.commodities[g[0]].id}]"
            rows.append(b.add_row(cols, coefs, LE, cap, f"cap{tag}[{arc.id}]{suffix}"))
    return np.asarray(rows, dtype=np.int64)


def _expansion_vars(b: LpBuilder, inst: Instance):
    return [b.add_var(f"x[{a.id}]", cost=a.expansion_cost) for a in inst.network.arcs]


def _finish(b: LpBuilder, **meta) -> LinearProgram:
    lp = b.build()
    lp.meta.update(meta)
    return lp


def build_nominal(inst: Instance, d, capacity_mode: str = SHARED) -> LinearProgram:
    """Expansion cost plus penalty for shortfall under one known demand vector."""
    d = check_scenario(inst, d)
    _check_mode(capacity_mode)
    b = LpBuilder()
    x = _expansion_vars(b, inst)
    flows = _flow_block(b, inst, "")
    sat = [b.add_var(f"sat[{c.id}]", upper=float(d[k])) for k, c in enumerate(inst.commodities)]
    tau = [b.add_var(f"tau[{c.id}]", cost=inst.penalty) for c in inst.commodities]
    _balance_rows(b, inst, flows, "", routed=sat)
    _capacity_rows(b, inst, flows, "", capacity_mode, x_vars=x)
    for k, c in enumerate(inst.commodities):
        b.add_row([tau[k], sat[k]], [1.0, 1.0], GE, float(d[k]), f"short[{c.id}]")
    return _finish(b, kind=NOMINAL)


def build_robust(inst: Instance, scenarios, capacity_mode: str = SHARED) -> LinearProgram:
    """Worst case over a finite scenario set, one flow copy per scenario."""
    u = check_uncertainty_set(inst, scenarios)
    _check_mode(capacity_mode)
    b = LpBuilder()
    x = _expansion_vars(b, inst)
    omega = b.add_var("omega", cost=1.0)
    for s, d in enumerate(u):
        tag = f"[{s}]"
        flows = _flow_block(b, inst, tag)
        sat = [b.add_var(f"sat[{c.id}][{s}]", upper=float(d[k])) for k, c in enumerate(inst.commodities)]
        tau = [b.add_var(f"tau[{c.id}][{s}]") for c in inst.commodities]
        _balance_rows(b, inst, flows, tag, routed=sat)
        _capacity_rows(b, inst, flows, tag, capacity_mode, x_vars=x)
        for k, c in enumerate(inst.commodities):
            b.add_row([tau[k], sat[k]], [1.0, 1.0], GE, float(d[k]), f"short[{c.id}][{s}]")
        b.add_row([omega] + tau, [1.0] + [-inst.penalty] * len(tau), GE, 0.0, f"epi[{s}]")
    return _finish(b, kind=ROBUST, n_scenarios=len(u))


def _check_routed(inst: Instance, d_tilde) -> np.ndarray:
    d_tilde = np.asarray(d_tilde, dtype=float)
    if d_tilde.shape != (inst.n_commodities,):
        raise FormulationError("d_tilde length does not match the commodity count")
    if not np.isfinite(d_tilde).all() or (d_tilde < 0).any():
        raise FormulationError("d_tilde must be finite and nonnegative")
    return d_tilde


def build_capacity_subproblem(inst: Instance, d_tilde, capacity_mode: str = SHARED) -> LinearProgram:
    """Cheapest expansion that routes exactly ``d_tilde[k]`` for every commodity."""
    d_tilde = _check_routed(inst, d_tilde)
    _check_mode(capacity_mode)
    b = LpBuilder()
    x = _expansion_vars(b, inst)
    flows = _flow_block(b, inst, "")
    sink_rows, source_rows = _balance_rows(b, inst, flows, "", fixed=d_tilde)
    _capacity_rows(b, inst, flows, "", capacity_mode, x_vars=x)
    return _finish(b, kind=SUBPROBLEM, sink_rows=sink_rows, source_rows=source_rows)


def build_capacity_penalty(inst: Instance, d_tilde, psi: float | None = None,
                           capacity_mode: str = SHARED) -> LinearProgram:
    """Soft version of the capacity subproblem.

    Delivery mismatch at each sink is charged ``psi`` per unit instead of
    being forbidden; the source node is left unconstrained. ``psi`` defaults
    to twice the total arc cost.
    """
    d_tilde = _check_routed(inst, d_tilde)
    _check_mode(capacity_mode)
    if psi is None:
        psi = 2.0 * float(inst.network.costs.sum())
    b = LpBuilder()
    x = _expansion_vars(b, inst)
    flows = _flow_block(b, inst, "")
    slack = [(b.add_var(f"dev+[{c.id}]", cost=psi), b.add_var(f"dev-[{c.id}]", cost=psi))
             for c in inst.commodities]
    _balance_rows(b, inst, flows, "", fixed=d_tilde, skip_source=True, sink_slack=slack)
    _capacity_rows(b, inst, flows, "", capacity_mode, x_vars=x)
    return _finish(b, kind=PENALTY, psi=psi)


def build_evaluation(inst: Instance, x, d, capacity_mode: str = SHARED) -> LinearProgram:
    """Least total shortfall for demand ``d`` on the fixed expansion ``x``."""
    d = check_scenario(inst, d)
    _check_mode(capacity_mode)
    x = np.asarray(x, dtype=float)
    if x.shape != (len(inst.network.arcs),):
        raise FormulationError("expansion vector length does not match the arc count")
    if not np.isfinite(x).all() or (x < 0).any():
        raise FormulationError("expansions must be finite and nonnegative")
    b = LpBuilder()
    flows = _flow_block(b, inst, "")
    sat = [b.add_var(f"sat[{c.id}]", upper=float(d[k])) for k, c in enumerate(inst.commodities)]
    tau = [b.add_var(f"tau[{c.id}]", cost=1.0) for c in inst.commodities]
    _balance_rows(b, inst, flows, "", routed=sat)
    cap_rows = _capacity_rows(b, inst, flows, "", capacity_mode, x_fixed=x)
    short_rows = [b.add_row([tau[k], sat[k]], [1.0, 1.0], GE, float(d[k]), f"short[{c.id}]")
                  for k, c in enumerate(inst.commodities)]
    return _finish(b, kind=EVALUATION, cap_rows=cap_rows, short_rows=np.asarray(short_rows),
                   sat_cols=np.asarray(sat), tau_cols=np.asarray(tau), mode=capacity_mode)


# ------------------------------------------------------------------ decoding

@dataclass
class PlanSolution:
    """Decoded LP solution.

    ``flows`` is keyed by (k, arc) or, for the robust model, (k, s, arc);
    ``satisfied`` and ``outsourced`` likewise by k or (k, s).
    """

    model: str
    expansions: dict[str, float]
    flows: dict[tuple, float]
    satisfied: dict
    outsourced: dict
    capacity_cost: float
    outsourcing_value: float
    total_objective: float
    extra: dict = field(default_factory=dict)

    def x_vector(self, arc_ids: Sequence[str]) -> np.ndarray:
        return np.array([self.expansions.get(a, 0.0) for a in arc_ids], dtype=float)

    @property
    def capacity_added(self) -> float:
        return float(sum(self.expansions.values()))


_NAME_RE = re.compile(r"^([A-Za-z+\-]+)((?:\[[^\[\]]*\])*)$")


def decode_name(name: str) -> tuple[str, tuple[str, ...]]:
    m = _NAME_RE.match(name)
    if not m:
        raise FormulationError(f"cannot decode variable name {name!r}")
    keys = tuple(re.findall(r"\[([^\[\]]*)\]", m.group(2)))
    return m.group(1), keys


def extract_plan(lp: LinearProgram, sol: LpSolution, model_kind: str) -> PlanSolution:
    if model_kind not in MODEL_KINDS:
        raise FormulationError(f"unknown model kind {model_kind!r}")
    if sol.status != OPTIMAL:
        raise LpError(sol.status, f"cannot extract a plan from a {sol.status} solution")
    expansions, flows, satisfied, outsourced = {}, {}, {}, {}
    capacity_cost = 0.0
    omega = None
    penalty_weight = 0.0
    deviation = 0.0
    for j, name in enumerate(lp.names):
        value = float(sol.values[j])
        prefix, keys = decode_name(name)
        if prefix == "x" and len(keys) == 1:
            expansions[keys[0]] = value
            capacity_cost += lp.cost[j] * value
        elif prefix == "f" and len(keys) in (2, 3):
            flows[keys] = value
        elif prefix == "sat" and len(keys) in (1, 2):
            satisfied[keys[0] if len(keys) == 1 else keys] = value
        elif prefix == "tau" and len(keys) in (1, 2):
            outsourced[keys[0] if len(keys) == 1 else keys] = value
            penalty_weight += lp.cost[j] * value
        elif prefix == "omega" and not keys:
            omega = value
        elif prefix in ("dev+", "dev-") and len(keys) == 1:
            deviation += lp.cost[j] * value
        else:
            raise FormulationError(f"unmapped variable {name!r}")
    extra = {}
    if model_kind == ROBUST:
        if omega is None:
            raise FormulationError("robust LP has no omega variable")
        outsourcing = omega
        per_scenario: dict[str, float] = {}
        for (k, s), v in outsourced.items():
            per_scenario[s] = per_scenario.get(s, 0.0) + v
        extra["scenario_outsourced"] = {int(s): v for s, v in per_scenario.items()}
    elif model_kind == NOMINAL:
        outsourcing = penalty_weight
    elif model_kind == EVALUATION:
        outsourcing = float(sum(outsourced.values()))
    elif model_kind == PENALTY:
        outsourcing = deviation
    else:
        outsourcing = 0.0
    return PlanSolution(model_kind, expansions, flows, satisfied, outsourced, float(capacity_cost),
                        float(outsourcing), float(sol.objective_value), extra)


def routed_amounts(inst: Instance, plan: PlanSolution) -> np.ndarray:
    """Net inflow at each commodity's sink, computed from the decoded flows."""
    net = inst.network
    out = np.zeros(inst.n_commodities)
    for k, com in enumerate(inst.commodities):
        inflow = sum(plan.flows.get((com.id, net.arcs[j].id), 0.0) for j in net.incoming[com.sink])
        outflow = sum(plan.flows.get((com.id, net.arcs[j].id), 0.0) for j in net.outgoing[com.sink])
        out[k] = inflow - outflow
    return out
