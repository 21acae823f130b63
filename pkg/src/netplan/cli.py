"""``netplan`` command line interface."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ambiguity import MomentError, MomentInfo, shortfall_curve, threshold
from .drso import DrsoConfig, objective_f, solve_drso
from .evaluation import (DRSO_LAMBDAS, EXPERIMENT_COLUMNS, ROBUST_LAMBDAS, SWEEP_COLUMNS, SamplerConfig,
                         empirical_moments, evaluate_totals, EvaluationReport, run_experiment,
                         sample_scenarios)
from .fileio import (atomic_write, csv_text, moments_text, read_moments, read_scenarios, read_solution,
                     scenarios_text, solution_text)
from .formulations import CAPACITY_MODES, NOMINAL, SHARED, FormulationError, build_nominal, build_robust, extract_plan
from .lp import LpError, dump_lp, require_optimal, solve_lp
from .network import (DEFAULT_PENALTY, InstanceError, generate_random_instance, load_instance,
                      nobel_us_topology, parse_network, parse_sndlib_native, write_instance)
from .robust import solve_robust

log = logging.getLogger("netplan")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2


class UsageError(Exception):
    pass


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("NETPLAN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"NETPLAN_THREADS must be an integer, got {env!r}") from None
    return 1


def _load(args):
    inst = load_instance(args.instance)
    if getattr(args, "penalty", None) is not None:
        inst = inst.with_penalty(args.penalty)
    return inst


def _scenarios_for(inst, path):
    _, scen = read_scenarios(path)
    if scen.shape[1] != inst.n_commodities:
        raise UsageError(f"{path} has {scen.shape[1]} demand columns; instance has {inst.n_commodities} commodities")
    return scen


# ------------------------------------------------------------------ solve

def cmd_solve(args) -> int:
    inst = _load(args)
    arc_ids = inst.network.arc_ids
    com_ids = [c.id for c in inst.commodities]
    out = {"model": args.model, "seed": args.seed, "capacity_mode": args.capacity_mode,
           "penalty": inst.penalty}
    if args.model == "drso":
        if args.moments:
            moments = read_moments(args.moments)
        elif args.scenarios:
            moments = empirical_moments(_scenarios_for(inst, args.scenarios))
        else:
            raise UsageError("drso needs --moments or --scenarios")
        if len(moments) != inst.n_commodities:
            raise UsageError(f"{len(moments)} moment rows for {inst.n_commodities} commodities")
        cfg = DrsoConfig(capacity_mode=args.capacity_mode, backend=args.lp_backend,
                         restarts=args.restarts, adaptive=args.adaptive)
        if args.tolerance is not None:
            cfg.rel_tolerance = args.tolerance
        sol = solve_drso(inst, moments, cfg)
        plan = sol.plan
        out.update(d_tilde={c: float(v) for c, v in zip(com_ids, sol.d_tilde)},
                   nature_value=sol.nature_value,
                   stats={"iterations": sol.iterations, "f_evaluations": sol.f_evaluations,
                          "converged": sol.converged})
        objective = sol.objective
        if args.dump_lp:
            from .formulations import build_capacity_subproblem
            atomic_write(args.dump_lp, dump_lp(build_capacity_subproblem(inst, sol.d_tilde, args.capacity_mode)))
    else:
        if not args.scenarios:
            raise UsageError(f"{args.model} needs --scenarios")
        scen = _scenarios_for(inst, args.scenarios)
        if args.model == NOMINAL:
            if len(scen) != 1:
                raise UsageError("nominal needs a scenario file with exactly one scenario")
            lp = build_nominal(inst, scen[0], args.capacity_mode)
            sol = require_optimal(solve_lp(lp, args.lp_backend), "nominal model")
            plan = extract_plan(lp, sol, NOMINAL)
            stats = {"lp_iterations": sol.iterations}
        else:
            lp = build_robust(inst, scen, args.capacity_mode) if args.dump_lp else None
            plan = solve_robust(inst, scen, args.capacity_mode, args.lp_backend)
            stats = {"lp_iterations": plan.extra.get("lp_iterations", 0), "n_scenarios": len(scen)}
        if args.dump_lp:
            atomic_write(args.dump_lp, dump_lp(lp))
        objective = plan.total_objective
        out.update(d_tilde=None, stats=stats)
    out.update(x={a: plan.expansions[a] for a in arc_ids},
               capacity_cost=plan.capacity_cost,
               outsourcing_value=plan.outsourcing_value,
               objective=objective,
               capacity_added=plan.capacity_added)
    atomic_write(args.out, solution_text(out))
    print(f"{args.model}: objective {objective:.6f} (capacity {plan.capacity_cost:.6f}, "
          f"outsourcing {plan.outsourcing_value:.6f})")
    return EXIT_OK


# --------------------------------------------------------------- evaluate

REPORT_COLUMNS = ["n", "expected_os", "max_os", "cvar95", "cvar75", "expected_satisfied"]


def cmd_evaluate(args) -> int:
    inst = _load(args)
    sol = read_solution(args.solution)
    arc_ids = inst.network.arc_ids
    unknown = set(sol["x"]) - set(arc_ids)
    if unknown:
        raise UsageError(f"solution references unknown arcs: {', '.join(sorted(unknown))}")
    x = np.array([float(sol["x"].get(a, 0.0)) for a in arc_ids])
    if (x < 0).any() or not np.isfinite(x).all():
        raise UsageError("solution has negative or non-finite expansions")
    mode = args.capacity_mode or sol.get("capacity_mode") or SHARED
    ids, scen = read_scenarios(args.scenarios)
    if scen.shape[1] != inst.n_commodities:
        raise UsageError("scenario width does not match the instance")
    totals = evaluate_totals(inst, x, scen, mode, args.lp_backend, _threads(args))
    rep = EvaluationReport.from_totals(totals[:, 0], totals[:, 1])
    row = dict(n=rep.n_scenarios, **rep.metrics())
    text = csv_text(REPORT_COLUMNS, [row])
    if args.per_scenario_csv:
        per = csv_text(["scenario_id", "total_outsourced", "total_satisfied"],
                       [[sid, o, s] for sid, (o, s) in zip(ids, totals)])
        atomic_write(args.per_scenario_csv, per)
    atomic_write(args.out, text)
    print(text, end="")
    return EXIT_OK


# ------------------------------------------------------------- experiment

def cmd_experiment(args) -> int:
    inst = _load(args)
    sampler = SamplerConfig(seed=args.seed)
    cfg = DrsoConfig(capacity_mode=args.capacity_mode, backend=args.lp_backend, restarts=args.restarts)
    if args.tolerance is not None:
        cfg.rel_tolerance = args.tolerance
    res = run_experiment(inst, args.model, args.reps, args.train_n, args.eval_n, sampler, cfg,
                         args.capacity_mode, args.lp_backend, sweep=args.scale_sweep, threads=_threads(args))
    header = [f"netplan experiment seed={args.seed} model={args.model} reps={args.reps} "
              f"train_n={args.train_n} eval_n={args.eval_n} penalty={inst.penalty!r} "
              f"capacity_mode={args.capacity_mode}"]
    outputs = [(args.out, csv_text(EXPERIMENT_COLUMNS, res.rows, header))]
    if args.scale_sweep:
        sweep_path = args.sweep_out or _sweep_path(args.out)
        outputs.append((sweep_path, csv_text(SWEEP_COLUMNS, res.sweep, header)))
    for path, text in outputs:
        atomic_write(path, text)
    for row in res.rows:
        print(f"rep {row['rep']}: cap_inv={row['cap_inv']:.2f} cap_add={row['cap_add']:.2f} "
              f"E[O/S]={row['expected_os']:.2f} CVaR95={row['cvar95']:.2f}")
    return EXIT_OK


def _sweep_path(out) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + "_sweep" + (p.suffix or ".csv")))


# --------------------------------------------------------------- generate

def cmd_generate(args) -> int:
    if args.what == "instance":
        if args.sndlib:
            topo = parse_sndlib_native(Path(args.sndlib).read_text(encoding="utf-8"))
        elif args.topology == "nobel-us":
            topo = nobel_us_topology()
        else:
            topo = parse_network(Path(args.topology).read_text(encoding="utf-8"))
        inst = generate_random_instance(topo, args.commodities, args.seed, args.penalty)
        text = f"# generated by netplan {__version__}: seed={args.seed} commodities={args.commodities}\n"
        atomic_write(args.out, text + write_instance(inst))
    else:
        cfg = SamplerConfig(args.shape, args.scale, args.cap, args.seed)
        scen = sample_scenarios(cfg, args.n, args.k)
        comment = f"seed={args.seed} shape={args.shape!r} scale={args.scale!r} cap={args.cap!r}"
        atomic_write(args.out, scenarios_text(scen, comments=[comment]))
        if args.moments_out:
            atomic_write(args.moments_out, moments_text(empirical_moments(scen)))
    return EXIT_OK


# ------------------------------------------------------------ nature curve

def cmd_nature_curve(args) -> int:
    m = MomentInfo(args.mean, args.variance)
    pts = shortfall_curve(m, args.lo, args.hi, args.step)
    text = csv_text(["d_tilde", "worst_case_shortfall"], pts,
                    [f"mean={args.mean!r} variance={args.variance!r} threshold={threshold(m)!r}"])
    atomic_write(args.out, text)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netplan", description="Network capacity expansion under uncertain demand.")
    p.add_argument("--version", action="version", version=f"netplan {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, instance=True):
        if instance:
            sp.add_argument("--instance", required=True)
            sp.add_argument("--penalty", type=float, default=None, help="override the instance penalty")
        sp.add_argument("--capacity-mode", choices=CAPACITY_MODES, default=SHARED)
        sp.add_argument("--lp-backend", choices=("highs", "simplex"), default="highs")
        sp.add_argument("--threads", type=int, default=None)

    s = sub.add_parser("solve", help="solve one model")
    common(s)
    s.add_argument("--model", choices=("drso", "robust", "nominal"), required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--scenarios")
    g.add_argument("--moments")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--restarts", type=int, default=2)
    s.add_argument("--tolerance", type=float, default=None, help="relative Nelder-Mead stopping tolerance")
    s.add_argument("--adaptive", action="store_true", help="dimension-adaptive Nelder-Mead coefficients")
    s.add_argument("--dump-lp", default=None, help="write the final LP in plain text")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", help="evaluate a solution on scenarios")
    common(e)
    e.set_defaults(capacity_mode=None)
    e.add_argument("--solution", required=True)
    e.add_argument("--scenarios", required=True)
    e.add_argument("--per-scenario-csv", default=None)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", help="repeated train/solve/evaluate runs")
    common(x)
    x.add_argument("--model", choices=("drso", "robust"), required=True)
    x.add_argument("--reps", type=int, default=21)
    x.add_argument("--train-n", type=int, default=60)
    x.add_argument("--eval-n", type=int, default=5000)
    x.add_argument("--seed", type=int, required=True)
    x.add_argument("--restarts", type=int, default=2)
    x.add_argument("--tolerance", type=float, default=None)
    x.add_argument("--scale-sweep", action="store_true")
    x.add_argument("--sweep-out", default=None)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_experiment)

    gen = sub.add_parser("generate", help="generate instances or scenarios")
    gsub = gen.add_subparsers(dest="what", required=True)
    gi = gsub.add_parser("instance")
    gi.add_argument("--topology", default="nobel-us", help="'nobel-us' or a topology file")
    gi.add_argument("--sndlib", default=None, help="SNDlib native file to import instead")
    gi.add_argument("--commodities", type=int, default=20)
    gi.add_argument("--seed", type=int, required=True)
    gi.add_argument("--penalty", type=float, default=DEFAULT_PENALTY)
    gi.add_argument("--out", required=True)
    gs = gsub.add_parser("scenarios")
    gs.add_argument("--n", type=int, required=True)
    gs.add_argument("--k", type=int, required=True)
    gs.add_argument("--seed", type=int, required=True)
    gs.add_argument("--shape", type=float, default=4.0)
    gs.add_argument("--scale", type=float, default=5.0)
    gs.add_argument("--cap", type=float, default=50.0)
    gs.add_argument("--moments-out", default=None)
    gs.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_generate)

    n = sub.add_parser("nature-curve", help="tabulate the worst-case shortfall curve")
    n.add_argument("--mean", type=float, default=10.0)
    n.add_argument("--variance", type=float, default=100.0)
    n.add_argument("--lo", type=float, default=0.0)
    n.add_argument("--hi", type=float, default=40.0)
    n.add_argument("--step", type=float, default=0.5)
    n.add_argument("--out", required=True)
    n.set_defaults(func=cmd_nature_curve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LpError as exc:
        print(f"netplan: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, InstanceError, FormulationError, MomentError, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print(f"netplan: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
