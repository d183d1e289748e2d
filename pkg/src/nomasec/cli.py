"""Command-line front end: generate, solve, experiment, compare.

Exit codes: 0 success, 1 usage error, 2 data/schema error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .asm import AsmOptions, run, run_baseline_sic_eve
from .dc_power import SubproblemError
from .experiments import ExperimentSpec, compare, run_experiment
from .network import (NetworkConfig, NetworkInstance, SchemaError, generate,
                      load, save)
from .polyblock import UnsupportedConfigError, solve_global
from .robust import solve_robust

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _build_parser() -> _Parser:
    p = _Parser(prog="nomasec",
                description="Secure PD-NOMA resource allocation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a network instance file")
    g.add_argument("--config", help="JSON file of NetworkConfig fields")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=None)

    s = sub.add_parser("solve", help="solve one instance file")
    s.add_argument("instance")
    s.add_argument("--solver", default="asm",
                   choices=["asm", "asm_baseline_sic", "uniform", "robust",
                            "polyblock"])
    s.add_argument("--theta", type=float, default=None)
    s.add_argument("--max-iters", type=int, default=50)
    s.add_argument("--budget", type=int, default=None,
                   help="assignment-search evaluation budget per iteration")
    s.add_argument("--epsilon", type=float, default=None,
                   help="override the CSI error bound of the instance")
    s.add_argument("--gains", default="true",
                   choices=["true", "est", "worst_case"])
    s.add_argument("--eta", type=float, default=1e-2,
                   help="certified gap for the global solver")
    s.add_argument("--out", default=None, help="write a JSON report here")

    e = sub.add_parser("experiment", help="run a sweep described by a spec")
    e.add_argument("spec")

    c = sub.add_parser("compare", help="paired gap table of two detail CSVs")
    c.add_argument("csv_a")
    c.add_argument("csv_b")
    c.add_argument("--solver-a", default=None)
    c.add_argument("--solver-b", default=None)
    c.add_argument("--out", default=None)
    return p


def _load_config(path, seed) -> NetworkConfig:
    doc = {}
    if path:
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError("file", f"not valid JSON: {exc}") from exc
    cfg = NetworkConfig.from_dict(doc)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def _override_epsilon(inst: NetworkInstance, eps: float) -> NetworkInstance:
    cfg = dataclasses.replace(inst.config, epsilon=eps)
    return NetworkInstance(
        config=cfg, g_user=inst.g_user, g_eave_true=inst.g_eave_true,
        g_eave_est=inst.g_eave_est, serving=inst.serving,
        pos_bs=inst.pos_bs, pos_user=inst.pos_user, pos_eave=inst.pos_eave)


def _cmd_generate(args) -> int:
    cfg = _load_config(args.config, args.seed)
    inst = generate(cfg)
    save(inst, args.out)
    print(f"wrote {args.out} (F={cfg.F} M={cfg.M} E={cfg.E} N={cfg.N})")
    return EXIT_OK


def _cmd_solve(args) -> int:
    inst = load(args.instance)
    if args.epsilon is not None:
        inst = _override_epsilon(inst, args.epsilon)
    opts = AsmOptions(theta=args.theta, max_iters=args.max_iters,
                      mads_max_evals=args.budget, mads_seed=inst.config.seed)
    if args.solver == "asm":
        rep = run(inst, opts, gains=args.gains)
    elif args.solver == "uniform":
        rep = run(inst, dataclasses.replace(opts, mode="uniform_power"),
                  gains=args.gains)
    elif args.solver == "asm_baseline_sic":
        rep = run_baseline_sic_eve(inst, opts)
    elif args.solver == "robust":
        rep = solve_robust(inst, opts)
    else:
        res = solve_global(inst, eta=args.eta, gains=args.gains)
        doc = {
            "solver": "polyblock",
            "objective_bps_hz": res.secrecy_rate,
            "epigraph_objective_bps_hz": res.objective,
            "upper_bound_bps_hz": res.upper_bound,
            "gap_bps_hz": res.gap,
            "iterations": res.iterations,
            "converged": res.converged,
            "wall_ms": res.wall_time_s * 1e3,
            "p": res.p.tolist(),
            "rho": res.rho_implied.tolist(),
        }
        return _emit(doc, args.out)

    doc = rep.summary_dict()
    doc["p"] = rep.p.tolist()
    doc["rho"] = rep.rho.tolist()
    doc["upsilon"] = rep.upsilon.tolist()
    doc["objective_trace"] = rep.objective_trace
    return _emit(doc, args.out)


def _emit(doc: dict, out) -> int:
    text = json.dumps(doc, indent=1, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    for key in ("solver", "objective_bps_hz", "iterations", "gap_bps_hz",
                "wall_ms"):
        if key in doc:
            print(f"{key}: {doc[key]}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    spec = ExperimentSpec.from_file(args.spec)
    paths = run_experiment(spec)
    for k, v in paths.items():
        print(f"{k}: {v}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    table = compare(args.csv_a, args.csv_b, solver_a=args.solver_a,
                    solver_b=args.solver_b, out=args.out)
    for row in table:
        print(f"value={row['value']} n={row['n']} "
              f"mean_gap={row['mean_gap']:.6f} "
              f"ci95=[{row['ci95_lo']:.6f}, {row['ci95_hi']:.6f}]")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "solve": _cmd_solve,
        "experiment": _cmd_experiment,
        "compare": _cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except (SchemaError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SubproblemError, RuntimeError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
