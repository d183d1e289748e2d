"""Batch experiment driver: Monte Carlo sweeps with paired seeds.

Every solver at a sweep point sees the same instance seeds, and the
per-node RNG streams in the generator make instances nest across axis
values, so sweep comparisons are paired rather than independent.  Output is
CSV only: a detail file (one row per value/trial/solver), a summary file
with normal-approximation confidence intervals, and a convergence trace for
one designated trial.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .asm import AsmOptions, run, run_baseline_sic_eve
from .network import NetworkConfig, SchemaError, generate
from .polyblock import POWER_COORD_CAP, solve_global
from .robust import solve_robust

AXES = ("N", "E", "F", "epsilon", "mode")
SOLVERS = ("asm", "asm_baseline_sic", "uniform", "robust", "polyblock")

DETAIL_COLUMNS = ("axis", "value", "trial", "seed", "solver", "status",
                  "objective_bps_hz", "iterations", "residual", "gap",
                  "wall_ms")
SUMMARY_COLUMNS = ("axis", "value", "solver", "n", "mean_objective_bps_hz",
                   "ci95_lo", "ci95_hi")
TRACE_COLUMNS = ("axis", "value", "solver", "iteration", "objective_bps_hz")


@dataclass
class ExperimentSpec:
    """One sweep: base config, axis, trials and the solvers to run."""

    base_config: NetworkConfig
    axis: str
    values: list
    trials: int = 1
    solvers: list = field(default_factory=lambda: ["asm"])
    out_dir: str = "results"
    seed0: int = 1000
    workers: int = 1
    gains: str = "true"
    theta: float | None = None
    max_iters: int = 50
    mads_max_evals: int | None = None
    eta: float = 1e-2
    trace_trial: int = 0

    def __post_init__(self):
        if self.axis not in AXES:
            raise SchemaError("axis", f"must be one of {AXES}")
        if self.trials < 1:
            raise SchemaError("trials", "must be >= 1")
        if not self.values:
            raise SchemaError("values", "must be nonempty")
        for s in self.solvers:
            if s not in SOLVERS:
                raise SchemaError("solvers", f"unknown solver {s!r}")
        if "polyblock" in self.solvers:
            for v in self.values:
                cfg = apply_axis(self.base_config, self.axis, v)
                if cfg.M * cfg.N > POWER_COORD_CAP:
                    raise SchemaError(
                        "solvers", "polyblock requested beyond its size cap")

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError("file", f"not valid JSON: {exc}") from exc
        if "base_config" not in doc:
            raise SchemaError("base_config", "missing field")
        cfg = NetworkConfig.from_dict(doc.pop("base_config"))
        known = {f.name for f in dataclasses.fields(cls)} - {"base_config"}
        extra = set(doc) - known
        if extra:
            raise SchemaError(sorted(extra)[0], "unknown spec field")
        return cls(base_config=cfg, **doc)


def apply_axis(cfg: NetworkConfig, axis: str, value) -> NetworkConfig:
    """Base config with one sweep-axis value applied."""
    if axis == "N":
        return dataclasses.replace(cfg, N=int(value))
    if axis == "E":
        return dataclasses.replace(cfg, E=int(value))
    if axis == "epsilon":
        return dataclasses.replace(cfg, epsilon=float(value))
    if axis == "F":
        f = int(value)
        m_f = (cfg.M_f + (cfg.M_f[-1],) * f)[:f]
        p_max = (cfg.p_max + (cfg.p_max[-1],) * f)[:f]
        return dataclasses.replace(cfg, F=f, M_f=m_f, p_max=p_max)
    return cfg  # mode axis leaves the config untouched


def _dispatch(solver: str, inst, spec: ExperimentSpec, mode_value):
    opts = AsmOptions(theta=spec.theta, max_iters=spec.max_iters,
                      mads_max_evals=spec.mads_max_evals,
                      mads_seed=inst.config.seed)
    if solver == "asm":
        if spec.axis == "mode" and mode_value == "uniform_power":
            opts = dataclasses.replace(opts, mode="uniform_power")
        return run(inst, opts, gains=spec.gains)
    if solver == "uniform":
        opts = dataclasses.replace(opts, mode="uniform_power")
        return run(inst, opts, gains=spec.gains)
    if solver == "asm_baseline_sic":
        return run_baseline_sic_eve(inst, opts)
    if solver == "robust":
        return solve_robust(inst, opts)
    if solver == "polyblock":
        return solve_global(inst, eta=spec.eta, gains=spec.gains)
    raise ValueError(f"unknown solver {solver!r}")


def _run_point(spec: ExperimentSpec, value, trial: int):
    cfg = apply_axis(spec.base_config, spec.axis, value)
    seed = spec.seed0 + trial
    cfg = dataclasses.replace(cfg, seed=seed)
    inst = generate(cfg)
    rows = []
    traces = []
    for solver in spec.solvers:
        try:
            rep = _dispatch(solver, inst, spec, value)
            gap = getattr(rep, "gap", None)
            residual = (max(rep.residuals.values())
                        if getattr(rep, "residuals", None) else 0.0)
            rows.append({
                "axis": spec.axis, "value": value, "trial": trial,
                "seed": seed, "solver": solver, "status": "ok",
                "objective_bps_hz": rep.secrecy_rate,
                "iterations": rep.iterations,
                "residual": residual,
                "gap": "" if gap is None else gap,
                "wall_ms": rep.wall_time_s * 1e3,
            })
            if trial == spec.trace_trial:
                trace = getattr(rep, "objective_trace", None) or []
                for k, v in enumerate(trace):
                    traces.append({"axis": spec.axis, "value": value,
                                   "solver": solver, "iteration": k,
                                   "objective_bps_hz": v})
        except Exception as exc:  # recorded per-row, run continues
            rows.append({
                "axis": spec.axis, "value": value, "trial": trial,
                "seed": seed, "solver": solver,
                "status": f"error:{type(exc).__name__}",
                "objective_bps_hz": "", "iterations": "",
                "residual": "", "gap": "", "wall_ms": "",
            })
    return rows, traces


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, columns, rows):
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")


def run_experiment(spec: ExperimentSpec) -> dict:
    """Execute the sweep; returns the paths of the emitted CSV files."""
    os.makedirs(spec.out_dir, exist_ok=True)
    points = [(vi, v, t) for vi, v in enumerate(spec.values)
              for t in range(spec.trials)]
    if spec.workers > 1:
        results = Parallel(n_jobs=spec.workers, backend="loky")(
            delayed(_run_point)(spec, v, t) for _, v, t in points)
    else:
        results = [_run_point(spec, v, t) for _, v, t in points]

    detail, traces = [], []
    for (_, _, _), (rows, tr) in zip(points, results):
        detail.extend(rows)
        traces.extend(tr)
    order = {s: k for k, s in enumerate(spec.solvers)}
    vorder = {repr(v): k for k, v in enumerate(spec.values)}
    detail.sort(key=lambda r: (vorder[repr(r["value"])], r["trial"],
                               order[r["solver"]]))
    traces.sort(key=lambda r: (vorder[repr(r["value"])], order[r["solver"]],
                               r["iteration"]))

    summary = []
    for v in spec.values:
        for s in spec.solvers:
            vals = [r["objective_bps_hz"] for r in detail
                    if r["value"] == v and r["solver"] == s
                    and r["status"] == "ok"]
            if not vals:
                continue
            arr = np.asarray(vals, float)
            half = 1.96 * arr.std(ddof=1) / math.sqrt(len(arr)) if len(arr) > 1 else 0.0
            summary.append({
                "axis": spec.axis, "value": v, "solver": s, "n": len(arr),
                "mean_objective_bps_hz": float(arr.mean()),
                "ci95_lo": float(arr.mean() - half),
                "ci95_hi": float(arr.mean() + half),
            })

    paths = {
        "detail": os.path.join(spec.out_dir, "detail.csv"),
        "summary": os.path.join(spec.out_dir, "summary.csv"),
        "trace": os.path.join(spec.out_dir, "trace.csv"),
    }
    _write_csv(paths["detail"], DETAIL_COLUMNS, detail)
    _write_csv(paths["summary"], SUMMARY_COLUMNS, summary)
    _write_csv(paths["trace"], TRACE_COLUMNS, traces)
    return paths


# ---------------------------------------------------------------------------
# paired comparison of two detail CSVs
# ---------------------------------------------------------------------------


class AlignmentError(ValueError):
    """The two detail files do not share seeds row-for-row."""


def _read_detail(path, solver=None):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [dict(zip(header, line.rstrip("\n").split(",")))
                for line in fh if line.strip()]
    solvers = sorted({r["solver"] for r in rows})
    if solver is None:
        if len(solvers) != 1:
            raise AlignmentError(
                f"{path} holds solvers {solvers}; pick one with solver=")
        solver = solvers[0]
    out = {}
    for r in rows:
        if r["solver"] != solver or r["status"] != "ok":
            continue
        key = (r["value"], r["trial"])
        out[key] = (int(r["seed"]), float(r["objective_bps_hz"]))
    return solver, out


def compare(path_a, path_b, solver_a=None, solver_b=None, out=None):
    """Per-axis-value mean relative gap (A - B) / A over shared seeds."""
    name_a, rows_a = _read_detail(path_a, solver_a)
    name_b, rows_b = _read_detail(path_b, solver_b)
    keys = sorted(set(rows_a) & set(rows_b), key=lambda k: (k[0], int(k[1])))
    if not keys:
        raise AlignmentError("no shared (value, trial) rows")
    for k in keys:
        if rows_a[k][0] != rows_b[k][0]:
            raise AlignmentError(
                f"seed mismatch at value={k[0]} trial={k[1]}")
    values = []
    for k in keys:
        if k[0] not in values:
            values.append(k[0])
    table = []
    for v in values:
        gaps = []
        for k in keys:
            if k[0] != v:
                continue
            a, b = rows_a[k][1], rows_b[k][1]
            gaps.append((a - b) / a if abs(a) > 1e-12 else 0.0)
        arr = np.asarray(gaps, float)
        half = (1.96 * arr.std(ddof=1) / math.sqrt(len(arr))
                if len(arr) > 1 else 0.0)
        table.append({
            "value": v, "n": len(arr), "solver_a": name_a,
            "solver_b": name_b, "mean_gap": float(arr.mean()),
            "ci95_lo": float(arr.mean() - half),
            "ci95_hi": float(arr.mean() + half),
        })
    if out:
        cols = ("value", "solver_a", "solver_b", "n", "mean_gap",
                "ci95_lo", "ci95_hi")
        _write_csv(out, cols, table)
    return table
