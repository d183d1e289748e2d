"""Binary subcarrier assignment at fixed power.

``objective_at`` scores an assignment by the epigraph objective with tight
slack, returning -inf for anything violating the budget, multiplexing-order
or SIC constraints (extreme-barrier handling).  ``exhaustive_search`` is the
enumeration oracle for small instances; ``mads_search`` is a poll-based
direct search over bit flips and within-subcarrier swaps with an adaptive
poll radius, used inside the alternating solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import RateModel

EXHAUSTIVE_BIT_CAP = 20
_CHUNK = 4096


class SizeError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass
class SearchBudget:
    """Evaluation budget and poll parameters for the direct search."""

    max_evals: int = 2000
    initial_poll_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.initial_poll_size not in (1, 2):
            raise ValueError("initial_poll_size must be 1 or 2")


def _as_model(inst_or_model, gains: str, eave_sic: bool) -> RateModel:
    if isinstance(inst_or_model, RateModel):
        return inst_or_model
    return RateModel(inst_or_model, gains, eave_sic=eave_sic)


def objective_batch(model: RateModel, rho: np.ndarray, p: np.ndarray,
                    enforce_c6: bool = True) -> np.ndarray:
    """Epigraph objective (bits) per candidate; -inf where infeasible."""
    rho = np.asarray(rho, float)
    p = np.asarray(p, float)
    ok = model.assignment_feasible(rho, p, enforce_c6=enforce_c6)
    val = model.epigraph_objective(p, rho)
    return np.where(ok, val, -np.inf)


def objective_at(inst_or_model, rho, p, gains: str = "true",
                 enforce_c6: bool = True) -> float:
    """Score one assignment at fixed power; -inf if any constraint fails."""
    model = _as_model(inst_or_model, gains, False)
    return float(objective_batch(model, np.asarray(rho, float),
                                 np.asarray(p, float), enforce_c6))


def exhaustive_search(inst_or_model, p, gains: str = "true",
                      enforce_c6: bool = True):
    """Globally optimal assignment by enumeration (hard cap 20 bits).

    Ties resolve to the first maximizer in integer enumeration order, so the
    all-zero assignment wins when every feasible choice scores zero.
    """
    model = _as_model(inst_or_model, gains, False)
    M, N = model.M, model.N
    n_bits = M * N
    if n_bits > EXHAUSTIVE_BIT_CAP:
        raise SizeError(f"{n_bits} binary variables exceed the cap of "
                        f"{EXHAUSTIVE_BIT_CAP}")
    p = np.asarray(p, float)
    total = 1 << n_bits
    best_val = -np.inf
    best_rho = np.zeros((M, N))
    weights = (1 << np.arange(n_bits, dtype=np.int64))
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        rho = ((codes[:, None] & weights[None, :]) > 0).astype(float)
        rho = rho.reshape(-1, M, N)
        vals = objective_batch(model, rho, p[None], enforce_c6)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val = float(vals[j])
            best_rho = rho[j].copy()
    return best_rho, best_val


def _poll_candidates(rho: np.ndarray, model: RateModel, k: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Poll set around the incumbent: flips and swaps (k=1), bit pairs (k=2)."""
    M, N = rho.shape
    cands = []
    seen = {rho.tobytes()}

    def push(c):
        key = c.tobytes()
        if key not in seen:
            seen.add(key)
            cands.append(c)

    if k == 1:
        for m in range(M):
            for n in range(N):
                c = rho.copy()
                c[m, n] = 1.0 - c[m, n]
                push(c)
        for f in range(model.F):
            members = np.flatnonzero(model.serving == f)
            for n in range(N):
                on = [m for m in members if rho[m, n] > 0.5]
                off = [m for m in members if rho[m, n] < 0.5]
                for a in on:
                    for b in off:
                        c = rho.copy()
                        c[a, n], c[b, n] = 0.0, 1.0
                        push(c)
    else:
        flat = M * N
        n_pairs = min(4 * flat, flat * (flat - 1) // 2)
        for _ in range(n_pairs):
            i, j = rng.choice(flat, size=2, replace=False)
            c = rho.copy().reshape(-1)
            c[i] = 1.0 - c[i]
            c[j] = 1.0 - c[j]
            push(c.reshape(M, N))
    return np.array(cands) if cands else np.zeros((0, M, N))


def mads_search(inst_or_model, p, gains: str = "true",
                budget: SearchBudget | None = None, start=None,
                enforce_c6: bool = True, power_rule=None):
    """Direct search over assignments; returns (rho, objective, power).

    The poll uses single-bit flips plus within-subcarrier swaps at radius 1
    and sampled two-bit flips at radius 2; the radius expands after an
    improving poll and shrinks after a failed one, stopping when a radius-1
    poll fails (local optimality) or the budget runs out.  ``power_rule``
    maps a batch of candidate assignments to the powers they are scored at;
    the default scores every candidate at the fixed input power.
    """
    model = _as_model(inst_or_model, gains, False)
    budget = budget or SearchBudget()
    rng = np.random.default_rng(budget.seed)
    p = np.asarray(p, float)
    M, N = model.M, model.N
    rho = (np.zeros((M, N)) if start is None
           else np.asarray(start, float).copy())

    if power_rule is None:
        def power_rule(rho_batch):
            return np.broadcast_to(p, rho_batch.shape)

    evals = 0
    p_cur = np.asarray(power_rule(rho[None]))[0]
    f_cur = float(objective_batch(model, rho[None], p_cur[None],
                                  enforce_c6)[0])
    evals += 1
    k = budget.initial_poll_size
    while evals < budget.max_evals:
        polls = _poll_candidates(rho, model, k, rng)
        if not len(polls):
            if k > 1:
                k = 1
                continue
            break
        polls = polls[: budget.max_evals - evals]
        p_cand = np.asarray(power_rule(polls))
        vals = objective_batch(model, polls, p_cand, enforce_c6)
        evals += len(polls)
        j = int(np.argmax(vals))
        if vals[j] > f_cur + 1e-12:
            rho = polls[j].copy()
            p_cur = p_cand[j].copy()
            f_cur = float(vals[j])
            k = 2
        elif k > 1:
            k = 1
        else:
            break
    return rho, f_cur, p_cur
