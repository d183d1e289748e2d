"""Global optimality oracle via monotonic optimization.

For pairing depth 2 the assignment variables can be dropped: a user is
scheduled exactly when its power is positive, with a triple-product row
forbidding three positive powers on one (BS, subcarrier).  Every remaining
constraint splits into a difference of increasing functions, each encoded
with one auxiliary slack so the feasible set becomes the intersection of a
normal set (increasing <= constant) and a conormal set (increasing >=
constant) inside a hyper-rectangle.  The polyblock loop then shrinks a
vertex outer approximation of that intersection: project the best vertex
onto the normal boundary by bisection, use the projection to update the
incumbent when it is conormal-feasible, and cut the vertex into one child
per coordinate.

Internally everything is natural-log scale; public values are bits/s/Hz.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .network import NetworkInstance
from .rates import RateModel

LN2 = float(np.log(2.0))
POWER_COORD_CAP = 12
MEMBERSHIP_RTOL = 1e-9
RHO_THRESHOLD_REL = 1e-9


class UnsupportedConfigError(ValueError):
    """The power-only transform needs pairing depth 2 (or trivial cells)."""


class ModelError(RuntimeError):
    """Structural assumption broken (e.g. origin outside the normal set)."""


class CanonicalProblem:
    """Monotone canonical form of the power-only secrecy problem.

    Variable layout: ``x = [P, upsilon, T1, T2, T3, T4]`` with P and upsilon
    of size M*N, one T1 per legit-SIC pair row, one T2 per avoidance row,
    one T3 per (eave, user, subcarrier) rate row and one T4 per objective
    term.  Membership in the normal set ``N1`` and conormal set ``N2`` is
    tested with relative tolerance; the objective ``phi`` is increasing.
    """

    def __init__(self, inst: NetworkInstance, p_mask: np.ndarray | None = None,
                 upsilon_max: np.ndarray | None = None, gains: str = "true"):
        c = inst.config
        if c.ell != 2 and max(c.M_f) > 1:
            raise UnsupportedConfigError(
                "power-only transform requires ell == 2")
        if c.M * c.N > POWER_COORD_CAP:
            raise UnsupportedConfigError(
                f"{c.M * c.N} power coordinates exceed the cap of "
                f"{POWER_COORD_CAP}")
        self.inst = inst
        self.model = RateModel(inst, gains)
        m = self.model
        self.M, self.N, self.E, self.F = m.M, m.N, m.E, m.F
        self.K = self.M * self.N
        self.sigma2 = m.sigma2

        if p_mask is None:
            p_mask = np.broadcast_to(
                np.asarray(c.p_max)[inst.serving][:, None],
                (self.M, self.N)).copy()
        self.p_mask = np.asarray(p_mask, float).reshape(self.M, self.N)

        # legit-SIC rows (m dominant, i weak) and avoidance rows (m, i, e)
        self.q_rows = np.argwhere(m.stronger)          # (n1, 3): m, i, n
        psi_rows = []
        for a in range(self.M):
            for b in range(self.M):
                if a == b or not m.samecell[a, b]:
                    continue
                for n in range(self.N):
                    for e in range(self.E):
                        if m.elig[e, b, n]:
                            psi_rows.append((a, b, e, n))
        self.psi_rows = (np.asarray(psi_rows, dtype=int).reshape(-1, 4))
        self.n1_rows = len(self.q_rows)
        self.n2_rows = len(self.psi_rows)
        self.n3_rows = self.E * self.K

        trips = []
        for f in range(self.F):
            members = np.flatnonzero(inst.serving == f)
            for combo in itertools.combinations(members, 3):
                for n in range(self.N):
                    trips.append((*combo, n))
        self.triples = np.asarray(trips, dtype=int).reshape(-1, 4)

        ones = np.ones((self.M, self.N))
        if upsilon_max is None:
            if self.E:
                snr = self.p_mask[None] * m.gd_m / self.sigma2
                upsilon_max = np.log1p(snr).max(axis=0)
            else:
                upsilon_max = np.zeros((self.M, self.N))
        self.ups_max = np.asarray(upsilon_max, float).reshape(self.M, self.N)

        # range constants at the box corners
        o_plus_mask, o_minus_mask = self._o_pair(self.p_mask[None])
        oh_plus_mask, _ = self._o_hat(self.p_mask[None])
        ot_plus_mask, _ = self._o_tilde(self.p_mask[None],
                                        np.zeros((1, self.M, self.N)))
        gp_mask, gm_mask = self._g_pair(self.p_mask[None],
                                        self.ups_max[None])
        self.c_q = o_plus_mask[0]
        self.c_psi = oh_plus_mask[0]
        self.c_t3 = ot_plus_mask[0]
        self.c_t4 = gm_mask[0]
        log_s2 = np.log(self.sigma2)
        self.r1 = self.c_q.copy()
        self.r2 = self.c_psi.copy()
        self.r3 = self.c_t3 - log_s2
        self.r4 = self.c_t4 - log_s2

        self.box = np.concatenate([
            self.p_mask.ravel(), self.ups_max.ravel(),
            self.r1, self.r2, self.r3.ravel(), self.r4.ravel()])
        self.dim = self.box.size
        self._off = np.cumsum([self.K, self.K, self.n1_rows, self.n2_rows,
                               self.n3_rows, self.K])
        self.t4_const_sum = float(self.c_t4.sum())
        # coordinates the objective does not see: upsilon and the T1-T3
        # slacks; only P and T4 enter phi
        self.passive = np.zeros(self.dim, dtype=bool)
        self.passive[self.K:self._off[4]] = True
        off = [0] + list(self._off)
        self.passive_families = [np.arange(off[j], off[j + 1])
                                 for j in (1, 2, 3, 4)
                                 if off[j + 1] > off[j]]
        if not self.in_n1(np.zeros(self.dim)):
            raise ModelError("origin is outside the normal set")

    # -- unpacking ---------------------------------------------------------

    def unpack(self, X: np.ndarray):
        X = np.atleast_2d(X)
        o = self._off
        P = X[:, :o[0]].reshape(-1, self.M, self.N)
        ups = X[:, o[0]:o[1]].reshape(-1, self.M, self.N)
        t1 = X[:, o[1]:o[2]]
        t2 = X[:, o[2]:o[3]]
        t3 = X[:, o[3]:o[4]].reshape(-1, self.E, self.M, self.N)
        t4 = X[:, o[4]:o[5]].reshape(-1, self.M, self.N)
        return P, ups, t1, t2, t3, t4

    # -- increasing building blocks ----------------------------------------

    def _common(self, P: np.ndarray):
        m = self.model
        load = m.cell_load(P)
        i_user = m.user_cross_interference(load)
        s_strong = m.strong_in_cell(P)
        return load, i_user, s_strong

    def _o_pair(self, P: np.ndarray):
        """Increasing split of the legit-SIC rows, both sides, (B, n1)."""
        if not self.n1_rows:
            z = np.zeros((P.shape[0], 0))
            return z, z
        load, i_user, s_strong = self._common(P)
        mi, ii, ni = self.q_rows.T
        g_m = self.model.g_serv[mi, ni]
        g_i = self.model.g_serv[ii, ni]
        pm = P[:, mi, ni]
        pi = P[:, ii, ni]
        s2 = (s_strong[:, mi, ni] + pm
              - self.model.stronger[ii, mi, ni] * pi)
        o_plus = pm * pi * (g_i * self.sigma2 + g_i * i_user[:, mi, ni]
                            + g_m * g_i * s2)
        o_minus = pm * pi * (g_m * self.sigma2 + g_m * i_user[:, ii, ni]
                             + g_m * g_i * s_strong[:, ii, ni])
        return o_plus, o_minus

    def _o_hat(self, P: np.ndarray):
        """Increasing split of the avoidance rows, (B, n2)."""
        if not self.n2_rows:
            z = np.zeros((P.shape[0], 0))
            return z, z
        m = self.model
        load, i_user, s_strong = self._common(P)
        cross_e = m._eave_cross(m.g_pos, load)[:, :, m.serving, :]
        mi, ii, ei, ni = self.psi_rows.T
        g_i = m.g_serv[ii, ni]
        g_e = m.gn_m[ei, ii, ni]
        g_e_pos = m.gp_m[ei, ii, ni]
        pm = P[:, mi, ni]
        pi = P[:, ii, ni]
        s_all = load[:, m.serving, :][:, ii, ni] - pi
        oh_plus = pm * pi * (g_e * self.sigma2 + g_e * i_user[:, ii, ni]
                             + g_e * g_i * s_strong[:, ii, ni])
        oh_minus = pm * pi * (g_i * self.sigma2
                              + g_i * cross_e[:, ei, ii, ni]
                              + g_i * g_e_pos * s_all)
        return oh_plus, oh_minus

    def _o_tilde(self, P: np.ndarray, ups: np.ndarray):
        """Increasing split of the eave-rate rows, (B, E, M, N)."""
        if not self.E:
            z = np.zeros((P.shape[0], 0, self.M, self.N))
            return z, z
        m = self.model
        load = m.cell_load(P)
        cross = m._eave_cross(m.g_int, load)[:, :, m.serving, :]
        incell = load[:, m.serving, :][:, None] - P[:, None]
        base = m.gi_m * incell + cross + self.sigma2
        ot_plus = np.log(base + P[:, None] * m.gd_m)
        ot_minus = np.log(base) + ups[:, None]
        return ot_plus, ot_minus

    def _g_pair(self, P: np.ndarray, ups: np.ndarray):
        """Increasing split of the objective terms, (B, M, N)."""
        m = self.model
        load, i_user, s_strong = self._common(P)
        base = m.g_serv * s_strong + i_user + self.sigma2
        g_plus = np.log(base + P * m.g_serv)
        g_minus = np.log(base) + ups
        return g_plus, g_minus

    # -- membership and objective ------------------------------------------

    def n1_violation(self, X: np.ndarray) -> np.ndarray:
        """Largest normalized violation of the normal-set rows, (B,)."""
        P, ups, t1, t2, t3, t4 = self.unpack(X)
        B = P.shape[0]
        viol = np.zeros(B)

        def upd(lhs, rhs, scale):
            nonlocal viol
            v = (lhs - rhs) / scale
            if v.ndim > 1:
                v = v.reshape(B, -1).max(axis=1) if v.size else np.zeros(B)
            viol = np.maximum(viol, v)

        x_flat = np.atleast_2d(X)
        upd(x_flat, self.box[None, :], np.maximum(self.box, 1e-30)[None, :])
        spent = np.einsum("fm,bmn->bf", self.model.S, P)
        upd(spent, self.model.p_max[None, :], self.model.p_max[None, :])
        if len(self.triples):
            a, b, cc, n = self.triples.T
            prod = P[:, a, n] * P[:, b, n] * P[:, cc, n]
            scale = (self.p_mask[a, n] * self.p_mask[b, n]
                     * self.p_mask[cc, n]) + 1e-300
            upd(prod, 0.0, scale[None, :])
        if self.n1_rows:
            o_plus, _ = self._o_pair(P)
            upd(o_plus + t1, self.c_q[None, :],
                np.maximum(self.c_q, 1e-300)[None, :])
        if self.n2_rows:
            oh_plus, _ = self._o_hat(P)
            upd(oh_plus + t2, self.c_psi[None, :],
                np.maximum(self.c_psi, 1e-300)[None, :])
        if self.E:
            ot_plus, _ = self._o_tilde(P, ups)
            upd(ot_plus + t3, self.c_t3[None],
                np.maximum(np.abs(self.c_t3), 1.0)[None])
        _, g_minus = self._g_pair(P, ups)
        upd(t4 + g_minus, self.c_t4[None],
            np.maximum(np.abs(self.c_t4), 1.0)[None])
        return viol

    def n2_violation(self, X: np.ndarray) -> np.ndarray:
        """Largest normalized violation of the conormal-set rows, (B,)."""
        P, ups, t1, t2, t3, t4 = self.unpack(X)
        B = P.shape[0]
        viol = np.zeros(B)

        def upd(lhs, rhs, scale):
            nonlocal viol
            v = (rhs - lhs) / scale
            if v.ndim > 1:
                v = v.reshape(B, -1).max(axis=1) if v.size else np.zeros(B)
            viol = np.maximum(viol, v)

        x_flat = np.atleast_2d(X)
        upd(x_flat, 0.0, np.maximum(self.box, 1e-30)[None, :])
        if self.n1_rows:
            _, o_minus = self._o_pair(P)
            upd(o_minus + t1, self.c_q[None, :],
                np.maximum(self.c_q, 1e-300)[None, :])
        if self.n2_rows:
            _, oh_minus = self._o_hat(P)
            upd(oh_minus + t2, self.c_psi[None, :],
                np.maximum(self.c_psi, 1e-300)[None, :])
        if self.E:
            _, ot_minus = self._o_tilde(P, ups)
            upd(ot_minus + t3, self.c_t3[None],
                np.maximum(np.abs(self.c_t3), 1.0)[None])
        return viol

    def in_n1(self, X: np.ndarray) -> np.ndarray | bool:
        v = self.n1_violation(X) <= MEMBERSHIP_RTOL
        return bool(v[0]) if np.asarray(X).ndim == 1 else v

    def in_n2(self, X: np.ndarray) -> np.ndarray | bool:
        v = self.n2_violation(X) <= MEMBERSHIP_RTOL
        return bool(v[0]) if np.asarray(X).ndim == 1 else v

    def phi(self, X: np.ndarray) -> np.ndarray:
        """Increasing objective: sum of g_plus terms plus T4 slacks."""
        P, _, _, _, _, t4 = self.unpack(X)
        ones = np.ones_like(P)
        g_plus, _ = self._g_pair(P, np.zeros_like(P))
        return g_plus.sum(axis=(-1, -2)) + t4.sum(axis=(-1, -2))

    # -- translation helpers -------------------------------------------------

    def tight_upsilon(self, P: np.ndarray) -> np.ndarray:
        ones = np.ones((self.M, self.N))
        return self.model.eave_rate_max(P, ones) * LN2

    def true_value_nats(self, P: np.ndarray) -> float:
        """Exact epigraph objective of the power-only problem at P."""
        ones = np.ones((self.M, self.N))
        return float(self.model.epigraph_objective(P, ones)) * LN2

    def make_point(self, P: np.ndarray, ups: np.ndarray | None = None):
        """Lift a power vector to canonical coordinates (tight slacks)."""
        P = np.asarray(P, float).reshape(self.M, self.N)
        if ups is None:
            ups = np.minimum(self.tight_upsilon(P), self.ups_max)
        Pb = P[None]
        ub = np.asarray(ups, float).reshape(1, self.M, self.N)
        _, o_minus = self._o_pair(Pb)
        _, oh_minus = self._o_hat(Pb)
        _, ot_minus = self._o_tilde(Pb, ub)
        _, g_minus = self._g_pair(Pb, ub)
        t1 = np.clip(self.c_q - o_minus[0], 0.0, self.r1)
        t2 = np.clip(self.c_psi - oh_minus[0], 0.0, self.r2)
        t3 = np.clip(self.c_t3 - ot_minus[0], 0.0, self.r3)
        t4 = np.clip(self.c_t4 - g_minus[0], 0.0, self.r4)
        return np.concatenate([P.ravel(), np.asarray(ups).ravel(),
                               t1.ravel(), t2.ravel(), t3.ravel(),
                               t4.ravel()])

    def implied_assignment(self, P: np.ndarray) -> np.ndarray:
        return (P > RHO_THRESHOLD_REL * self.p_mask).astype(float)

    def power_feasible(self, P: np.ndarray) -> np.ndarray:
        """Feasibility of power vectors for the power-only problem, batched.

        Checks the budget, the pairing-depth exclusion and the two SIC
        margins with assignment implied by positive power.
        """
        P = np.atleast_3d(np.asarray(P, float))
        if P.ndim == 2:
            P = P[None]
        B = P.shape[0]
        m = self.model
        ok = np.all(P >= 0, axis=(-1, -2))
        ok &= np.all(np.einsum("fm,bmn->bf", m.S, P)
                     <= m.p_max[None] * (1 + 1e-9), axis=-1)
        on = P > RHO_THRESHOLD_REL * self.p_mask
        if len(self.triples):
            a, b, cc, n = self.triples.T
            ok &= ~np.any(on[:, a, n] & on[:, b, n] & on[:, cc, n], axis=-1)
        ones = np.ones((self.M, self.N))
        if self.n1_rows:
            q = m.q_all(P, ones)
            qs = m.q_scale(P, ones) + 1e-300
            mi, ii, ni = self.q_rows.T
            act = on[:, mi, ni] & on[:, ii, ni]
            ok &= ~np.any(act & (q[:, mi, ii, ni] / qs[:, mi, ii, ni] > 1e-9),
                          axis=-1)
        if self.n2_rows:
            psi = m.psi_all(P, ones)
            ps = m.psi_scale(P, ones) + 1e-300
            mi, ii, ei, ni = self.psi_rows.T
            act = on[:, mi, ni] & on[:, ii, ni]
            ok &= ~np.any(act & (psi[:, ei, ii, ni] / ps[:, ei, ii, ni] < -1e-9),
                          axis=-1)
        return ok

    def seed_points(self):
        """Trivially feasible power vectors used to prime the incumbent."""
        yield np.zeros((self.M, self.N))
        for m in range(self.M):
            for n in range(self.N):
                P = np.zeros((self.M, self.N))
                f = self.inst.serving[m]
                P[m, n] = min(self.p_mask[m, n], self.inst.config.p_max[f])
                yield P


def canonicalize(inst: NetworkInstance, p_mask=None, upsilon_max=None,
                 gains: str = "true") -> CanonicalProblem:
    """Build the monotone canonical form (pairing depth must be 2)."""
    return CanonicalProblem(inst, p_mask, upsilon_max, gains)


def bisection_project(problem: CanonicalProblem, vertex: np.ndarray,
                      tol: float = 1e-3):
    """Project a point onto the upper boundary of the normal set.

    Walks the ray from the origin through ``vertex``; returns
    ``(lambda* vertex, lambda*)`` with ``lambda*`` resolved to within
    ``tol`` (``lambda* = 1`` when the vertex itself is feasible).
    """
    vertex = np.asarray(vertex, float)
    if not problem.in_n1(np.zeros_like(vertex)):
        raise ModelError("origin is outside the normal set")
    if problem.in_n1(vertex):
        return vertex.copy(), 1.0
    lo, hi = 0.0, 1.0
    grid_n = 40
    while hi - lo >= tol:
        lam = np.linspace(lo, hi, grid_n + 2)[1:-1]
        ok = problem.in_n1(lam[:, None] * vertex[None, :])
        # membership is monotone along the ray, so ok is a prefix
        k = int(np.argmin(ok)) if not ok.all() else len(lam)
        if k == 0:
            hi = float(lam[0])
        else:
            lo = float(lam[k - 1])
            hi = float(lam[k]) if k < len(lam) else hi
    return lo * vertex, lo


@dataclass
class PolyblockResult:
    """Certified global solve outcome; rates in bits/s/Hz."""

    p: np.ndarray
    upsilon: np.ndarray
    rho_implied: np.ndarray
    objective: float          # incumbent value (CBV)
    secrecy_rate: float
    upper_bound: float
    gap: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    wall_time_s: float = 0.0


class _VertexSet:
    """Growable vertex pool with lazy deletion."""

    def __init__(self, dim: int):
        self.X = np.zeros((256, dim))
        self.phi = np.full(256, -np.inf)
        self.alive = np.zeros(256, dtype=bool)
        self.n = 0

    def add(self, X: np.ndarray, phi: np.ndarray):
        k = len(X)
        while self.n + k > len(self.phi):
            grow = len(self.phi)
            self.X = np.vstack([self.X, np.zeros_like(self.X)])
            self.phi = np.concatenate([self.phi, np.full(grow, -np.inf)])
            self.alive = np.concatenate(
                [self.alive, np.zeros(grow, dtype=bool)])
        self.X[self.n:self.n + k] = X
        self.phi[self.n:self.n + k] = phi
        self.alive[self.n:self.n + k] = True
        self.n += k

    def prune_value(self, cutoff: float):
        self.alive[: self.n] &= self.phi[: self.n] > cutoff

    def compact(self, dominance: bool = False):
        sel = np.flatnonzero(self.alive[: self.n])
        X, phi = self.X[sel].copy(), self.phi[sel].copy()
        if dominance and 1 < len(X) <= 4000:
            order = np.argsort(-phi)
            X, phi = X[order], phi[order]
            keep = np.ones(len(X), dtype=bool)
            for j in range(1, len(X)):
                if not keep[j]:
                    continue
                dominated = np.all(X[j] <= X[:j][keep[:j]] + 1e-15, axis=1)
                if dominated.any():
                    keep[j] = False
            X, phi = X[keep], phi[keep]
        self.X = np.zeros((max(256, 2 * len(X)), self.X.shape[1]))
        self.phi = np.full(len(self.X), -np.inf)
        self.alive = np.zeros(len(self.X), dtype=bool)
        self.n = 0
        if len(X):
            self.add(X, phi)

    @property
    def n_alive(self) -> int:
        return int(self.alive[: self.n].sum())

    def best(self):
        """Best vertex; ties go to the most recent (depth-first chains)."""
        phi = np.where(self.alive[: self.n], self.phi[: self.n], -np.inf)
        top = phi.max()
        j = int(np.flatnonzero(phi >= top - 1e-12)[-1])
        return j, phi[j]


def _polish(problem: CanonicalProblem, P: np.ndarray,
            rounds: int = 8) -> tuple[np.ndarray, float]:
    """Incumbent improvement: cyclic line search on the true objective.

    Each pass sweeps the power coordinates with a feasibility-filtered grid
    line search (refined twice around the best point).  Keeps the incumbent
    a genuine feasible point; the certified upper bound is untouched.
    """
    P = P.copy()
    best = problem.true_value_nats(P)
    ones = np.ones((problem.M, problem.N))
    coords = [(m, n) for m in range(problem.M) for n in range(problem.N)]
    pairs = [(a, b) for i, a in enumerate(coords) for b in coords[i + 1:]
             if problem.inst.serving[a[0]] == problem.inst.serving[b[0]]]

    def line(make, lo, hi):
        nonlocal P, best
        moved = False
        for _zoom in range(3):
            grid = np.linspace(lo, hi, 33)
            cand = np.maximum(make(grid), 0.0)
            feas = problem.power_feasible(cand)
            if not feas.any():
                return moved
            vals = np.where(
                feas,
                problem.model.epigraph_objective(cand, ones) * LN2,
                -np.inf)
            j = int(np.argmax(vals))
            if vals[j] > best + 1e-12:
                P = cand[j].copy()
                best = float(vals[j])
                moved = True
            step = grid[1] - grid[0]
            center = grid[j]
            lo = max(lo, center - step)
            hi = min(hi, center + step)
        return moved

    for _ in range(rounds):
        moved = False
        for (m, n) in coords:
            f = problem.inst.serving[m]
            members = problem.inst.serving == f
            spent = P[members].sum() - P[m, n]
            cap = min(problem.p_mask[m, n],
                      problem.inst.config.p_max[f] - spent)
            if cap <= 0:
                continue

            def move(grid, m=m, n=n):
                cand = np.repeat(P[None], len(grid), axis=0)
                cand[:, m, n] = grid
                return cand

            moved |= line(move, 0.0, cap)
        # budget-preserving transfers follow the active budget face, which
        # single-coordinate moves cannot walk along
        for (a, b) in pairs:
            hi = min(P[b], problem.p_mask[a] - P[a])
            lo = -min(P[a], problem.p_mask[b] - P[b])
            if hi - lo <= 1e-15:
                continue

            def transfer(grid, a=a, b=b):
                cand = np.repeat(P[None], len(grid), axis=0)
                cand[:, a[0], a[1]] = P[a] + grid
                cand[:, b[0], b[1]] = P[b] - grid
                return cand

            moved |= line(transfer, float(lo), float(hi))
        if not moved:
            break
    return P, best


def polyblock_solve(problem: CanonicalProblem, eta: float = 1e-3,
                    max_iters: int = 20000,
                    bisect_tol: float = 1e-3) -> PolyblockResult:
    """Run the polyblock outer-approximation loop.

    ``eta`` is the certified optimality gap (bits/s/Hz).  Exhausting
    ``max_iters`` returns the best incumbent with ``converged=False`` and
    the remaining gap reported, not an exception.
    """
    t0 = time.perf_counter()
    eta_n = eta * LN2
    const = problem.t4_const_sum

    cbv = -np.inf
    best_p = np.zeros((problem.M, problem.N))
    for P in problem.seed_points():
        x = problem.make_point(P)
        if problem.in_n1(x) and problem.in_n2(x):
            v = problem.true_value_nats(P)
            if v > cbv:
                cbv, best_p = v, P.copy()
    best_p, cbv = _polish(problem, best_p)

    verts = _VertexSet(problem.dim)
    b = problem.box.copy()
    verts.add(b[None], problem.phi(b[None]))
    ub = float(problem.phi(b[None])[0]) - const

    trace = []
    iterations = 0
    converged = False
    tiny = 1e-12 * (problem.box + 1e-30)
    while iterations < max_iters:
        iterations += 1
        verts.prune_value(cbv + const + eta_n)
        if verts.n_alive == 0:
            ub = min(ub, cbv + eta)
            converged = True
            break
        j, phi_best = verts.best()
        ub = min(ub, phi_best - const)
        trace.append((ub / LN2, cbv / LN2))
        if ub - cbv <= eta_n:
            converged = True
            break
        z = verts.X[j].copy()
        verts.alive[j] = False
        x_proj, lam = bisection_project(problem, z, tol=bisect_tol)
        # score the projection's power part with tight auxiliaries; the
        # vertex's own passive coordinates are irrelevant to feasibility
        # of the underlying power vector
        P_proj = x_proj[: problem.K].reshape(problem.M, problem.N)
        x_lift = problem.make_point(P_proj)
        if problem.in_n1(x_lift) and problem.in_n2(x_lift):
            v = problem.true_value_nats(P_proj)
            if v > cbv - eta_n:
                P_pol, v_pol = _polish(problem, P_proj)
                if v_pol > cbv:
                    cbv, best_p = v_pol, P_pol
        if lam >= 1.0:
            continue
        idx = np.flatnonzero(z - x_proj > tiny)
        if not len(idx):
            continue
        # collapse the objective-passive flush: a passive family whose
        # zeroing leaves the boundary fraction unchanged sits in no binding
        # row, so the infinite chain of tiny cuts it would otherwise cause
        # is equivalent to one child with the family zeroed (the fraction
        # is monotone along the chain, so equality at the limit pins every
        # intermediate projection to the same boundary point)
        collapsed = np.zeros(problem.dim, dtype=bool)
        for fam in problem.passive_families:
            if np.any(z[fam] > tiny[fam]):
                z_f = z.copy()
                z_f[fam] = 0.0
                _, lam_f = bisection_project(problem, z_f, tol=bisect_tol)
                if lam_f <= lam + bisect_tol:
                    collapsed[fam] = True
        if collapsed.any():
            z0 = z.copy()
            z0[collapsed] = 0.0
            _, lam0 = bisection_project(problem, z0, tol=bisect_tol)
            if lam0 > lam + bisect_tol:
                collapsed[:] = False
        if collapsed.any():
            idx = idx[~collapsed[idx]]
            children = np.repeat(z[None], len(idx) + 1, axis=0)
            children[np.arange(len(idx)), idx] = x_proj[idx]
            children[-1] = z0
        else:
            children = np.repeat(z[None], len(idx), axis=0)
            children[np.arange(len(idx)), idx] = x_proj[idx]
        keep = problem.in_n2(children)
        children = children[keep]
        if len(children):
            phis = problem.phi(children)
            sel = phis > cbv + const + eta_n
            if sel.any():
                verts.add(children[sel], phis[sel])
        if verts.n > 4 * max(256, verts.n_alive):
            verts.compact(dominance=True)

    if verts.n_alive:
        _, phi_best = verts.best()
        ub = min(ub, phi_best - const)
    else:
        ub = min(ub, cbv + eta_n)
    gap = max(ub - cbv, 0.0)

    ups = problem.tight_upsilon(best_p)
    ones = np.ones((problem.M, problem.N))
    result = PolyblockResult(
        p=best_p,
        upsilon=ups / LN2,
        rho_implied=problem.implied_assignment(best_p),
        objective=cbv / LN2,
        secrecy_rate=float(problem.model.secrecy_sum(best_p, ones)),
        upper_bound=ub / LN2,
        gap=gap / LN2,
        iterations=iterations,
        converged=converged or gap <= eta_n + 1e-12,
        trace=trace,
        wall_time_s=time.perf_counter() - t0,
    )
    return result


def solve_global(inst: NetworkInstance, eta: float = 1e-3,
                 max_iters: int = 20000, gains: str = "true",
                 p_mask=None) -> PolyblockResult:
    """Canonicalize and solve; convenience wrapper for the experiment CLI."""
    problem = canonicalize(inst, p_mask=p_mask, gains=gains)
    return polyblock_solve(problem, eta=eta, max_iters=max_iters)
