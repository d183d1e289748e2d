"""Closed-form link quantities: SINRs, rates, secrecy, SIC predicates.

Everything is evaluated from a :class:`RateModel`, which freezes an instance
together with an eavesdropper gain view ("true", "est" or "worst_case") and
the eavesdropper decoding model (non-SIC by default).  All evaluators accept
leading batch dimensions on the power/assignment arrays so candidate sets can
be scored in one vectorized call.

Conventions
-----------
* rates are log2-based (bits/s/Hz); natural-log variants used by the convex
  machinery live in :mod:`nomasec.dc_power`
* channel-order ties between users are broken by index (lower index counts
  as the stronger channel)
* the secrecy clamp [.]^ + is applied only in reporting helpers, never in
  the optimizer objective
"""

from __future__ import annotations

import numpy as np

from .network import NetworkInstance

GAINS_CHOICES = ("true", "est", "worst_case")

# relative feasibility tolerance for the bilinear SIC constraints
REL_TOL = 1e-9


class RateModel:
    """Precomputed masks and gain tables for one (instance, gain-view) pair.

    ``eave_sic=True`` switches the eavesdroppers to the conventional model in
    which they cancel every user whose channel (to the serving BS) is at
    least as strong as their own; the default treats all in-cell signals as
    interference at the eavesdropper.
    """

    def __init__(self, inst: NetworkInstance, gains: str = "true",
                 eave_sic: bool = False):
        if gains not in GAINS_CHOICES:
            raise ValueError(f"gains must be one of {GAINS_CHOICES}")
        self.inst = inst
        self.gains = gains
        self.eave_sic = eave_sic
        c = inst.config
        self.F, self.M, self.E, self.N = c.F, c.M, c.E, c.N
        self.sigma2 = c.sigma2
        self.p_max = np.asarray(c.p_max)
        self.serving = inst.serving

        # (F, M) one-hot serving matrix
        self.S = np.zeros((self.F, self.M))
        self.S[self.serving, np.arange(self.M)] = 1.0
        # (M, N) gain of each user to its own BS
        self.g_serv = inst.g_user[self.serving, np.arange(self.M), :]

        # stronger[i, m, n]: i is in m's residual-interference set (same
        # cell, i != m, channel at least as strong with index tie-break)
        gi = self.g_serv[:, None, :]
        gm = self.g_serv[None, :, :]
        idx = np.arange(self.M)
        tie = (gi == gm) & (idx[:, None] < idx[None, :])[:, :, None]
        same = (self.serving[:, None] == self.serving[None, :])
        noteq = (idx[:, None] != idx[None, :])
        self.samecell = same & noteq
        self.stronger = ((gi > gm) | tie) & self.samecell[:, :, None]

        eps = c.epsilon
        if gains == "true":
            g_dir = g_int = g_neg = g_pos = inst.g_eave_true
        elif gains == "est":
            g_dir = g_int = g_neg = g_pos = inst.g_eave_est
        else:
            g_dir = inst.g_eave_est + eps
            g_int = np.maximum(inst.g_eave_est - eps, 0.0)
            # the SIC-avoidance margin uses the signed bounds as printed
            g_neg = inst.g_eave_est + eps
            g_pos = inst.g_eave_est - eps
        self.g_dir, self.g_int = g_dir, g_int
        self.g_neg, self.g_pos = g_neg, g_pos

        if self.E:
            # gathers to (E, M, N): table entry of eave e toward user m's BS
            self.gd_m = np.swapaxes(g_dir[self.serving], 0, 1)
            self.gi_m = np.swapaxes(g_int[self.serving], 0, 1)
            self.gn_m = np.swapaxes(g_neg[self.serving], 0, 1)
            self.gp_m = np.swapaxes(g_pos[self.serving], 0, 1)
            # eligibility of the SIC-avoidance margin: user i no stronger
            # than eave e (conservatively judged on the direct-link table)
            self.elig = self.g_serv[None, :, :] <= self.gd_m
            if eave_sic:
                self.eave_int_mask = (self.gd_m <= self.g_serv[None, :, :])
            else:
                self.eave_int_mask = np.ones((self.E, self.M, self.N),
                                             dtype=bool)
        else:
            shape = (0, self.M, self.N)
            self.gd_m = self.gi_m = self.gn_m = self.gp_m = np.zeros(shape)
            self.elig = np.zeros(shape, dtype=bool)
            self.eave_int_mask = np.zeros(shape, dtype=bool)

    # -- aggregate loads and interference -------------------------------

    def cell_load(self, w: np.ndarray) -> np.ndarray:
        """Per-BS scheduled power on each subcarrier, shape (..., F, N)."""
        return np.einsum("fm,...mn->...fn", self.S, w)

    def user_cross_interference(self, load: np.ndarray) -> np.ndarray:
        """Other-cell interference at each user, shape (..., M, N)."""
        tot = np.einsum("fmn,...fn->...mn", self.inst.g_user, load)
        own = self.g_serv * load[..., self.serving, :]
        return tot - own

    def _eave_cross(self, table: np.ndarray, load: np.ndarray) -> np.ndarray:
        """Other-cell interference at each eave per cell, (..., E, F, N)."""
        tot = np.einsum("fen,...fn->...en", table, load)
        own = np.einsum("fen,...fn->...efn", table, load)
        return tot[..., :, None, :] - own

    def strong_in_cell(self, w: np.ndarray) -> np.ndarray:
        """Residual in-cell NOMA interference sum per user, (..., M, N)."""
        return np.einsum("imn,...in->...mn", self.stronger, w)

    # -- user side -------------------------------------------------------

    def user_sinr(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        w = rho * p
        load = self.cell_load(w)
        denom = (self.g_serv * self.strong_in_cell(w)
                 + self.user_cross_interference(load) + self.sigma2)
        return p * self.g_serv / denom

    def user_rate(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        return np.log2(1.0 + self.user_sinr(p, rho))

    # -- eavesdropper side ------------------------------------------------

    def eave_sinr(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """SINR of each eave on each user's signal, shape (..., E, M, N)."""
        if not self.E:
            return np.zeros(p.shape[:-2] + (0, self.M, self.N))
        w = rho * p
        load = self.cell_load(w)
        # in-cell interference actually decoded as noise at the eave
        per_cell = np.einsum("fi,ein,...in->...efn", self.S,
                             self.eave_int_mask, w)
        incell = (per_cell[..., self.serving, :]
                  - self.eave_int_mask * w[..., None, :, :])
        cross = self._eave_cross(self.g_int, load)
        cross_m = cross[..., self.serving, :]
        denom = self.gi_m * incell + cross_m + self.sigma2
        return p[..., None, :, :] * self.gd_m / denom

    def eave_rate_max(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """Best eavesdropper rate per (user, subcarrier), (..., M, N)."""
        if not self.E:
            return np.zeros(p.shape[:-2] + (self.M, self.N))
        return np.log2(1.0 + self.eave_sinr(p, rho)).max(axis=-3)

    # -- secrecy ----------------------------------------------------------

    def epigraph_objective(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """Sum of scheduled (user rate - tight slack), unclamped, bits/s/Hz."""
        diff = self.user_rate(p, rho) - self.eave_rate_max(p, rho)
        return (rho * diff).sum(axis=(-1, -2))

    def secrecy_sum(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """Reported sum secrecy rate: per-term clamp at zero, bits/s/Hz."""
        diff = self.user_rate(p, rho) - self.eave_rate_max(p, rho)
        return (rho * np.maximum(diff, 0.0)).sum(axis=(-1, -2))

    # -- SIC predicates ---------------------------------------------------

    def q_all(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """Legit-SIC margin for every ordered user pair, (..., M, M, N).

        Entry [m, i, n] is meaningful when m's channel dominates i's; the
        pair is SIC-feasible iff the value is <= 0.
        """
        w = rho * p
        load = self.cell_load(w)
        i_user = self.user_cross_interference(load)
        s_strong = self.strong_in_cell(w)
        g_m = self.g_serv[:, None, :]
        g_i = self.g_serv[None, :, :]
        # residual set of m when decoding i: m itself plus m's stronger
        # set, minus i if i sits in that set
        s2 = (s_strong[..., :, None, :] + w[..., :, None, :]
              - np.swapaxes(self.stronger, 0, 1) * w[..., None, :, :])
        return (self.sigma2 * (g_i - g_m)
                + g_i * i_user[..., :, None, :]
                - g_m * i_user[..., None, :, :]
                + g_m * g_i * (s2 - s_strong[..., None, :, :]))

    def q_scale(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """Magnitude scale of q_all terms, for relative feasibility tests."""
        w = rho * p
        load = self.cell_load(w)
        i_user = self.user_cross_interference(load)
        s_strong = self.strong_in_cell(w)
        g_m = self.g_serv[:, None, :]
        g_i = self.g_serv[None, :, :]
        s2 = (s_strong[..., :, None, :] + w[..., :, None, :]
              + np.swapaxes(self.stronger, 0, 1) * w[..., None, :, :])
        return (self.sigma2 * (g_i + g_m)
                + g_i * i_user[..., :, None, :]
                + g_m * i_user[..., None, :, :]
                + g_m * g_i * (s2 + s_strong[..., None, :, :]))

    def psi_all(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """Eave-SIC-avoidance margin per (eave, user i, subcarrier).

        The margin does not depend on the pairing partner m; the constraint
        asks the value to be >= 0 for every co-scheduled pair whose weaker
        leg i is eligible (no stronger than the eave).  Under the
        "worst_case" view the signed +/- epsilon bounds are used exactly as
        in the robust reformulation (no clipping).
        """
        if not self.E:
            return np.zeros(p.shape[:-2] + (0, self.M, self.N))
        w = rho * p
        load = self.cell_load(w)
        i_user = self.user_cross_interference(load)
        s_strong = self.strong_in_cell(w)
        cross_pos = self._eave_cross(self.g_pos, load)
        cross_i = cross_pos[..., self.serving, :]
        s_all = load[..., self.serving, :] - w
        g_i = self.g_serv[None, :, :]
        return (-self.gn_m * self.sigma2 + g_i * self.sigma2
                - self.gn_m * i_user[..., None, :, :]
                + g_i * cross_i
                - self.gn_m * g_i * s_strong[..., None, :, :]
                + g_i * self.gp_m * s_all[..., None, :, :])

    def psi_scale(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        if not self.E:
            return np.ones(p.shape[:-2] + (0, self.M, self.N))
        w = rho * p
        load = self.cell_load(w)
        i_user = self.user_cross_interference(load)
        s_strong = self.strong_in_cell(w)
        cross_abs = self._eave_cross(np.abs(self.g_pos), load)
        cross_i = cross_abs[..., self.serving, :]
        s_all = load[..., self.serving, :] - w
        g_i = self.g_serv[None, :, :]
        gn = np.abs(self.gn_m)
        gp = np.abs(self.gp_m)
        return (gn * self.sigma2 + g_i * self.sigma2
                + gn * i_user[..., None, :, :] + g_i * cross_i
                + gn * g_i * s_strong[..., None, :, :]
                + g_i * gp * s_all[..., None, :, :])

    # -- constraint checks -------------------------------------------------

    def pair_mask_q(self, rho: np.ndarray) -> np.ndarray:
        """Active legit-SIC pairs (m, i): both scheduled, m dominant."""
        both = rho[..., :, None, :] * rho[..., None, :, :]
        return (both > 0) & self.stronger

    def active_psi_mask(self, rho: np.ndarray) -> np.ndarray:
        """Active avoidance rows (e, i, n): i co-scheduled and eligible."""
        if not self.E:
            return np.zeros(rho.shape[:-2] + (0, self.M, self.N), dtype=bool)
        counts = np.einsum("fm,...mn->...fn", self.S, rho)
        paired = (counts[..., self.serving, :] >= 2) & (rho > 0)
        return paired[..., None, :, :] & self.elig

    def assignment_feasible(self, rho: np.ndarray, p: np.ndarray,
                            enforce_c6: bool = True) -> np.ndarray:
        """Check C1-C3 plus the active SIC constraints, batched."""
        rho = np.asarray(rho, dtype=float)
        binary = np.all((rho == 0) | (rho == 1), axis=(-1, -2))
        counts = np.einsum("fm,...mn->...fn", self.S, rho)
        c2 = np.all(counts <= self.inst.config.ell + 1e-9, axis=(-1, -2))
        spent = self.cell_load(rho * p).sum(axis=-1)
        c1 = np.all(spent <= self.p_max * (1 + REL_TOL) + 1e-15, axis=-1)
        ok = binary & c2 & c1
        q = self.q_all(p, rho)
        qs = self.q_scale(p, rho) + 1e-300
        viol_q = (q / qs > REL_TOL) & self.pair_mask_q(rho)
        ok &= ~np.any(viol_q, axis=(-1, -2, -3))
        if enforce_c6 and self.E:
            psi = self.psi_all(p, rho)
            ps = self.psi_scale(p, rho) + 1e-300
            viol_p = (psi / ps < -REL_TOL) & self.active_psi_mask(rho)
            ok &= ~np.any(viol_p, axis=(-1, -2, -3))
        return ok

    def residuals(self, p: np.ndarray, rho: np.ndarray,
                  upsilon: np.ndarray | None = None,
                  enforce_c6: bool = True) -> dict:
        """Max constraint violations at a point, for reporting."""
        spent = self.cell_load(rho * p).sum(axis=-1)
        out = {
            "C1": float(np.max(np.maximum(spent - self.p_max, 0.0), initial=0.0)),
            "C2": float(np.max(np.maximum(
                np.einsum("fm,mn->fn", self.S, rho) - self.inst.config.ell,
                0.0), initial=0.0)),
            "C4": float(np.max(np.maximum(-p, 0.0), initial=0.0)),
        }
        q = self.q_all(p, rho)
        qs = self.q_scale(p, rho) + 1e-300
        mask = self.pair_mask_q(rho)
        out["C5"] = float(np.max(np.where(mask, q / qs, 0.0), initial=0.0))
        if enforce_c6 and self.E:
            psi = self.psi_all(p, rho)
            ps = self.psi_scale(p, rho) + 1e-300
            mask = self.active_psi_mask(rho)
            out["C6"] = float(np.max(np.where(mask, -psi / ps, 0.0),
                                     initial=0.0))
        else:
            out["C6"] = 0.0
        if upsilon is not None and self.E:
            gap = np.log2(1.0 + self.eave_sinr(p, rho)).max(axis=0) - upsilon
            out["C7"] = float(np.max(np.where(rho > 0, gap, 0.0), initial=0.0))
        else:
            out["C7"] = 0.0
        return out


# -- scalar operations (single-index views of the model) -------------------


def _model(inst, gains, eave_sic=False) -> RateModel:
    return RateModel(inst, gains=gains, eave_sic=eave_sic)


def _check_user(inst, f, m):
    if not (0 <= m < inst.config.M):
        raise IndexError(f"user index {m} out of range")
    if inst.serving[m] != f:
        raise IndexError(f"user {m} is not served by BS {f}")


def user_sinr(inst, p, rho, f, m, n) -> float:
    """SINR of user m (global index) on subcarrier n after SIC."""
    _check_user(inst, f, m)
    if not (0 <= n < inst.config.N):
        raise IndexError(f"subcarrier {n} out of range")
    model = _model(inst, "true")
    return float(model.user_sinr(np.asarray(p, float), np.asarray(rho, float))[m, n])


def eave_sinr(inst, p, rho, f, e, m, n, gains: str = "true") -> float:
    """SINR of eavesdropper e on user m's signal (no SIC at the eave)."""
    _check_user(inst, f, m)
    if not (0 <= e < inst.config.E):
        raise IndexError(f"eavesdropper {e} out of range")
    model = _model(inst, gains)
    return float(model.eave_sinr(np.asarray(p, float),
                                 np.asarray(rho, float))[e, m, n])


def secrecy_rate(inst, p, rho, f, m, n, gains: str = "true") -> float:
    """Clamped secrecy rate of user m on subcarrier n, bits/s/Hz."""
    _check_user(inst, f, m)
    model = _model(inst, gains)
    p = np.asarray(p, float)
    rho = np.asarray(rho, float)
    diff = model.user_rate(p, rho)[m, n] - model.eave_rate_max(p, rho)[m, n]
    return float(max(diff, 0.0))


def sum_secrecy_objective(inst, p, rho, gains: str = "true") -> float:
    """Optimizer objective: scheduled sum of (rate - best eave rate), no clamp."""
    model = _model(inst, gains)
    return float(model.epigraph_objective(np.asarray(p, float),
                                          np.asarray(rho, float)))


def sum_secrecy_rate(inst, p, rho, gains: str = "true") -> float:
    """Reported sum secrecy rate with the per-term clamp."""
    model = _model(inst, gains)
    return float(model.secrecy_sum(np.asarray(p, float),
                                   np.asarray(rho, float)))


def sic_feasibility_q(inst, p, rho, f, m, i, n) -> float:
    """Margin of user m decoding user i; feasible iff <= 0.

    Requires i's channel to be the weaker one (ties broken by index).
    """
    _check_user(inst, f, m)
    _check_user(inst, f, i)
    model = _model(inst, "true")
    if m == i or not model.stronger[m, i, n]:
        raise ValueError("requires user i weaker than user m (after tie-break)")
    return float(model.q_all(np.asarray(p, float),
                             np.asarray(rho, float))[m, i, n])


def sic_avoidance_psi(inst, p, rho, f, m, i, n, e,
                      gains: str = "true") -> float:
    """Margin keeping eave e unable to decode user i; feasible iff >= 0."""
    _check_user(inst, f, m)
    _check_user(inst, f, i)
    if m == i:
        raise ValueError("m and i must differ")
    model = _model(inst, gains)
    if not model.elig[e, i, n]:
        raise ValueError("requires user i no stronger than eavesdropper e")
    return float(model.psi_all(np.asarray(p, float),
                               np.asarray(rho, float))[e, i, n])
