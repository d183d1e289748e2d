"""Per-iteration power allocation at fixed assignment.

The epigraph objective term and the eavesdropper-rate constraint are each a
difference of two logs of affine power expressions.  The concave minuend of
the objective (``h``) is replaced by its tangent plane at the anchor (an
overestimator), and the convex subtrahend of the constraint (``phi``) by its
tangent plane (an underestimator), so the surrogate problem is convex and
conservative: every surrogate-feasible point satisfies the true constraints,
and the true objective can only improve over the anchor.

All quantities in this module are natural-log scale; callers convert slack
variables and objectives to bits at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .network import NetworkInstance
from .rates import RateModel

LN2 = float(np.log(2.0))


class SubproblemError(RuntimeError):
    """Power subproblem could not be posed or solved from the given anchor."""


# ---------------------------------------------------------------------------
# affine coefficient tables for the log terms
# ---------------------------------------------------------------------------


def _objective_coeffs(model: RateModel, rho: np.ndarray):
    """Coefficient arrays for the user-side log arguments.

    ``cg``/``ch`` have shape (M, N, M): weight of p[a, n] in the log argument
    of target (m, n).  Cross-subcarrier weights are identically zero and not
    stored.  ``cg`` includes the target's own power (no assignment factor);
    ``ch`` drops it.
    """
    serving = model.serving
    strong_mna = np.transpose(model.stronger, (1, 2, 0))  # [m, n, a]
    rho_na = np.swapaxes(rho, 0, 1)  # (N, M)
    ch = strong_mna * model.g_serv[:, :, None] * rho_na[None, :, :]
    cross = serving[None, :] != serving[:, None]  # [m, a]
    g_cross = np.transpose(model.inst.g_user[serving], (1, 2, 0))  # [m, n, a]
    ch = ch + cross[:, None, :] * g_cross * rho_na[None, :, :]
    cg = ch + np.eye(model.M)[:, None, :] * model.g_serv[:, :, None]
    return cg, ch


def _eave_coeffs(model: RateModel, rho: np.ndarray):
    """Coefficient arrays for the eave-side log arguments.

    ``cphi``/``cim`` have shape (E, M, N, M): weight of p[a, n] in the log
    argument for row (eave e, target m, n).  ``cphi`` includes the target's
    own power through the direct-link gain table; ``cim`` drops it.
    """
    E, M = model.E, model.M
    if not E:
        z = np.zeros((0, M, model.N, M))
        return z, z
    serving = model.serving
    rho_na = np.swapaxes(rho, 0, 1)  # (N, M)
    mask_a = np.transpose(model.eave_int_mask, (0, 2, 1))  # (E, N, a)
    incell = (model.gi_m[:, :, :, None]
              * model.samecell.T[None, :, None, :]
              * (mask_a[:, None, :, :] * rho_na[None, None, :, :]))
    cross = serving[None, :] != serving[:, None]  # [m, a]
    g_int_an = np.transpose(model.g_int[serving], (1, 0, 2))  # (E, a, N)
    crossterm = (cross[None, :, None, :]
                 * np.swapaxes(g_int_an, 1, 2)[:, None, :, :]
                 * rho_na[None, None, :, :])
    cim = incell + crossterm
    cphi = cim + np.eye(M)[None, :, None, :] * model.gd_m[:, :, :, None]
    return cphi, cim


def _log_arg(coeff: np.ndarray, p: np.ndarray, sigma2: float) -> np.ndarray:
    """Evaluate A p + sigma^2 for per-subcarrier coefficient tables."""
    return np.einsum("...na,an->...n", coeff, p) + sigma2


# ---------------------------------------------------------------------------
# spec-level evaluators and linearizations
# ---------------------------------------------------------------------------


@dataclass
class DcLinearization:
    """Tangent data of the nonconvex pieces at one anchor point."""

    anchor: np.ndarray
    h_val: np.ndarray        # (M, N)
    grad_h: np.ndarray       # (M, N, M, N)
    phi_val: np.ndarray      # (E, M, N)
    grad_phi: np.ndarray     # (E, M, N, M, N)

    def h_tilde(self, p: np.ndarray) -> np.ndarray:
        """Affine overestimator of the concave objective minuend."""
        d = p - self.anchor
        return self.h_val + np.einsum("mnab,ab->mn", self.grad_h, d)

    def phi_tilde(self, p: np.ndarray) -> np.ndarray:
        """Affine underestimator of the convex constraint subtrahend."""
        d = p - self.anchor
        return self.phi_val + np.einsum("emnab,ab->emn", self.grad_phi, d)


def eval_g(inst: NetworkInstance, p, rho, upsilon, f, m, n) -> float:
    """Concave part of the epigraph objective term; upsilon in nats."""
    model = RateModel(inst, "true")
    cg, _ = _objective_coeffs(model, np.asarray(rho, float))
    val = _log_arg(cg, np.asarray(p, float), model.sigma2)
    return float(np.log(val[m, n]) - np.asarray(upsilon, float)[m, n])


def eval_h(inst: NetworkInstance, p, rho, f, m, n) -> float:
    """Concave minuend subtracted from eval_g."""
    model = RateModel(inst, "true")
    _, ch = _objective_coeffs(model, np.asarray(rho, float))
    val = _log_arg(ch, np.asarray(p, float), model.sigma2)
    return float(np.log(val[m, n]))


def eval_im(inst: NetworkInstance, p, rho, upsilon, f, e, m, n,
            gains: str = "true") -> float:
    """Convex part of the eave-rate constraint; upsilon in nats."""
    model = RateModel(inst, gains)
    _, cim = _eave_coeffs(model, np.asarray(rho, float))
    val = _log_arg(cim[e], np.asarray(p, float), model.sigma2)
    return float(-np.log(val[m, n]) - np.asarray(upsilon, float)[m, n])


def eval_phi(inst: NetworkInstance, p, rho, f, e, m, n,
             gains: str = "true") -> float:
    """Convex subtrahend of the eave-rate constraint."""
    model = RateModel(inst, gains)
    cphi, _ = _eave_coeffs(model, np.asarray(rho, float))
    val = _log_arg(cphi[e], np.asarray(p, float), model.sigma2)
    return float(-np.log(val[m, n]))


def linearize_h(inst_or_model, rho, anchor) -> tuple[np.ndarray, np.ndarray]:
    """Value and gradient of the objective minuend at the anchor.

    Gradient entries follow the three-case rule: in-cell stronger-channel
    coordinates, other-cell coordinates, zero elsewhere (including the
    target's own power).
    """
    model = (inst_or_model if isinstance(inst_or_model, RateModel)
             else RateModel(inst_or_model, "true"))
    rho = np.asarray(rho, float)
    anchor = np.asarray(anchor, float)
    _, ch = _objective_coeffs(model, rho)
    d = _log_arg(ch, anchor, model.sigma2)
    h_val = np.log(d)
    M, N = model.M, model.N
    grad = np.zeros((M, N, M, N))
    idx = np.arange(N)
    grad[:, idx, :, idx] = np.transpose(ch / d[:, :, None], (1, 0, 2))
    return h_val, grad


def linearize_phi(inst_or_model, rho, anchor, gains: str = "true",
                  eave_sic: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Value and gradient of the eave-constraint subtrahend at the anchor."""
    model = (inst_or_model if isinstance(inst_or_model, RateModel)
             else RateModel(inst_or_model, gains, eave_sic=eave_sic))
    rho = np.asarray(rho, float)
    anchor = np.asarray(anchor, float)
    cphi, _ = _eave_coeffs(model, rho)
    d = _log_arg(cphi, anchor, model.sigma2)
    phi_val = -np.log(d)
    E, M, N = model.E, model.M, model.N
    grad = np.zeros((E, M, N, M, N))
    idx = np.arange(N)
    grad[:, :, idx, :, idx] = np.transpose(-cphi / d[..., None], (2, 0, 1, 3))
    return phi_val, grad


def linearize(inst_or_model, rho, anchor, gains: str = "true",
              eave_sic: bool = False) -> DcLinearization:
    model = (inst_or_model if isinstance(inst_or_model, RateModel)
             else RateModel(inst_or_model, gains, eave_sic=eave_sic))
    h_val, grad_h = linearize_h(model, rho, anchor)
    phi_val, grad_phi = linearize_phi(model, rho, anchor)
    return DcLinearization(anchor=np.asarray(anchor, float), h_val=h_val,
                           grad_h=grad_h, phi_val=phi_val, grad_phi=grad_phi)


# ---------------------------------------------------------------------------
# the convex surrogate and its barrier solver
# ---------------------------------------------------------------------------


@dataclass
class PowerSolveInfo:
    newton_iters: int = 0
    stalled: bool = False
    surrogate_objective_nats: float = 0.0
    message: str = ""


class PowerSubproblem:
    """Convex surrogate of the power step, over scheduled coordinates only.

    Variables are x = [p_k; upsilon_t] for the K scheduled (user, subcarrier)
    slots.  Rows:

    * per-BS budget (linear)
    * nonnegativity of p and upsilon
    * legit-SIC and eave-SIC-avoidance margins (affine in p at fixed rho)
    * surrogate eave-rate rows ``-log(a.p + s2) - upsilon - phi_tilde <= 0``
    """

    def __init__(self, model: RateModel, rho: np.ndarray, anchor_p: np.ndarray,
                 anchor_upsilon_nats: np.ndarray | None = None,
                 enforce_c6: bool = True):
        self.model = model
        self.rho = np.asarray(rho, float)
        self.enforce_c6 = enforce_c6
        sched = np.argwhere(self.rho > 0.5)
        if sched.size == 0:
            raise SubproblemError("no scheduled (user, subcarrier) slots")
        self.K = len(sched)
        self.sm = sched[:, 0]
        self.sn = sched[:, 1]
        self.cell = model.serving[self.sm]

        anchor_p = np.asarray(anchor_p, float)
        self.anchor_full = np.where(self.rho > 0.5, anchor_p, 0.0)
        self.p0 = self.anchor_full[self.sm, self.sn]

        same_sub = self.sn[:, None] == self.sn[None, :]
        cg, ch = _objective_coeffs(model, self.rho)
        self.Ag = cg[self.sm, self.sn][:, self.sm] * same_sub
        Ah = ch[self.sm, self.sn][:, self.sm] * same_sub
        dh0 = Ah @ self.p0 + model.sigma2
        self.h0 = np.log(dh0)
        self.gh = Ah / dh0[:, None]

        E = model.E
        if E:
            cphi, cim = _eave_coeffs(model, self.rho)
            Aphi = (cphi[:, self.sm, self.sn][:, :, self.sm]
                    * same_sub[None]).reshape(E * self.K, self.K)
            self.Aim = (cim[:, self.sm, self.sn][:, :, self.sm]
                        * same_sub[None]).reshape(E * self.K, self.K)
            dphi0 = Aphi @ self.p0 + model.sigma2
            gphi = -Aphi / dphi0[:, None]
            # phi_tilde(p) = phi_lin_const + gphi . p
            self.phi_lin_const = -np.log(dphi0) - gphi @ self.p0
            self.gphi = gphi
            self.row_target = np.tile(np.arange(self.K), E)
        else:
            self.Aim = np.zeros((0, self.K))
            self.phi_lin_const = np.zeros(0)
            self.gphi = np.zeros((0, self.K))
            self.row_target = np.zeros(0, dtype=int)
        self.n_eave_rows = self.Aim.shape[0]

        self._build_affine_rows()
        self.shift = np.zeros(len(self.d))

        if anchor_upsilon_nats is None:
            self.u0 = self.tight_upsilon(self.p0)
        else:
            self.u0 = np.asarray(anchor_upsilon_nats, float)[self.sm, self.sn]

    # -- affine machinery -------------------------------------------------

    def _expand(self, p_sched: np.ndarray) -> np.ndarray:
        pp = np.atleast_2d(p_sched)
        full = np.zeros((pp.shape[0], self.model.M, self.model.N))
        full[:, self.sm, self.sn] = pp
        return full if p_sched.ndim > 1 else full[0]

    def _build_affine_rows(self):
        """Extract the SIC margins as affine rows by probing basis vectors."""
        model, rho = self.model, self.rho
        basis = np.vstack([np.zeros(self.K), np.eye(self.K)])
        full = self._expand(basis)
        rows, consts, labels = [], [], []
        q = model.q_all(full, rho[None])
        for (m, i, n) in np.argwhere(model.pair_mask_q(rho)):
            base = q[0, m, i, n]
            rows.append(q[1:, m, i, n] - base)
            consts.append(base)
            labels.append("C5")
        if self.enforce_c6 and model.E:
            psi = model.psi_all(full, rho[None])
            for (e, i, n) in np.argwhere(model.active_psi_mask(rho)):
                base = psi[0, e, i, n]
                rows.append(-(psi[1:, e, i, n] - base))
                consts.append(-base)
                labels.append("C6")
        for f in range(model.F):
            coef = (self.cell == f).astype(float)
            if coef.any():
                rows.append(coef)
                consts.append(-model.p_max[f])
                labels.append("C1")
        keep = ([], [], [])
        for coef, const, lab in zip(rows, consts, labels):
            scale = np.abs(coef).sum() + abs(const) + 1e-300
            if np.abs(coef).max(initial=0.0) <= 1e-14 * scale:
                if const > 1e-9 * scale:
                    raise SubproblemError(
                        f"anchor assignment violates a constant {lab} row")
                continue
            keep[0].append(coef / scale)
            keep[1].append(const / scale)
            keep[2].append(lab)
        self.L = np.vstack(keep[0]) if keep[0] else np.zeros((0, self.K))
        self.d = np.asarray(keep[1], float)
        self.labels = keep[2]

    # -- evaluations -------------------------------------------------------

    def eave_bound(self, p: np.ndarray) -> np.ndarray:
        """Surrogate per-row eave rate bound s(p); upsilon must dominate it."""
        if not self.n_eave_rows:
            return np.zeros(0)
        dim = self.Aim @ p + self.model.sigma2
        return -np.log(dim) - (self.phi_lin_const + self.gphi @ p)

    def tight_upsilon(self, p: np.ndarray) -> np.ndarray:
        """Smallest feasible slack per scheduled slot under the surrogate."""
        if not self.n_eave_rows:
            return np.zeros(self.K)
        s = self.eave_bound(p).reshape(self.model.E, self.K)
        return np.maximum(s.max(axis=0), 0.0)

    def surrogate_objective(self, p: np.ndarray, ups: np.ndarray) -> float:
        dg = self.Ag @ p + self.model.sigma2
        h_t = self.h0 + self.gh @ (p - self.p0)
        return float(np.sum(np.log(dg) - ups - h_t))

    def true_objective(self, p: np.ndarray) -> float:
        """True epigraph objective (nats) at tight slack, for ascent checks."""
        full = self._expand(p)
        r = self.model.user_rate(full, self.rho) * LN2
        u = self.model.eave_rate_max(full, self.rho) * LN2
        return float((self.rho * (r - u)).sum())

    # -- barrier solver ----------------------------------------------------

    def _interior_start(self):
        p = self.p0.copy()
        p = np.maximum(p, 1e-6 * self.model.p_max[self.cell])
        for f in range(self.model.F):
            sel = self.cell == f
            tot = p[sel].sum()
            cap = self.model.p_max[f] * (1.0 - 1e-6)
            if sel.any() and tot > cap:
                p[sel] *= cap / tot
        if len(self.d):
            slack = self.L @ p + self.d
            worst = float(slack.max())
            if worst > 1e-6:
                lab = self.labels[int(np.argmax(slack))]
                raise SubproblemError(
                    f"anchor infeasible: {lab} row violated by {worst:.3e}")
            # relax rows that are active at the anchor by a hair so the
            # barrier has an interior; the final residual stays below tol
            self.shift = np.maximum(slack + 1e-9, 0.0)
        nudge = max(1e-6, 1e-3 * float(np.abs(self.u0).max(initial=0.0)))
        ups = self.tight_upsilon(p) + nudge
        return p, ups

    def _f_value(self, x: np.ndarray, t: float):
        """Barrier objective value only (line-search helper)."""
        K = self.K
        p, ups = x[:K], x[K:]
        if np.any(p <= 0) or np.any(ups <= 0):
            return None
        dg = self.Ag @ p + self.model.sigma2
        obj = np.sum(np.log(dg)) - np.sum(ups) - np.sum(self.gh @ (p - self.p0))
        val = -t * obj - np.sum(np.log(p)) - np.sum(np.log(ups))
        if len(self.d):
            r = self.L @ p + self.d - self.shift
            if r.max() >= 0:
                return None
            val -= np.sum(np.log(-r))
        if self.n_eave_rows:
            dim = self.Aim @ p + self.model.sigma2
            if dim.min() <= 0:
                return None
            s = -np.log(dim) - (self.phi_lin_const + self.gphi @ p)
            r = s - ups[self.row_target]
            if r.max() >= 0:
                return None
            val -= np.sum(np.log(-r))
        return val

    def _f_grad_hess(self, x: np.ndarray, t: float):
        K = self.K
        p, ups = x[:K], x[K:]
        if np.any(p <= 0) or np.any(ups <= 0):
            return None
        dg = self.Ag @ p + self.model.sigma2
        obj = np.sum(np.log(dg)) - np.sum(ups) - np.sum(self.gh @ (p - self.p0))
        gobj = np.empty(2 * K)
        gobj[:K] = self.Ag.T @ (1.0 / dg) - self.gh.sum(axis=0)
        gobj[K:] = -1.0

        val = -t * obj
        grad = -t * gobj
        hess = np.zeros((2 * K, 2 * K))
        aw = self.Ag / dg[:, None]
        hess[:K, :K] += t * (aw.T @ aw)

        if len(self.d):
            r = self.L @ p + self.d - self.shift
            if r.max() >= 0:
                return None
            val -= np.sum(np.log(-r))
            grad[:K] += self.L.T @ (-1.0 / r)
            lw = self.L / r[:, None]
            hess[:K, :K] += lw.T @ lw

        val -= np.sum(np.log(p)) + np.sum(np.log(ups))
        grad[:K] -= 1.0 / p
        grad[K:] -= 1.0 / ups
        hess[:K, :K] += np.diag(1.0 / p ** 2)
        hess[K:, K:] += np.diag(1.0 / ups ** 2)

        if self.n_eave_rows:
            dim = self.Aim @ p + self.model.sigma2
            if dim.min() <= 0:
                return None
            s = -np.log(dim) - (self.phi_lin_const + self.gphi @ p)
            r = s - ups[self.row_target]
            if r.max() >= 0:
                return None
            val -= np.sum(np.log(-r))
            gp = -self.Aim / dim[:, None] - self.gphi
            w = -1.0 / r
            grad[:K] += gp.T @ w
            np.add.at(grad, K + self.row_target, -w)
            gw = gp / r[:, None]
            hess[:K, :K] += gw.T @ gw
            aw2 = self.Aim / dim[:, None] * np.sqrt(w)[:, None]
            hess[:K, :K] += aw2.T @ aw2
            gw2 = gp / (r ** 2)[:, None]
            inv_r2 = 1.0 / r ** 2
            for j in range(K):
                sel = self.row_target == j
                if np.any(sel):
                    v = -gw2[sel].sum(axis=0)
                    hess[:K, K + j] += v
                    hess[K + j, :K] += v
                    hess[K + j, K + j] += inv_r2[sel].sum()
        return val, grad, hess

    def solve(self, tol: float = 1e-6, max_newton: int = 200):
        p, ups = self._interior_start()
        x = np.concatenate([p, ups])
        n_con = len(self.d) + 2 * self.K + self.n_eave_rows
        t = 1.0
        total_newton = 0
        info = PowerSolveInfo()
        while True:
            for _ in range(60):
                if total_newton >= max_newton:
                    break
                out = self._f_grad_hess(x, t)
                if out is None:
                    raise SubproblemError("barrier iterate left the domain")
                val, grad, hess = out
                try:
                    cf = scipy.linalg.cho_factor(
                        hess + 1e-12 * np.eye(len(x)), lower=True)
                    dx = -scipy.linalg.cho_solve(cf, grad)
                except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                    dx = -np.linalg.lstsq(hess, grad, rcond=None)[0]
                lam2 = float(-grad @ dx)
                total_newton += 1
                if not np.isfinite(lam2) or lam2 <= 0 or lam2 / 2.0 <= 1e-10:
                    break
                step, ok = 1.0, False
                for _ in range(60):
                    v2 = self._f_value(x + step * dx, t)
                    if v2 is not None and v2 <= val - 1e-4 * step * lam2:
                        ok = True
                        break
                    step *= 0.5
                if not ok:
                    break
                x = x + step * dx
            if n_con / t < tol or total_newton >= max_newton:
                break
            t *= 20.0
        info.newton_iters = total_newton
        p = self._extrapolate(x[:self.K], tol)
        ups = self.tight_upsilon(p)
        obj = self.surrogate_objective(p, ups)
        obj0 = self.surrogate_objective(self.p0, self.u0)
        if not np.isfinite(obj) or obj < obj0 - tol:
            # a no-op step is a valid (stalled) outcome; ascent never breaks
            p, ups = self.p0.copy(), self.u0.copy()
            obj = obj0
            info.stalled = True
            info.message = "barrier result below anchor; anchor kept"
        info.surrogate_objective_nats = obj
        return p, ups, info

    _STEP_GRID = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0)

    def _extrapolate(self, p_hat: np.ndarray, tol: float) -> np.ndarray:
        """Step-size search along the solve direction.

        The tangent term damps each surrogate solve, so plain re-anchoring
        contracts slowly in flat directions.  Candidates beyond the solve
        point are kept only while they stay feasible for every affine row
        and keep the surrogate objective at or above the anchor's, so the
        ascent guarantee survives; among those the best true objective wins.
        """
        d = p_hat - self.p0
        scale = float(np.abs(p_hat).max(initial=0.0))
        if float(np.abs(d).max(initial=0.0)) <= 1e-12 * (scale + 1e-30):
            return p_hat
        s_max = np.inf
        if len(self.d):
            c0 = self.L @ self.p0 + self.d
            slope = self.L @ d
            capped = slope > 1e-15
            if capped.any():
                s_max = float(np.min(-c0[capped] / slope[capped]))
        neg = d < -1e-18
        if neg.any():
            s_max = min(s_max, float(np.min(self.p0[neg] / -d[neg])))
        steps = [s for s in self._STEP_GRID if s <= s_max + 1e-12]
        if len(steps) <= 1:
            return p_hat
        cand = self.p0[None] + np.asarray(steps)[:, None] * d[None]
        cand = np.maximum(cand, 0.0)
        obj0 = self.surrogate_objective(self.p0, self.u0)
        best_p, best_true = p_hat, self.true_objective(p_hat)
        full = self._expand(cand)
        r = self.model.user_rate(full, self.rho) * LN2
        u = self.model.eave_rate_max(full, self.rho) * LN2
        true_vals = (self.rho * (r - u)).sum(axis=(-1, -2))
        for j, s in enumerate(steps):
            if s == 1.0 or true_vals[j] <= best_true:
                continue
            pj = cand[j]
            if len(self.d) and (self.L @ pj + self.d).max() > 1e-12:
                continue
            if self.surrogate_objective(pj, self.tight_upsilon(pj)) < obj0 - tol:
                continue
            best_p, best_true = pj, float(true_vals[j])
        return best_p

    def pack(self, p_sched: np.ndarray, ups_sched: np.ndarray):
        p_full = self.anchor_full.copy()
        p_full[self.sm, self.sn] = p_sched
        u_full = np.zeros((self.model.M, self.model.N))
        u_full[self.sm, self.sn] = ups_sched
        return p_full, u_full


def solve_power_subproblem(inst_or_model, rho, anchor_p, anchor_upsilon=None,
                           tol: float = 1e-6, max_newton: int = 200,
                           gains: str = "true", eave_sic: bool = False,
                           enforce_c6: bool = True):
    """One convex surrogate solve from a feasible anchor.

    Returns ``(p, upsilon_bits, surrogate_objective_bits, info)`` with full
    (M, N)-shaped arrays; unscheduled coordinates of ``anchor_p`` pass
    through untouched so probe power survives across iterations.
    """
    model = (inst_or_model if isinstance(inst_or_model, RateModel)
             else RateModel(inst_or_model, gains, eave_sic=eave_sic))
    rho = np.asarray(rho, float)
    anchor_p = np.asarray(anchor_p, float)
    if np.any(anchor_p < 0):
        raise SubproblemError("anchor has negative power (C4 violated)")
    ups_nats = None
    if anchor_upsilon is not None:
        ups_nats = np.asarray(anchor_upsilon, float) * LN2
    prob = PowerSubproblem(model, rho, anchor_p, ups_nats,
                           enforce_c6=enforce_c6)
    p_sched, ups_sched, info = prob.solve(tol=tol, max_newton=max_newton)
    p_full, u_full = prob.pack(p_sched, ups_sched)
    unsched = prob.rho <= 0.5
    p_full[unsched] = anchor_p[unsched]
    return p_full, u_full / LN2, info.surrogate_objective_nats / LN2, info
