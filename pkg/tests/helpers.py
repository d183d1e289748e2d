"""Shared oracles and instance builders for the test suite.

These are deliberately written against the raw formulas (direct SINR
inequalities, finite differences, exhaustive grids) so the code paths they
check are never used to produce the expected values.
"""

import numpy as np

from nomasec import NetworkConfig, generate, make_instance
from nomasec.rates import RateModel


def unit_config(**over):
    """Unit-scale geometry: gains O(1), noise 1 W, budgets 10/5 W."""
    base = dict(F=2, M_f=(3, 3), E=2, N=2, ell=2, p_max=(10.0, 5.0),
                sigma2=1.0, alpha=4.0, r_mbs=2.0, r_sbs=1.0, epsilon=0.0,
                seed=0)
    base.update(over)
    return NetworkConfig(**base)


def unit_instance(seed=0, **over):
    return generate(unit_config(seed=seed, **over))


def two_user_instance(g_m=4.0, g_i=1.0, g_e=1.0, sigma2=1.0, p_max=10.0):
    """Single BS, two users, one subcarrier, one eavesdropper."""
    return make_instance(
        g_user=np.array([[[g_m], [g_i]]]),
        g_eave_true=np.array([[[g_e]]]),
        M_f=(2,), p_max=(p_max,), sigma2=sigma2)


def random_instance(rng, F=2, M_per=2, E=1, N=2, sigma2=1.0, p_max=None):
    """Instance with i.i.d. log-uniform gains, for property sweeps."""
    M = F * M_per
    g_user = 10.0 ** rng.uniform(-1.5, 1.0, size=(F, M, N))
    g_eave = 10.0 ** rng.uniform(-1.5, 1.0, size=(F, E, N))
    return make_instance(g_user=g_user, g_eave_true=g_eave,
                         M_f=(M_per,) * F, sigma2=sigma2,
                         p_max=p_max or (10.0,) * F)


def random_point(rng, inst, scale=1.0, schedule=None):
    """Random power/assignment pair satisfying C1-C3."""
    c = inst.config
    rho = np.zeros((c.M, c.N))
    for f, members in enumerate(inst.users_of):
        for n in range(c.N):
            k = rng.integers(0, min(c.ell, len(members)) + 1)
            if schedule is not None:
                k = schedule
            sel = rng.choice(members, size=min(k, len(members)),
                             replace=False)
            rho[sel, n] = 1.0
    p = rho * rng.uniform(0, 1, size=rho.shape)
    for f in range(c.F):
        members = inst.users_of[f]
        spent = p[members].sum()
        if spent > 0:
            p[members] *= scale * c.p_max[f] * rng.uniform(0.3, 1.0) / spent
    return p, rho


# -- direct SINR-inequality oracles (independent of the packed margins) ----


def sinr_m_decoding_i(inst, p, rho, m, i, n):
    """User m's SINR on user i's signal, straight from the definition."""
    model = RateModel(inst, "true")
    f = inst.serving[m]
    g_m = model.g_serv[m, n]
    w = rho * p
    incell = sum(w[l, n] for l in inst.users_of[f]
                 if l != i and (model.stronger[l, m, n] or l == m))
    load = model.cell_load(w)
    cross = sum(inst.g_user[fp, m, n] * load[fp, n]
                for fp in range(inst.config.F) if fp != f)
    return p[i, n] * g_m / (g_m * incell + cross + inst.config.sigma2)


def sinr_own(inst, p, rho, i, n):
    """User i's SINR on its own signal (the rate-bearing one)."""
    model = RateModel(inst, "true")
    f = inst.serving[i]
    g_i = model.g_serv[i, n]
    w = rho * p
    incell = sum(w[l, n] for l in inst.users_of[f]
                 if l != i and model.stronger[l, i, n])
    load = model.cell_load(w)
    cross = sum(inst.g_user[fp, i, n] * load[fp, n]
                for fp in range(inst.config.F) if fp != f)
    return p[i, n] * g_i / (g_i * incell + cross + inst.config.sigma2)


def sinr_e_decoding_i(inst, p, rho, e, i, n, f):
    """Eave e's SINR on user i's signal with no SIC, from the definition."""
    model = RateModel(inst, "true")
    g_e = inst.g_eave_true[f, e, n]
    w = rho * p
    incell = sum(w[l, n] for l in inst.users_of[f] if l != i)
    load = model.cell_load(w)
    cross = sum(inst.g_eave_true[fp, e, n] * load[fp, n]
                for fp in range(inst.config.F) if fp != f)
    return p[i, n] * g_e / (g_e * incell + cross + inst.config.sigma2)


# -- brute-force grids -------------------------------------------------------


def grid_two_user_fixed_rho(model, rho, n_axis=200, zoom=1):
    """Exhaustive grid over two scheduled powers at fixed assignment."""
    (m1, n1), (m2, n2) = [tuple(s) for s in np.argwhere(rho > 0.5)]
    pmax = model.p_max[model.serving[m1]]
    lo1 = lo2 = 0.0
    hi1 = hi2 = pmax
    best, best_p = -np.inf, None
    for _ in range(zoom):
        g1 = np.linspace(lo1, hi1, n_axis)
        g2 = np.linspace(lo2, hi2, n_axis)
        A, B = np.meshgrid(g1, g2, indexing="ij")
        P = np.zeros((A.size, model.M, model.N))
        P[:, m1, n1] = A.ravel()
        P[:, m2, n2] = B.ravel()
        rhob = np.broadcast_to(rho, P.shape)
        feas = model.assignment_feasible(rhob, P)
        vals = np.where(feas, model.epigraph_objective(P, rhob), -np.inf)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, best_p = float(vals[j]), P[j].copy()
        s1, s2 = g1[1] - g1[0], g2[1] - g2[0]
        lo1, hi1 = max(0, best_p[m1, n1] - s1), min(pmax, best_p[m1, n1] + s1)
        lo2, hi2 = max(0, best_p[m2, n2] - s2), min(pmax, best_p[m2, n2] + s2)
    return best, best_p


def grid_power_only(model, n_axis=300, zoom=2):
    """Power-only global grid for a 1-BS, 2-user, 1-subcarrier instance."""
    assert model.M == 2 and model.N == 1
    pmax = model.p_max[0]
    ones = np.ones((2, 1))
    lo = np.zeros(2)
    hi = np.full(2, pmax)
    best, best_p = -np.inf, None
    for _ in range(zoom):
        g1 = np.linspace(lo[0], hi[0], n_axis)
        g2 = np.linspace(lo[1], hi[1], n_axis)
        A, B = np.meshgrid(g1, g2, indexing="ij")
        ok = (A + B) <= pmax + 1e-12
        P = np.zeros((A.size, 2, 1))
        P[:, 0, 0] = A.ravel()
        P[:, 1, 0] = B.ravel()
        rho = (P > 0).astype(float)
        feas = model.assignment_feasible(rho, P) & ok.ravel()
        vals = np.where(feas, model.epigraph_objective(P, ones), -np.inf)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, best_p = float(vals[j]), P[j].copy()
        s = np.array([g1[1] - g1[0], g2[1] - g2[0]])
        lo = np.maximum(0, best_p[:, 0] - s)
        hi = np.minimum(pmax, best_p[:, 0] + s)
    return best, best_p


def grid_power_only_two_sub(model, n_split=25, n_axis=80, stages=3):
    """Split-budget grid for a 1-BS, 2-user, 2-subcarrier instance.

    With one BS the subcarriers decouple given a budget split, so each split
    value costs two independent 2-D grids; the split window zooms around the
    incumbent across stages.
    """
    assert model.M == 2 and model.N == 2 and model.F == 1
    pmax = model.p_max[0]
    ones = np.ones((2, 2))

    def value(P):
        rho = (P > 0).astype(float)
        feas = model.assignment_feasible(rho, P)
        return np.where(feas, model.epigraph_objective(P, ones), -np.inf)

    s_lo, s_hi = 0.0, 1.0
    best, best_p, best_s = -np.inf, None, 0.5
    for _ in range(stages):
        for s in np.linspace(s_lo, s_hi, n_split):
            budgets = (s * pmax, (1 - s) * pmax)
            Pfull = np.zeros((2, 2))
            for n in range(2):
                g = np.linspace(0, budgets[n], n_axis)
                A, B = np.meshgrid(g, g, indexing="ij")
                ok = (A + B) <= budgets[n] + 1e-12
                P = np.zeros((A.size, 2, 2))
                P[:, 0, n] = A.ravel()
                P[:, 1, n] = B.ravel()
                vals = np.where(ok.ravel(), value(P), -np.inf)
                Pfull[:, n] = P[int(np.argmax(vals))][:, n]
            v = float(value(Pfull[None])[0])
            if v > best:
                best, best_p, best_s = v, Pfull.copy(), s
        w = (s_hi - s_lo) / (n_split - 1)
        s_lo, s_hi = max(0.0, best_s - w), min(1.0, best_s + w)
    return best, best_p


def finite_diff_grad(fun, p, h=1e-6):
    """Central finite differences over all power coordinates."""
    grad = np.zeros_like(p)
    it = np.nditer(p, flags=["multi_index"])
    while not it.finished:
        k = it.multi_index
        hp = p.copy()
        hm = p.copy()
        step = h * max(1.0, abs(p[k]))
        hp[k] += step
        hm[k] = max(hm[k] - step, 0.0)
        grad[k] = (fun(hp) - fun(hm)) / (hp[k] - hm[k])
        it.iternext()
    return grad
