import numpy as np
import pytest

from nomasec import (eave_sinr, make_instance, secrecy_rate,
                     sic_avoidance_psi, sic_feasibility_q,
                     sum_secrecy_objective, sum_secrecy_rate, user_sinr)
from nomasec.rates import RateModel
from helpers import (random_instance, random_point, sinr_e_decoding_i,
                     sinr_m_decoding_i, sinr_own, two_user_instance,
                     unit_instance)


def _arrays(inst, pairs):
    p = np.zeros((inst.config.M, inst.config.N))
    rho = np.zeros_like(p)
    for (m, n, val) in pairs:
        p[m, n] = val
        rho[m, n] = 1.0
    return p, rho


class TestUserSinr:
    def test_no_interference(self):
        inst = make_instance(np.array([[[2.0]]]), np.array([[[0.5]]]),
                             M_f=(1,), sigma2=1.0)
        p, rho = _arrays(inst, [(0, 0, 1.0)])
        assert user_sinr(inst, p, rho, 0, 0, 0) == pytest.approx(2.0)

    def test_two_user_sic(self):
        # strong user decodes clean, weak user sees the strong signal
        inst = two_user_instance(g_m=4.0, g_i=1.0)
        p, rho = _arrays(inst, [(0, 0, 1.0), (1, 0, 2.0)])
        assert user_sinr(inst, p, rho, 0, 0, 0) == pytest.approx(4.0)
        assert user_sinr(inst, p, rho, 0, 1, 0) == pytest.approx(1.0)

    def test_zero_power(self):
        inst = two_user_instance()
        p, rho = _arrays(inst, [(0, 0, 0.0), (1, 0, 2.0)])
        assert user_sinr(inst, p, rho, 0, 0, 0) == 0.0

    def test_index_errors(self):
        inst = unit_instance(seed=1)
        p = np.zeros((inst.config.M, inst.config.N))
        with pytest.raises(IndexError):
            user_sinr(inst, p, p, 1, 0, 0)   # user 0 is served by BS 0
        with pytest.raises(IndexError):
            user_sinr(inst, p, p, 0, 99, 0)


class TestEaveSinr:
    def test_no_sic_at_eave(self):
        inst = two_user_instance(g_m=4.0, g_i=1.0, g_e=1.0)
        p, rho = _arrays(inst, [(0, 0, 1.0), (1, 0, 2.0)])
        assert eave_sinr(inst, p, rho, 0, 0, 0, 0) == pytest.approx(1.0 / 3.0)

    def test_zero_uncertainty_collapses_worst_case(self):
        inst = unit_instance(seed=2, epsilon=0.0)
        rng = np.random.default_rng(0)
        p, rho = random_point(rng, inst)
        w = RateModel(inst, "worst_case").eave_sinr(p, rho)
        e = RateModel(inst, "est").eave_sinr(p, rho)
        assert np.array_equal(w, e)

    def test_worst_case_dominates_sampled_truths(self):
        rng = np.random.default_rng(3)
        eps = 0.4
        base = random_instance(rng, F=2, M_per=2, E=2, N=2)
        est = base.g_eave_true.copy()
        p, rho = random_point(rng, base)
        worst = None
        for _ in range(1000):
            err = rng.uniform(-eps, eps, size=est.shape)
            g_true = np.maximum(est + err, 1e-9)
            inst = make_instance(base.g_user, g_true, M_f=(2, 2),
                                 g_eave_est=est, epsilon=eps,
                                 p_max=base.config.p_max)
            sampled = RateModel(inst, "true").eave_sinr(p, rho)
            if worst is None:
                worst = RateModel(inst, "worst_case").eave_sinr(p, rho)
            assert np.all(sampled <= worst + 1e-12)


class TestSecrecy:
    def test_identical_gain_and_interference_zero_secrecy(self):
        # the weak user decodes without SIC, so an eave with the same gain
        # sees exactly the same SINR and the clamp pins secrecy at zero
        inst = two_user_instance(g_m=4.0, g_i=1.0, g_e=1.0)
        p, rho = _arrays(inst, [(0, 0, 1.0), (1, 0, 2.0)])
        assert secrecy_rate(inst, p, rho, 0, 1, 0) == 0.0

    def test_no_eavesdroppers_gives_user_rate(self):
        inst = make_instance(np.array([[[3.0]]]),
                             np.zeros((1, 0, 1)), M_f=(1,), sigma2=1.0)
        p, rho = _arrays(inst, [(0, 0, 1.0)])
        assert secrecy_rate(inst, p, rho, 0, 0, 0) == pytest.approx(2.0)

    def test_single_user_hand_value(self):
        # log2(1+3) - log2(1+1) = 1
        inst = make_instance(np.array([[[3.0]]]), np.array([[[1.0]]]),
                             M_f=(1,), sigma2=1.0)
        p, rho = _arrays(inst, [(0, 0, 1.0)])
        assert secrecy_rate(inst, p, rho, 0, 0, 0) == pytest.approx(1.0)

    def test_sum_objective_trivial_zeros(self):
        inst = unit_instance(seed=4)
        z = np.zeros((inst.config.M, inst.config.N))
        ones = np.ones_like(z)
        assert sum_secrecy_objective(inst, z, z) == 0.0
        assert sum_secrecy_objective(inst, z, ones) == 0.0

    def test_sum_objective_matches_per_term_ops(self):
        inst = two_user_instance(g_m=4.0, g_i=1.0, g_e=0.25)
        p, rho = _arrays(inst, [(0, 0, 1.0), (1, 0, 2.0)])
        total = sum(
            np.log2(1 + user_sinr(inst, p, rho, 0, m, 0))
            - np.log2(1 + eave_sinr(inst, p, rho, 0, 0, m, 0))
            for m in (0, 1))
        assert sum_secrecy_objective(inst, p, rho) == pytest.approx(total)

    def test_clamped_sum_never_negative(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            inst = random_instance(rng, E=2)
            p, rho = random_point(rng, inst)
            assert sum_secrecy_rate(inst, p, rho) >= 0.0

    def test_secrecy_nonincreasing_in_eave_gain(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            inst = random_instance(rng, F=1, M_per=2, E=1, N=1)
            p, rho = random_point(rng, inst, schedule=2)
            base = sum_secrecy_rate(inst, p, rho)
            bumped = make_instance(inst.g_user, inst.g_eave_true * 1.5,
                                   M_f=(2,), p_max=inst.config.p_max)
            assert sum_secrecy_rate(bumped, p, rho) <= base + 1e-12


class TestSicFeasibility:
    def test_two_user_closed_form(self):
        inst = two_user_instance(g_m=4.0, g_i=1.0)
        p, rho = _arrays(inst, [(0, 0, 1.0), (1, 0, 2.0)])
        # the in-cell product sums cancel, leaving sigma^2 (g_i - g_m)
        assert sic_feasibility_q(inst, p, rho, 0, 0, 1, 0) == \
            pytest.approx(1.0 * (1.0 - 4.0))

    def test_zero_power_reduces_to_noise_term(self):
        inst = two_user_instance(g_m=4.0, g_i=1.0, sigma2=2.0)
        p = np.zeros((2, 1))
        rho = np.ones((2, 1))
        assert sic_feasibility_q(inst, p, rho, 0, 0, 1, 0) == \
            pytest.approx(2.0 * (1.0 - 4.0))

    def test_precondition_rejected(self):
        inst = two_user_instance(g_m=4.0, g_i=1.0)
        p, rho = _arrays(inst, [(0, 0, 1.0), (1, 0, 2.0)])
        with pytest.raises(ValueError):
            sic_feasibility_q(inst, p, rho, 0, 1, 0, 0)  # weak decoding strong

    def test_sign_matches_direct_sinr_inequality(self):
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 100:
            inst = random_instance(rng, F=2, M_per=3, E=1, N=2)
            p, rho = random_point(rng, inst)
            model = RateModel(inst, "true")
            pairs = np.argwhere(model.pair_mask_q(rho))
            for (m, i, n) in pairs:
                if p[i, n] <= 0:
                    continue
                q = model.q_all(p, rho)[m, i, n]
                lhs = sinr_m_decoding_i(inst, p, rho, m, i, n)
                rhs = sinr_own(inst, p, rho, i, n)
                assert (q <= 0) == (lhs >= rhs - 1e-12), (m, i, n)
                checked += 1


class TestSicAvoidance:
    def test_single_cell_power_independent(self):
        inst = two_user_instance(g_m=4.0, g_i=1.0, g_e=2.0, sigma2=1.5)
        for p_m, p_i in ((1.0, 2.0), (5.0, 0.1), (0.0, 0.0)):
            p, rho = _arrays(inst, [(0, 0, p_m), (1, 0, p_i)])
            val = sic_avoidance_psi(inst, p, rho, 0, 0, 1, 0, 0)
            assert val == pytest.approx(1.5 * (1.0 - 2.0))

    def test_zero_epsilon_matches_estimate(self):
        inst = unit_instance(seed=8, epsilon=0.0)
        rng = np.random.default_rng(8)
        p, rho = random_point(rng, inst)
        west = RateModel(inst, "worst_case").psi_all(p, rho)
        est = RateModel(inst, "est").psi_all(p, rho)
        assert np.allclose(west, est, rtol=0, atol=1e-12)

    def test_worst_case_below_sampled_truths(self):
        rng = np.random.default_rng(9)
        eps = 0.3
        base = random_instance(rng, F=2, M_per=2, E=2, N=1)
        est = base.g_eave_true.copy()
        p, rho = random_point(rng, base, schedule=2)
        robust_inst = make_instance(base.g_user, est, M_f=(2, 2),
                                    g_eave_est=est, epsilon=eps,
                                    p_max=base.config.p_max)
        tilde = RateModel(robust_inst, "worst_case").psi_all(p, rho)
        for _ in range(1000):
            err = rng.uniform(-eps, eps, size=est.shape)
            g_true = np.maximum(est + err, 1e-9)
            inst = make_instance(base.g_user, g_true, M_f=(2, 2),
                                 g_eave_est=est, epsilon=eps,
                                 p_max=base.config.p_max)
            true_psi = RateModel(inst, "true").psi_all(p, rho)
            assert np.all(tilde <= true_psi + 1e-9)

    def test_sign_matches_direct_sinr_inequality(self):
        rng = np.random.default_rng(10)
        checked = 0
        while checked < 100:
            inst = random_instance(rng, F=2, M_per=2, E=2, N=1)
            p, rho = random_point(rng, inst, schedule=2)
            model = RateModel(inst, "true")
            rows = np.argwhere(model.active_psi_mask(rho))
            for (e, i, n) in rows:
                if p[i, n] <= 0:
                    continue
                psi = model.psi_all(p, rho)[e, i, n]
                f = inst.serving[i]
                lhs = sinr_e_decoding_i(inst, p, rho, e, i, n, f)
                rhs = sinr_own(inst, p, rho, i, n)
                assert (psi >= 0) == (lhs <= rhs + 1e-12), (e, i, n)
                checked += 1
