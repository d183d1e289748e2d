import numpy as np
import pytest

from nomasec import make_instance
from nomasec.dc_power import (LN2, SubproblemError, eval_g, eval_h, eval_im,
                              eval_phi, linearize, linearize_h, linearize_phi,
                              solve_power_subproblem)
from nomasec.rates import RateModel
from helpers import (finite_diff_grad, grid_two_user_fixed_rho,
                     random_instance, random_point, two_user_instance,
                     unit_instance)


def _rand_state(rng, inst):
    p, rho = random_point(rng, inst)
    ups = RateModel(inst, "true").eave_rate_max(p, rho) * LN2
    return p, rho, ups


class TestEvaluators:
    def test_g_minus_h_equals_epigraph_term(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            inst = random_instance(rng, F=2, M_per=2, E=1, N=2)
            p, rho, ups = _rand_state(rng, inst)
            model = RateModel(inst, "true")
            rates = np.log(1.0 + model.user_sinr(p, rho))
            for m, n in np.argwhere(rho > 0.5):
                diff = (eval_g(inst, p, rho, ups, inst.serving[m], m, n)
                        - eval_h(inst, p, rho, inst.serving[m], m, n))
                assert diff == pytest.approx(rates[m, n] - ups[m, n],
                                             abs=1e-9)

    def test_zero_power_reduces_to_minus_upsilon(self):
        inst = two_user_instance()
        z = np.zeros((2, 1))
        rho = np.ones((2, 1))
        ups = np.full((2, 1), 0.7)
        val = (eval_g(inst, z, rho, ups, 0, 0, 0)
               - eval_h(inst, z, rho, 0, 0, 0))
        assert val == pytest.approx(-0.7)

    def test_single_user_zero_slack_gives_rate(self):
        inst = make_instance(np.array([[[3.0]]]), np.array([[[1.0]]]),
                             M_f=(1,), sigma2=1.0)
        p = np.array([[2.0]])
        rho = np.ones((1, 1))
        ups = np.zeros((1, 1))
        val = (eval_g(inst, p, rho, ups, 0, 0, 0)
               - eval_h(inst, p, rho, 0, 0, 0))
        assert val == pytest.approx(np.log(1.0 + 6.0))

    def test_im_minus_phi_is_eave_rate_bound(self):
        rng = np.random.default_rng(1)
        inst = random_instance(rng, F=2, M_per=2, E=2, N=1)
        p, rho, ups = _rand_state(rng, inst)
        model = RateModel(inst, "true")
        gamma = model.eave_sinr(p, rho)
        for m, n in np.argwhere(rho > 0.5):
            for e in range(2):
                f = inst.serving[m]
                xi = (eval_im(inst, p, rho, ups, f, e, m, n)
                      - eval_phi(inst, p, rho, f, e, m, n))
                want = np.log(1.0 + gamma[e, m, n]) - ups[m, n]
                assert xi == pytest.approx(want, abs=1e-9)


class TestLinearizations:
    def test_exact_at_anchor(self):
        rng = np.random.default_rng(2)
        inst = random_instance(rng, F=2, M_per=2, E=1, N=2)
        p, rho, _ = _rand_state(rng, inst)
        lin = linearize(inst, rho, p)
        h_val, _ = linearize_h(inst, rho, p)
        assert np.allclose(lin.h_tilde(p), h_val, atol=1e-12)
        phi_val, _ = linearize_phi(inst, rho, p)
        assert np.allclose(lin.phi_tilde(p), phi_val, atol=1e-12)

    def test_grad_h_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            inst = random_instance(rng, F=2, M_per=2, E=1, N=2)
            p, rho, _ = _rand_state(rng, inst)
            p = p + rho * 0.1    # keep in-cell sums away from zero
            _, grad = linearize_h(inst, rho, p)
            for m, n in np.argwhere(rho > 0.5):
                fd = finite_diff_grad(
                    lambda q, m=m, n=n: eval_h(inst, q, rho,
                                               inst.serving[m], m, n), p)
                denom = np.maximum(np.abs(fd), 1e-8)
                rel = np.abs(grad[m, n] - fd) / np.maximum(denom, 1.0)
                assert rel.max() < 1e-4

    def test_grad_phi_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            inst = random_instance(rng, F=2, M_per=2, E=2, N=1)
            p, rho, _ = _rand_state(rng, inst)
            p = p + rho * 0.1
            _, grad = linearize_phi(inst, rho, p)
            for m, n in np.argwhere(rho > 0.5):
                for e in range(2):
                    fd = finite_diff_grad(
                        lambda q, e=e, m=m, n=n: eval_phi(
                            inst, q, rho, inst.serving[m], e, m, n), p)
                    rel = np.abs(grad[e, m, n] - fd) / np.maximum(
                        np.abs(fd), 1.0)
                    assert rel.max() < 1e-4

    def test_h_tilde_overestimates(self):
        rng = np.random.default_rng(5)
        inst = random_instance(rng, F=2, M_per=3, E=1, N=2)
        p0, rho, _ = _rand_state(rng, inst)
        lin = linearize(inst, rho, p0)
        for _ in range(100):
            q = rho * rng.uniform(0, 5, size=p0.shape)
            h_val, _ = linearize_h(inst, rho, q)
            assert np.all(lin.h_tilde(q) >= h_val - 1e-9)

    def test_phi_tilde_underestimates(self):
        rng = np.random.default_rng(6)
        inst = random_instance(rng, F=2, M_per=3, E=2, N=2)
        p0, rho, _ = _rand_state(rng, inst)
        lin = linearize(inst, rho, p0)
        for _ in range(100):
            q = rho * rng.uniform(0, 5, size=p0.shape)
            phi_val, _ = linearize_phi(inst, rho, q)
            assert np.all(lin.phi_tilde(q) <= phi_val + 1e-9)


class TestSolve:
    def test_single_user_no_eave_saturates_budget(self):
        inst = make_instance(np.array([[[2.0]]]), np.zeros((1, 0, 1)),
                             M_f=(1,), sigma2=1.0, p_max=(10.0,))
        rho = np.ones((1, 1))
        anchor = np.array([[1.0]])
        p, ups, _obj, info = solve_power_subproblem(inst, rho, anchor)
        assert p[0, 0] == pytest.approx(10.0, rel=1e-4)
        assert ups[0, 0] == 0.0

    def test_two_user_matches_grid_within_one_percent(self):
        found = 0
        for seed in range(60):
            inst = unit_instance(seed=seed, F=1, M_f=(2,), E=1, N=1,
                                 p_max=(10.0,))
            model = RateModel(inst, "true")
            rho = np.ones((2, 1))
            if not model.assignment_feasible(rho, np.zeros((2, 1))):
                continue
            found += 1
            p = np.full((2, 1), 2.5)
            ups = model.eave_rate_max(p, rho)
            for _ in range(40):
                p_new, ups, _, _ = solve_power_subproblem(model, rho, p, ups)
                if np.linalg.norm(p_new - p) < 1e-7:
                    p = p_new
                    break
                p = p_new
            val = model.epigraph_objective(p, rho)
            opt, _ = grid_two_user_fixed_rho(model, rho)
            assert val >= opt - 0.01 * max(abs(opt), 1e-9)
            if found >= 6:
                break
        assert found >= 3

    def test_true_objective_never_decreases(self):
        rng = np.random.default_rng(7)
        count = 0
        for seed in range(200):
            inst = unit_instance(seed=seed)
            model = RateModel(inst, "true")
            for _ in range(3):
                p, rho = random_point(rng, inst)
                if rho.sum() == 0 or not model.assignment_feasible(rho, p):
                    continue
                count += 1
                before = model.epigraph_objective(p, rho)
                p2, _, _, _ = solve_power_subproblem(model, rho, p)
                after = model.epigraph_objective(p2, rho)
                assert after >= before - 1e-6
            if count >= 100:
                break
        assert count >= 100

    def test_surrogate_slack_is_tight(self):
        inst = unit_instance(seed=3)
        model = RateModel(inst, "true")
        rng = np.random.default_rng(8)
        p, rho = random_point(rng, inst, schedule=1)
        from nomasec.dc_power import PowerSubproblem
        prob = PowerSubproblem(model, rho, p)
        p_s, ups_s, _ = prob.solve()
        bound = prob.eave_bound(p_s).reshape(model.E, -1).max(axis=0)
        assert np.all(ups_s - np.maximum(bound, 0.0) <= 1e-6)

    def test_returned_point_feasible_for_true_constraints(self):
        rng = np.random.default_rng(9)
        count = 0
        for seed in range(60):
            inst = unit_instance(seed=seed)
            model = RateModel(inst, "true")
            p, rho = random_point(rng, inst)
            if rho.sum() == 0 or not model.assignment_feasible(rho, p):
                continue
            count += 1
            p2, ups2, _, _ = solve_power_subproblem(model, rho, p)
            res = model.residuals(p2, rho, ups2)
            assert all(v <= 1e-6 for v in res.values()), res
            if count >= 20:
                break
        assert count >= 15

    def test_infeasible_anchor_raises(self):
        inst = two_user_instance(g_m=4.0, g_i=1.0, g_e=2.0)
        rho = np.ones((2, 1))
        # the avoidance margin of the weak user is negative regardless of
        # power here, so the pairing itself is an infeasible anchor
        anchor = np.full((2, 1), 1.0)
        with pytest.raises(SubproblemError):
            solve_power_subproblem(inst, rho, anchor)
