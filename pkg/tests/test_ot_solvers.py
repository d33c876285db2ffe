import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from bayesot.ot_solvers import (
    Regularizer,
    SolverReport,
    exact_ot,
    regularized_ot,
    sinkhorn,
    transport_cost,
)
from bayesot.polytope import TransportPlan, independent_coupling, is_feasible

from conftest import A, brute_force_min, random_marginals

HALF = [0.5, 0.5]


class TestTransportCost:
    def test_constant_cost(self):
        plan = independent_coupling([0.2, 0.8], [0.6, 0.4])
        assert transport_cost(np.full((2, 2), 5.0), plan) == pytest.approx(5.0, abs=1e-15)

    def test_zero_plan(self):
        assert transport_cost(np.arange(6.0).reshape(2, 3), np.zeros((2, 3))) == 0.0

    def test_diagonal(self):
        assert transport_cost(A, [[0.5, 0.0], [0.0, 0.5]]) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            transport_cost(np.zeros((2, 2)), np.zeros((2, 3)))

    @pytest.mark.parametrize("bad", [[[-1.0, 0.0], [0.0, 0.0]], [[np.inf, 0.0], [0.0, 0.0]]])
    @pytest.mark.parametrize("solve", [exact_ot, lambda c, a, b: sinkhorn(c, a, b, 1.0)])
    def test_solvers_reject_invalid_cost(self, bad, solve):
        with pytest.raises(ValueError):
            solve(bad, HALF, HALF)


class TestExactOT:
    def test_diagonal_optimum(self):
        plan, rep = exact_ot(A, HALF, HALF)
        np.testing.assert_allclose(plan.entries, [[0.5, 0.0], [0.0, 0.5]], atol=1e-12)
        assert rep.objective == pytest.approx(0.0, abs=1e-12)
        assert rep.converged and rep.unique is True

    def test_single_cell(self):
        _, rep = exact_ot([[3.5]], [1.0], [1.0])
        assert rep.objective == 3.5

    def test_degenerate_constant_cost(self):
        u = np.full(3, 1 / 3)
        plan, rep = exact_ot(np.full((3, 3), 2.0), u, u)
        assert rep.objective == pytest.approx(2.0, abs=1e-12)
        assert is_feasible(plan, 1e-9)
        assert rep.unique is False

    def test_one_parameter_family(self):
        # the 2x2 family is theta in [-1/4, 1/4] with cost 5 - 20 theta
        thetas = np.linspace(-0.25, 0.25, 1001)
        _, rep = exact_ot(A, HALF, HALF)
        assert rep.objective == pytest.approx(min(5 - 20 * thetas), abs=1e-12)

    def test_size_cap(self):
        u = np.full(70, 1 / 70)
        with pytest.raises(ValueError, match="cap"):
            exact_ot(np.ones((70, 70)), u, u)

    def test_zero_mass_atoms(self):
        plan, rep = exact_ot(A, [1.0, 0.0], HALF)
        np.testing.assert_allclose(plan.entries, [[0.5, 0.5], [0.0, 0.0]], atol=1e-12)
        assert rep.objective == pytest.approx(5.0)

    @pytest.mark.parametrize("shape", [(2, 2), (2, 3)])
    @pytest.mark.parametrize("seed", range(5))
    def test_brute_force_oracle(self, shape, seed):
        rng = np.random.default_rng(seed)
        n, m = shape
        k = 9999 if shape == (2, 2) else 99
        mu = rng.multinomial(k, np.full(n, 1 / n)) / k
        nu = rng.multinomial(k, np.full(m, 1 / m)) / k
        cost = rng.uniform(0, 10, shape)
        best, evaluated = brute_force_min(cost, mu, nu, k)
        assert evaluated >= 10_000
        _, rep = exact_ot(cost, mu, nu)
        assert rep.objective == pytest.approx(best, abs=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
    def test_scaling(self, seed, a):
        rng = np.random.default_rng(seed)
        mu, nu = random_marginals(rng, 3, 4)
        cost = rng.uniform(0, 5, (3, 4))
        _, r1 = exact_ot(cost, mu, nu)
        _, r2 = exact_ot(a * cost, mu, nu)
        assert r2.objective == pytest.approx(a * r1.objective, abs=1e-9 * max(1.0, a))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_lower_bound_on_feasible_plans(self, seed):
        rng = np.random.default_rng(seed)
        mu, nu = random_marginals(rng, 4, 3)
        cost = rng.uniform(0, 5, (4, 3))
        plan, rep = exact_ot(cost, mu, nu)
        assert is_feasible(plan, 1e-9)
        other, _ = sinkhorn(rng.uniform(size=(4, 3)), mu, nu, 0.5)
        assert rep.objective <= transport_cost(cost, other) + 1e-12


class TestSinkhorn:
    def test_constant_cost_gives_uniform(self):
        for eps in (0.01, 1.0, 10.0):
            plan, rep = sinkhorn(np.full((2, 2), 3.0), HALF, HALF, eps)
            np.testing.assert_allclose(plan.entries, np.full((2, 2), 0.25), atol=1e-12)
            assert rep.converged

    def test_single_source(self):
        nu = [0.2, 0.3, 0.5]
        plan, _ = sinkhorn(np.arange(3.0)[None], [1.0], nu, 0.1)
        np.testing.assert_allclose(plan.entries, [nu], atol=1e-12)

    @pytest.mark.parametrize("eps,off", [
        # off-diagonal mass 1 / (2 (1 + exp(10 / eps))), evaluated in 30-digit arithmetic
        (1.0, 0.0000226989343512171972523881163817),
        (2.0, 0.00334642546214242777968099019066),
        (0.5, 0.00000000103057680909510179071543106474),
    ])
    def test_two_by_two_closed_form(self, eps, off):
        plan, rep = sinkhorn(A, HALF, HALF, eps)
        expected = np.array([[0.5 - off, off], [off, 0.5 - off]])
        np.testing.assert_allclose(plan.entries, expected, rtol=1e-9, atol=1e-15)
        assert rep.converged and rep.residual <= 1e-9

    def test_small_epsilon_near_exact(self):
        plan, rep = sinkhorn(A, HALF, HALF, 1e-2)
        assert rep.objective == pytest.approx(0.0, abs=1e-6)
        assert np.abs(plan.entries - np.diag([0.5, 0.5])).max() < 1e-2

    def test_log_domain_no_underflow(self):
        rng = np.random.default_rng(0)
        mu, nu = random_marginals(rng, 6, 6)
        plan, rep = sinkhorn(rng.uniform(0, 1000, (6, 6)), mu, nu, 1.0)
        assert np.all(np.isfinite(plan.entries))
        assert rep.converged

    def test_positive_where_mass(self):
        rng = np.random.default_rng(1)
        mu, nu = random_marginals(rng, 4, 5)
        plan, _ = sinkhorn(rng.uniform(0, 1, (4, 5)), mu, nu, 0.05)
        assert np.all(plan.entries > 0)

    def test_zero_mass_rows(self):
        plan, rep = sinkhorn(A, [0.0, 1.0], HALF, 0.1)
        np.testing.assert_array_equal(plan.entries[0], [0.0, 0.0])
        assert rep.converged

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            sinkhorn(A, HALF, HALF, 0.0)

    def test_non_convergence_reported(self):
        rng = np.random.default_rng(2)
        mu, nu = random_marginals(rng, 5, 5)
        plan, rep = sinkhorn(rng.uniform(0, 1, (5, 5)), mu, nu, 1e-3, max_iter=2)
        assert not rep.converged
        assert rep.iterations == 2
        assert rep.residual > 1e-9
        assert plan.entries.shape == (5, 5)

    @pytest.mark.parametrize("seed", range(5))
    def test_gap_bounds_and_monotone(self, seed):
        rng = np.random.default_rng(seed)
        n, m = 4, 5
        mu, nu = random_marginals(rng, n, m)
        cost = rng.uniform(0, 1, (n, m))
        exact = exact_ot(cost, mu, nu)[1].objective
        prev = math.inf
        for eps in (1.0, 0.1, 0.01):
            plan, rep = sinkhorn(cost, mu, nu, eps)
            assert is_feasible(plan, 1e-9)
            assert rep.objective >= exact - eps * math.log(n * m)
            assert rep.objective - exact <= eps * math.log(n * m) + 1e-9
            assert rep.objective <= prev + 1e-12
            prev = rep.objective

    def test_report_invariant(self):
        _, rep = sinkhorn(A, HALF, HALF, 0.3, tol=1e-10)
        assert isinstance(rep, SolverReport)
        assert rep.converged and rep.residual <= 1e-10


def _oracle_regularized(cost, mu, nu, reg, eps):
    """Independent solve by SLSQP on the free entries."""
    n, m = cost.shape

    def plan(x):
        g = np.zeros((n, m))
        g[:-1, :-1] = x.reshape(n - 1, m - 1)
        g[:-1, -1] = mu[:-1] - g[:-1, :-1].sum(axis=1)
        g[-1, :-1] = nu[:-1] - g[:-1, :-1].sum(axis=0)
        g[-1, -1] = mu[-1] - g[-1, :-1].sum()
        return g

    def obj(x):
        g = plan(x)
        return float(np.sum(cost * g)) + eps * reg.value(np.maximum(g, 1e-300))

    x0 = np.outer(mu, nu)[:-1, :-1].ravel()
    cons = {"type": "ineq", "fun": lambda x: plan(x).ravel()}
    res = minimize(obj, x0, method="SLSQP", constraints=[cons],
                   options={"ftol": 1e-15, "maxiter": 1000})
    return plan(res.x)


class TestRegularizedOT:
    @pytest.mark.parametrize("seed", range(5))
    def test_entropy_matches_sinkhorn(self, seed):
        rng = np.random.default_rng(seed)
        mu, nu = random_marginals(rng, 5, 5)
        cost = rng.uniform(0, 1, (5, 5))
        p1, _ = regularized_ot(cost, mu, nu, "entropy", 0.1)
        p2, _ = sinkhorn(cost, mu, nu, 0.1)
        np.testing.assert_allclose(p1.entries, p2.entries, atol=1e-6)

    def test_quadratic_constant_cost_uniform(self):
        plan, rep = regularized_ot(np.full((2, 2), 4.0), HALF, HALF, Regularizer.quadratic(), 1.0)
        np.testing.assert_allclose(plan.entries, np.full((2, 2), 0.25), atol=1e-9)
        assert rep.converged

    def test_quadratic_large_epsilon_monotone(self):
        dist = []
        for eps in (1.0, 10.0, 100.0, 1000.0, 10000.0):
            plan, rep = regularized_ot(A, HALF, HALF, "quadratic", eps)
            assert rep.converged
            dist.append(np.abs(plan.entries - 0.25).max())
        # the optimum sits on the boundary until eps exceeds 20
        assert all(b <= a for a, b in zip(dist, dist[1:]))
        assert dist[2] < dist[1]
        assert dist[-1] < 1e-3

    def test_quadratic_closed_form_2x2(self):
        # minimize 5 - 20 t + eps * ((1/4+t)^2 + (1/4-t)^2): t = 5 / eps when interior
        eps = 100.0
        plan, _ = regularized_ot(A, HALF, HALF, "quadratic", eps)
        t = 5.0 / eps
        np.testing.assert_allclose(plan.entries, [[0.25 + t, 0.25 - t], [0.25 - t, 0.25 + t]],
                                   atol=1e-9)

    @pytest.mark.parametrize("kind,q", [("quadratic", None), ("tsallis", 0.5), ("tsallis", 2.0)])
    @pytest.mark.parametrize("seed", range(3))
    def test_matches_generic_optimizer(self, kind, q, seed):
        rng = np.random.default_rng(seed)
        mu, nu = random_marginals(rng, 3, 3)
        cost = rng.uniform(0, 1, (3, 3))
        reg = Regularizer.tsallis(q) if kind == "tsallis" else Regularizer.quadratic()
        eps = 0.2
        plan, rep = regularized_ot(cost, mu, nu, reg, eps)
        assert rep.converged and is_feasible(plan, 1e-9)
        oracle = _oracle_regularized(cost, mu.weights, nu.weights, reg, eps)
        f = lambda g: float(np.sum(cost * g)) + eps * reg.value(np.maximum(g, 0.0))
        assert f(plan.entries) <= f(oracle) + 1e-8
        np.testing.assert_allclose(plan.entries, oracle, atol=1e-4)

    def test_unsupported(self):
        with pytest.raises(ValueError):
            regularized_ot(A, HALF, HALF, "wasserstein", 1.0)

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            regularized_ot(A, HALF, HALF, "quadratic", -1.0)

    @pytest.mark.parametrize("kind", ["entropy", "quadratic", "tsallis"])
    def test_feasible_output(self, kind):
        rng = np.random.default_rng(7)
        mu, nu = random_marginals(rng, 4, 6)
        tol = 1e-10
        plan, rep = regularized_ot(rng.uniform(0, 1, (4, 6)), mu, nu, kind, 0.05, tol=tol)
        assert rep.converged
        assert is_feasible(plan, tol)
        assert plan.marginal_residual() <= tol


def test_plan_type():
    plan, _ = exact_ot(A, HALF, HALF)
    assert isinstance(plan, TransportPlan)
