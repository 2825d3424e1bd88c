import math

import numpy as np
import pytest

from sparsedc.core import SmoothObjective, SolverConfig
from sparsedc.problems import (
    build_l1l2_regression,
    build_nnls,
    build_portfolio,
    build_sparse_pca,
    gen_covariance_data,
    gen_l1l2_data,
    gen_nnls_data,
    least_squares,
    quadratic_objective,
)
from sparsedc.proxproj import (
    budget_hyperplane,
    free_set,
    l2_ball,
    make_regularizer,
    nonneg_orthant,
)
from sparsedc.solvers import (
    CompositeProblem,
    _backtrack,
    _bb,
    _initial_l,
    apdca,
    iht,
    next_theta,
    nm_accept,
    nm_update,
    pdca_backtracking,
    pdca_extrapolation,
    pdca_fixed,
    pdca_step,
    penalized_problem,
    penalty_continuation,
    round_to_ksparse,
    run_solver,
    sweep_rho,
)
from sparsedc.sparsity import penalty_residual

FIXED = SolverConfig(step_rule="fixed")


def shifted_half_norm(a):
    a = np.asarray(a, float)
    return SmoothObjective(a.size, lambda x: 0.5 * float((x - a) @ (x - a)),
                           lambda x: x - a, 1.0, convex=True)


def small_nnls(seed=0, m=40, n=20, k=4, rho=1.0):
    A, b, _ = gen_nnls_data(m, n, seed)
    return build_nnls(A, b, range(n // 5), k, rho)


def check_apdca_trace(trace, eta, delta, tol=1e-10):
    """Recompute the weighted average and each branch's acceptance test."""
    F = trace.column("F")
    for i in range(1, len(trace)):
        w = eta ** np.arange(i - 1, -1, -1.0)
        c_explicit = float(w @ F[:i] / w.sum())
        rec = trace[i]
        assert abs(rec.c_ref - c_explicit) <= tol * max(1.0, abs(c_explicit))
        if rec.branch == "z":
            assert rec.cand_F + delta * rec.cand_dist_sq <= rec.c_ref
        else:
            assert rec.F <= rec.c_ref + 1e-12


class TestOneStep:
    def test_hand_example(self):
        p = penalized_problem(shifted_half_norm([2, 1]), free_set(2), 1, 1.0)
        x = np.array([1.0, 0.5])
        np.testing.assert_allclose(pdca_step(p, x, p.f.lipschitz), [4 / 3, 1 / 3], atol=1e-15)

    def test_sparse_fixed_point(self):
        p = penalized_problem(shifted_half_norm([2, 0]), free_set(2), 1, 1.0)
        x = np.array([2.0, 0.0])
        np.testing.assert_array_equal(pdca_step(p, x, p.f.lipschitz), x)

    def test_ball_projection(self):
        phi = quadratic_objective(-np.eye(2), lipschitz=2.0)
        p = penalized_problem(phi, l2_ball(2), 1, 1.0)
        np.testing.assert_allclose(pdca_step(p, np.array([1.0, 0.0]), p.f.lipschitz), [1, 0])


class TestFixed:
    @pytest.mark.parametrize("seed", range(3))
    def test_descent_and_stationarity(self, seed):
        V, r = gen_covariance_data(12, seed)
        for p in (small_nnls(seed), build_sparse_pca(V, 3), build_portfolio(V, r, 10, 3)):
            res = pdca_fixed(p, np.full(p.n, 1 / p.n), FIXED.replace(rel_tol=1e-14, max_iter=50000),
                             clock=None)
            assert res.converged
            F = res.trace.column("F")
            assert np.all(np.diff(F) <= 1e-12)
            assert np.linalg.norm(res.x - pdca_step(p, res.x, p.f.lipschitz)) <= 1e-6

    def test_nan_objective_is_error(self):
        phi = SmoothObjective(2, lambda x: math.nan if x[0] > 0.5 else 0.5 * float(x @ x),
                              lambda x: x - np.array([2.0, 0]), 1.0)
        p = penalized_problem(phi, free_set(2), 1, 0.0)
        res = pdca_fixed(p, np.zeros(2), FIXED, clock=None)
        assert res.status == "error"

    def test_infeasible_start_projected(self):
        p = penalized_problem(shifted_half_norm([0.1, 0.1]), l2_ball(2), 1, 1.0)
        with pytest.warns(UserWarning, match="projecting"):
            res = pdca_fixed(p, np.array([3.0, 4.0]), FIXED, clock=None)
        assert res.trace[0].g1 == 0.0

    def test_max_iter_status(self):
        res = pdca_fixed(small_nnls(), np.zeros(20), FIXED.replace(max_iter=3, rel_tol=0),
                         clock=None)
        assert res.status == "max_iter" and res.iterations == 3


class _FakeProblem:
    """Returns scripted objective values for successive candidates."""

    def __init__(self, values):
        self.values = list(values)

        class _Pen:
            @staticmethod
            def prox_g1(u, alpha):
                return np.array(u, float)

        self.penalty = _Pen()

    def parts(self, x):
        F = self.values.pop(0)
        return F, F, 0.0, 0.0


class TestBacktracking:
    def test_accept_margin_example(self):
        cfg = SolverConfig(sigma=1e-5)
        base = np.zeros(1)
        # grad chosen so that the l=1 candidate sits at distance 1
        accept = lambda c, p, l: p[0] <= 1.0 - cfg.sigma / 2 * float(c @ c)
        cand, parts, l, ev, ok = _backtrack(_FakeProblem([0.9]), base, np.array([-1.0]),
                                            np.zeros(1), 1.0, cfg, accept)
        assert ok and l == 1.0 and ev == 1 and parts[0] == 0.9

    def test_no_decrease_inflates(self):
        cfg = SolverConfig(sigma=1e-5, eta_bt=2.0)
        accept = lambda c, p, l: p[0] <= 1.0 - cfg.sigma / 2 * float(c @ c)
        cand, parts, l, ev, ok = _backtrack(_FakeProblem([1.0, 0.5]), np.zeros(1),
                                            np.array([-1.0]), np.zeros(1), 1.0, cfg, accept)
        assert ok and l == 2.0 and ev == 2

    def test_stall(self):
        cfg = SolverConfig(max_backtracks=3)
        _, _, _, ev, ok = _backtrack(_FakeProblem([5.0] * 4), np.zeros(1), np.ones(1),
                                     np.zeros(1), 1.0, cfg, lambda c, p, l: False)
        assert not ok and ev == 4

    def test_bb_orientation(self):
        assert _bb(np.array([1.0, 0]), np.array([2.0, 0]), "curvature") == 2.0
        assert _bb(np.array([1.0, 0]), np.array([2.0, 0]), "inverse") == 0.5
        assert _bb(np.array([1.0, 0]), np.array([-2.0, 0]), "curvature") is None
        cfg = SolverConfig()
        assert _initial_l(cfg, None, None, None) == cfg.l_min
        assert _initial_l(cfg, np.zeros(2), np.ones(2), 3.0) == 3.0
        assert _initial_l(cfg, np.ones(1), np.ones(1) * 1e12, None) == cfg.l_max

    @pytest.mark.parametrize("seed", range(4))
    def test_margin_rate_and_bounded_l(self, seed):
        cfg = SolverConfig()
        p = small_nnls(seed, rho=2.0)
        res = pdca_backtracking(p, np.full(p.n, 0.05), cfg, clock=None)
        assert res.converged
        F, step = res.trace.column("F"), res.trace.column("step_sq")
        for t in range(1, len(F)):
            assert F[t] <= F[t - 1] - cfg.sigma / 2 * step[t]
        for tau in range(1, len(F) - 1):
            assert step[1:tau + 2].min() <= 2 * (F[0] - F[tau + 1]) / (tau * cfg.sigma)
        L = p.f.lipschitz
        assert np.nanmax(res.trace.column("step_l")) <= max(L, cfg.eta_bt * (L + cfg.sigma))


class TestApdca:
    def test_theta_sequence(self):
        th2 = next_theta(1.0)
        assert th2 == pytest.approx((math.sqrt(5) + 1) / 2)
        assert round(th2, 4) == 1.6180
        assert round(next_theta(th2), 4) == 2.1935

    def test_nonmonotone_example(self):
        q, c = nm_update(1.0, 4.0, 2.0, 1.0)
        assert (q, c) == (2.0, 3.0)
        assert nm_accept(2.5, 0.4, c, 1.0)
        assert not nm_accept(2.7, 0.4, c, 1.0)

    def test_first_iteration_y_is_x(self):
        # with y = x the first z-step equals a plain step from x0
        p = small_nnls(1)
        x0 = np.full(p.n, 0.05)
        res = apdca(p, x0, FIXED.replace(max_iter=1), "fixed", clock=None)
        np.testing.assert_allclose(res.x, pdca_step(p, x0, p.f.lipschitz), rtol=0, atol=0)

    @pytest.mark.parametrize("step", ["fixed", "backtracking"])
    @pytest.mark.parametrize("seed", range(3))
    def test_trace_consistency(self, step, seed):
        cfg = SolverConfig(eta_nm=0.8, delta=1e-4)
        p = small_nnls(seed, n=30, k=3)
        res = apdca(p, np.full(p.n, 1 / 30), cfg, step, clock=None)
        assert res.converged
        check_apdca_trace(res.trace, cfg.eta_nm, cfg.delta)
        assert sum(res.info["branches"].values()) == res.iterations

    def test_pca_concave_runs(self):
        V, _ = gen_covariance_data(20, 3)
        p = build_sparse_pca(V, 2, 1.0)
        cfg = SolverConfig()
        res = apdca(p, np.full(20, 0.05), cfg, "backtracking", clock=None)
        assert res.status != "error"
        check_apdca_trace(res.trace, cfg.eta_nm, cfg.delta)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            apdca(small_nnls(), np.zeros(20), FIXED, "armijo")


class TestExtrapolation:
    def test_zero_beta_equals_pdca(self):
        p = small_nnls(2)
        x0 = np.full(p.n, 0.05)
        a = pdca_fixed(p, x0, FIXED, clock=None)
        b = pdca_extrapolation(p, x0, FIXED, restart="none", beta=0.0, clock=None)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.trace.column("F"), b.trace.column("F"))

    def test_fixed_restart_count(self):
        p = small_nnls(3)
        res = pdca_extrapolation(p, np.zeros(p.n), FIXED.replace(rel_tol=0, max_iter=1002),
                                 restart="fixed", restart_every=200, clock=None)
        assert res.iterations == 1002 and res.info["restarts_fixed"] == 5
        assert max(res.info["betas"]) < 1

    def test_lasso_rate(self, rng):
        m, n = 60, 150
        A = rng.standard_normal((m, n)) / math.sqrt(m)
        b = A @ (rng.standard_normal(n) * (rng.uniform(size=n) < 0.1)) + 0.01 * rng.standard_normal(m)
        lam = 0.1 * float(np.abs(A.T @ b).max())
        f = least_squares(A, b)
        p = CompositeProblem(f, make_regularizer("l1", lam))
        ref = pdca_extrapolation(p, np.zeros(n), FIXED.replace(rel_tol=0, max_iter=20000),
                                 restart="adaptive", clock=None)
        Fstar = ref.F
        res = pdca_extrapolation(p, np.zeros(n), FIXED.replace(rel_tol=0, max_iter=200),
                                 restart="none", clock=None)
        gap = res.trace.column("F") - Fstar
        t = np.arange(10, 201)
        ok = gap[t] > 0
        slope = np.polyfit(np.log(t[ok]), np.log(gap[t][ok]), 1)[0]
        assert slope <= -1.9

    def test_bad_args(self):
        p = small_nnls()
        with pytest.raises(ValueError):
            pdca_extrapolation(p, np.zeros(20), restart="sometimes")
        with pytest.raises(ValueError):
            pdca_extrapolation(p, np.zeros(20), stop="never")


class TestIht:
    def test_one_step(self):
        res = iht(shifted_half_norm([3, -1, 0.5]), 1, np.zeros(3), FIXED.replace(max_iter=1),
                  clock=None)
        np.testing.assert_array_equal(res.x, [3, 0, 0])

    def test_fixed_point(self):
        res = iht(shifted_half_norm([3, -1, 0.5]), 1, np.array([3.0, 0, 0]), FIXED, clock=None)
        assert res.iterations == 1
        np.testing.assert_array_equal(res.x, [3, 0, 0])

    def test_full_k_is_gradient_step(self):
        phi = quadratic_objective(np.diag([1.0, 2.0]), np.array([1.0, -1.0]), convex=True)
        x0 = np.array([0.3, -0.7])
        res = iht(phi, 2, x0, FIXED.replace(max_iter=1), clock=None)
        np.testing.assert_allclose(res.x, x0 - phi.grad(x0) / phi.lipschitz)

    def test_sparse_and_monotone(self, rng):
        A = rng.standard_normal((30, 40))
        phi = least_squares(A, rng.standard_normal(30))
        res = iht(phi, 5, rng.standard_normal(40), FIXED, clock=None)
        assert np.all(res.trace.column("cardinality_eps") <= 5)
        assert np.all(np.diff(res.trace.column("F")) <= 1e-12)

    def test_rejects_constraint(self):
        with pytest.raises(ValueError, match="IHT requires C = R"):
            iht(shifted_half_norm([1, 2]), 1, np.zeros(2), feasible=l2_ball(2))
        p = penalized_problem(shifted_half_norm([1, 2]), l2_ball(2), 1, 1.0)
        with pytest.raises(ValueError, match="IHT requires"):
            run_solver("iht", p, np.zeros(2), FIXED)


class TestRounding:
    def test_pca_toy(self):
        phi = quadratic_objective(-np.diag([3.0, 1.0]), lipschitz=6.0)
        x = round_to_ksparse(phi, l2_ball(2), np.array([0.9, 0.1]), 1)
        np.testing.assert_allclose(x, [1, 0], atol=1e-10)
        assert x[1] == 0.0

    def test_nnls_toy(self):
        phi = least_squares(np.eye(2), np.array([2.0, -1.0]))
        x = round_to_ksparse(phi, nonneg_orthant(2, [0, 1]), np.array([2.0, -0.1]), 1)
        np.testing.assert_allclose(x, [2, 0], atol=1e-10)

    def test_already_stationary(self):
        phi = shifted_half_norm([0.0, 1.5, 0.0])
        x0 = np.array([0.0, 1.5, 0.0])
        np.testing.assert_allclose(round_to_ksparse(phi, free_set(3), x0, 1), x0, atol=1e-10)

    def test_hyperplane(self, rng):
        V, r = gen_covariance_data(15, 0)
        phi = quadratic_objective(10 * V, -r, convex=True)
        x = round_to_ksparse(phi, budget_hyperplane(15), rng.standard_normal(15), 4)
        assert np.count_nonzero(x) <= 4 and abs(x.sum() - 1) <= 1e-10


class TestContinuation:
    def test_sparse_stationary_start(self):
        phi = shifted_half_norm([0.0, 2.0, 0.0])
        res = penalty_continuation(phi, free_set(3), 1, np.array([0.0, 2.0, 0.0]),
                                   SolverConfig(), inner="pdca-bt", clock=None)
        assert res.converged and res.info["stages"] == 1
        assert res.info["residuals"] == [0.0]

    @pytest.mark.parametrize("inner", ["apdca", "pdca-bt", "pdca"])
    def test_reaches_sparsity(self, inner):
        A, b, _ = gen_nnls_data(60, 20, 4)
        phi = least_squares(A, b)
        C = nonneg_orthant(20, range(2))
        res = penalty_continuation(phi, C, 2, np.full(20, 0.05), SolverConfig(), inner=inner,
                                   clock=None)
        assert res.converged
        assert penalty_residual(res.x, 2) <= 1e-10

    def test_schedule_must_increase(self):
        with pytest.raises(ValueError):
            penalty_continuation(shifted_half_norm([1, 0]), free_set(2), 1, np.zeros(2),
                                 schedule=[10, 1])

    def test_exhausted_schedule(self):
        A, b, _ = gen_nnls_data(60, 20, 4)
        res = penalty_continuation(least_squares(A, b), free_set(20), 2, np.full(20, 0.05),
                                   SolverConfig(), schedule=[1e-4], clock=None)
        assert res.status == "max_iter" and "residual" in res.message


def test_sweep_rho_returns_sparse_feasible():
    A, b, _ = gen_nnls_data(80, 30, 5)
    phi = least_squares(A, b)
    C = nonneg_orthant(30, range(3))
    res = sweep_rho(phi, C, 3, np.full(30, 1 / 30), SolverConfig(), "apdca-bt",
                    grid=[0.01, 1, 100], clock=None)
    assert np.count_nonzero(res.x) <= 3 and C.contains(res.x)
    assert res.F == pytest.approx(phi.value(res.x))
    assert res.info["rho"] in (0.01, 1, 100) and len(res.info["sweep"]) == 3


def test_l1l2_solvers_agree():
    A, b, _ = gen_l1l2_data(40, 100, 5, 0)
    p = build_l1l2_regression(A, b, 1e-3)
    vals = [run_solver(s, p, np.zeros(100), SolverConfig(), clock=None).F
            for s in ("pdca", "pdca-bt", "apdca-fix", "apdca-bt", "pdcae")]
    assert max(vals) <= 1.2 * min(vals)


def test_deterministic_traces():
    p = small_nnls(6)
    x0 = np.full(p.n, 0.05)
    a = apdca(p, x0, SolverConfig(), clock=None)
    b = apdca(p, x0, SolverConfig(), clock=None)
    for col in ("F", "step_l", "cum_seconds"):
        np.testing.assert_array_equal(a.trace.column(col), b.trace.column(col))


def test_unknown_solver():
    with pytest.raises(ValueError, match="unknown solver"):
        run_solver("newton", small_nnls(), np.zeros(20), SolverConfig())
