import math

import numpy as np
import pytest

from sparsedc.core import (
    TRACE_COLUMNS,
    FeasibleSet,
    IterationTrace,
    SmoothObjective,
    SolverConfig,
    TraceRecord,
    as_index_tuple,
    cardinality,
    estimate_lipschitz,
    finite_diff_gradient_check,
    largest_eigenvalue,
)


def _quad(V):
    V = np.asarray(V, float)
    return SmoothObjective(V.shape[0], lambda x: float(-x @ V @ x), lambda x: -2 * V @ x,
                           2 * largest_eigenvalue(V))


class TestGradientCheck:
    def test_half_norm(self):
        obj = SmoothObjective(2, lambda x: 0.5 * float(x @ x), lambda x: x.copy(), 1.0)
        assert finite_diff_gradient_check(obj, np.array([1.0, 2.0]), 1e-6) <= 1e-8

    def test_constant(self):
        obj = SmoothObjective(3, lambda x: 4.2, lambda x: np.zeros(3), 1.0)
        assert finite_diff_gradient_check(obj, np.array([1.0, -2.0, 3.0])) == 0.0

    def test_negative_quadratic(self):
        obj = _quad([[2, 1], [1, 2]])
        x = np.array([1.0, 0.0])
        np.testing.assert_allclose(obj.grad(x), [-4.0, -2.0])
        assert finite_diff_gradient_check(obj, x) <= 1e-6

    def test_wrong_gradient_detected(self):
        obj = SmoothObjective(2, lambda x: float(x @ x), lambda x: x.copy(), 2.0)
        assert finite_diff_gradient_check(obj, np.array([1.0, 1.0])) > 0.1

    def test_nonfinite_probe(self):
        obj = SmoothObjective(1, lambda x: 1.0 / x[0] if x[0] > 0 else math.inf,
                              lambda x: -1.0 / x ** 2, 1.0)
        with pytest.raises(ValueError, match="objective not finite at probe"):
            finite_diff_gradient_check(obj, np.array([1e-7]))


class TestLipschitz:
    @pytest.mark.parametrize("A, expected", [
        (np.eye(2), 1.0),
        (np.diag([3.0, 1.0]), 9.0),
        (np.array([[1.0, 1.0], [0.0, 1.0]]), (3 + math.sqrt(5)) / 2),
    ])
    def test_examples(self, A, expected):
        assert estimate_lipschitz(A) == pytest.approx(expected, rel=1e-9)

    def test_zero_operator(self):
        with pytest.raises(ValueError, match="zero operator"):
            estimate_lipschitz(np.zeros((3, 2)))

    @pytest.mark.parametrize("shape", [(30, 8), (8, 30)])
    def test_matches_svd(self, rng, shape):
        A = rng.standard_normal(shape)
        assert estimate_lipschitz(A) == pytest.approx(np.linalg.norm(A, 2) ** 2, rel=1e-8)


class TestSolverConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert (cfg.sigma, cfg.eta_bt, cfg.l_min, cfg.l_max) == (1e-5, 2.0, 1e-8, 1e8)
        assert (cfg.delta, cfg.eta_nm, cfg.rel_tol, cfg.max_iter) == (1e-4, 0.8, 1e-5, 10000)

    @pytest.mark.parametrize("bad", [
        {"sigma": 0.0}, {"sigma": 1.0}, {"eta_bt": 1.0}, {"l_min": 1.0, "l_max": 1.0},
        {"delta": 0.0}, {"eta_nm": 0.0}, {"eta_nm": 1.5}, {"rel_tol": -1.0},
        {"max_iter": 0}, {"rho": -1.0}, {"seed": -1}, {"step_rule": "armijo"},
    ])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            SolverConfig(**bad)

    def test_replace_and_grid(self):
        cfg = SolverConfig(rho_grid=[1, 10]).replace(sigma=1e-3)
        assert cfg.rho_grid == (1.0, 10.0) and cfg.sigma == 1e-3


class TestTrace:
    def _rec(self, t, secs=0.0, F=1.0):
        return TraceRecord(t=t, F=F, phi=F, g1=0.0, g2=0.0, penalty_residual=0.1,
                           cardinality_eps=2, step_l=1.5, branch="plain", cum_seconds=secs)

    def test_ordering_enforced(self):
        tr = IterationTrace()
        tr.append(self._rec(0, 0.1))
        with pytest.raises(ValueError):
            tr.append(self._rec(0, 0.2))
        with pytest.raises(ValueError):
            tr.append(self._rec(1, 0.05))

    def test_csv_roundtrip(self, tmp_path):
        tr = IterationTrace()
        for t, F in enumerate([3.0, 0.1 + 0.2, 1e-300, math.nan]):
            tr.append(self._rec(t, 0.5 * t, F))
        p = tmp_path / "t.csv"
        tr.write_csv(p)
        assert p.read_text().splitlines()[0] == ",".join(TRACE_COLUMNS)
        back = IterationTrace.read_csv(p)
        np.testing.assert_array_equal(back.column("F")[:3], tr.column("F")[:3])
        assert math.isnan(back.column("F")[3])
        assert [r.branch for r in back] == ["plain"] * 4


def test_cardinality_threshold():
    assert cardinality(np.array([1e-8, 1.1e-8, -2.0, 0.0])) == 2


def test_index_tuple():
    assert as_index_tuple([3, 1, 1], 4) == (1, 3)
    with pytest.raises(IndexError):
        as_index_tuple([4], 4)


def test_feasible_set_basic():
    box = FeasibleSet(2, "nonneg", lambda u: np.maximum(u, 0), lambda x, tol: x.min() >= -tol)
    assert box.contains(box.project(np.array([-1.0, 2.0])))
    assert not box.is_free
