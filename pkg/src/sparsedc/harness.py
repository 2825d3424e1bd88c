"""Instance assembly and single-run orchestration shared by ``solve`` and
``bench``."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .core import SolverConfig, cardinality, largest_eigenvalue
from .problems import (
    build_l1l2_regression,
    gen_covariance_data,
    gen_l1l2_data,
    gen_nnls_data,
    least_squares,
    quadratic_objective,
)
from .proxproj import budget_hyperplane, l2_ball, nonneg_orthant
from .solvers import (
    SOLVERS,
    iht,
    penalized_problem,
    penalty_continuation,
    round_to_ksparse,
    run_solver,
    sweep_rho,
)

DEFAULT_RHO_GRID = tuple(10.0 ** i for i in range(-4, 5))
SOLVER_NAMES = tuple(SOLVERS) + ("iht",)
FAMILY_ALIASES = {
    "l1l2": "l1l2", "l1l2_regression": "l1l2",
    "nnls": "nnls",
    "pca": "pca", "sparse_pca": "pca",
    "portfolio": "portfolio",
}
IHT_INCOMPATIBLE = (
    "iht is not applicable with C ≠ ℝⁿ: hard thresholding projects onto the "
    "k-sparse set only, so its iterates ignore the convex constraint")
SUMMARY_FIELDS = (
    "family", "m", "n", "k", "seed", "solver", "rho", "cardinality",
    "objective", "F_final", "time", "t_L", "iterations", "status",
)


@dataclass
class RawData:
    """Matrices for one instance, before any Lipschitz estimation."""

    family: str
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    xbar: Optional[np.ndarray] = None

    @property
    def n(self):
        return (self.A if self.A is not None else self.V).shape[1]

    @property
    def m(self):
        return self.A.shape[0] if self.A is not None else self.V.shape[0]


def suite_size(suite, i):
    """``(m, n, k)`` of the i-th size in each benchmark suite."""
    if suite == "l1l2":
        return 720 * i, 2560 * i, 80 * i
    if suite == "nnls":
        n = 180 * i
        return 640 * i, n, max(1, round(n / 10))
    if suite == "pca":
        n = 100 * i
        return 2 * n, n, max(1, n // 10)
    if suite == "portfolio":
        n = 100 * i
        return 2 * n, n, 10
    raise ValueError(f"unknown suite {suite!r}")


def generate(family, m, n, k, seed) -> RawData:
    family = FAMILY_ALIASES[family]
    if family == "l1l2":
        A, b, xbar = gen_l1l2_data(m, n, k, seed)
        return RawData(family, A=A, b=b, xbar=xbar)
    if family == "nnls":
        A, b, xbar = gen_nnls_data(m, n, seed)
        return RawData(family, A=A, b=b, xbar=xbar)
    V, r = gen_covariance_data(n, seed, m)
    return RawData(family, V=V, r=r)


@dataclass
class RunSpec:
    family: str
    solver: str
    k: Optional[int] = None
    lam: float = 5e-4
    alpha: float = 10.0
    index_count: Optional[int] = None
    rho_grid: Optional[tuple] = None
    continuation: bool = False
    rounding: bool = True
    x0: object = "uniform"
    seed: int = 0
    config: SolverConfig = field(default_factory=SolverConfig)


@dataclass
class RunOutcome:
    summary: dict
    result: object
    x: np.ndarray


def _x0(spec, n):
    if isinstance(spec, np.ndarray):
        if spec.size != n:
            raise ValueError(f"x0 has length {spec.size}, expected {n}")
        return spec.astype(float)
    if spec == "zeros":
        return np.zeros(n)
    if spec == "uniform":
        return np.full(n, 1.0 / n)
    raise ValueError(f"unknown x0 spec {spec!r}")


def check_compatible(family, solver):
    family = FAMILY_ALIASES[family]
    if solver not in SOLVER_NAMES:
        raise ValueError(f"unknown solver {solver!r}")
    if solver == "iht" and family in ("pca", "portfolio"):
        raise ValueError(IHT_INCOMPATIBLE)


def run(data: RawData, spec: RunSpec, clock=time.perf_counter) -> RunOutcome:
    family = FAMILY_ALIASES[spec.family]
    check_compatible(family, spec.solver)
    cfg = spec.config
    n = data.n
    x0 = _x0(spec.x0, n)
    t0 = clock()

    if family == "l1l2":
        problem = build_l1l2_regression(data.A, data.b, spec.lam)
        t_L = clock() - t0
        if spec.solver == "iht":
            if spec.k is None:
                raise ValueError("IHT needs --k")
            res = iht(problem.f, spec.k, x0, cfg, clock=clock)
        else:
            res = run_solver(spec.solver, problem, x0, cfg, clock)
        x = res.x
        objective = res.F
        rho = spec.lam
    else:
        k = spec.k
        if k is None:
            raise ValueError(f"family {family} needs --k")
        if family == "nnls":
            phi = least_squares(data.A, data.b)
            cnt = n // 10 if spec.index_count is None else spec.index_count
            C = nonneg_orthant(n, range(cnt))
        elif family == "pca":
            V = data.V
            phi = quadratic_objective(-V, lipschitz=2 * largest_eigenvalue(V))
            C = l2_ball(n)
        else:
            V = data.V
            phi = quadratic_objective(spec.alpha * V, -data.r,
                                      lipschitz=2 * spec.alpha * largest_eigenvalue(V),
                                      convex=True)
            C = budget_hyperplane(n)
        t_L = clock() - t0
        if spec.solver == "iht":
            if not (family == "nnls" and not C.index):
                raise ValueError(IHT_INCOMPATIBLE)
            res = iht(phi, k, x0, cfg, clock=clock)
            x, rho = res.x, math.nan
        elif spec.continuation:
            inner = {"pdca": "pdca", "pdca-bt": "pdca-bt"}.get(spec.solver, "apdca")
            if spec.solver in ("pdcae", "apdca-fix"):
                inner_cfg = cfg.replace(step_rule="fixed")
            else:
                inner_cfg = cfg
            res = penalty_continuation(phi, C, k, x0, inner_cfg, schedule=spec.rho_grid,
                                       inner=inner, clock=clock)
            rho = res.info["rho_final"]
            x = round_to_ksparse(phi, C, res.x, k, cfg) if spec.rounding else res.x
        elif spec.rho_grid:
            res = sweep_rho(phi, C, k, x0, cfg, spec.solver, spec.rho_grid,
                            spec.rounding, clock)
            x, rho = res.x, res.info["rho"]
        else:
            problem = penalized_problem(phi, C, k, cfg.rho)
            res = run_solver(spec.solver, problem, x0, cfg, clock)
            rho = cfg.rho
            x = round_to_ksparse(phi, C, res.x, k, cfg) if spec.rounding else res.x
        objective = float(phi.value(x))
    elapsed = clock() - t0
    summary = {
        "family": family,
        "m": data.m,
        "n": n,
        "k": spec.k,
        "seed": spec.seed,
        "solver": spec.solver,
        "rho": rho,
        "cardinality": cardinality(x),
        "objective": float(objective),
        "F_final": float(res.F),
        "time": elapsed,
        "t_L": t_L,
        "iterations": res.iterations,
        "status": res.status,
    }
    return RunOutcome(summary, res, x)


def config_dict(cfg: SolverConfig):
    d = asdict(cfg)
    if d["rho_grid"] is not None:
        d["rho_grid"] = list(d["rho_grid"])
    return d
