"""Shared abstractions: smooth objectives, feasible sets, DC penalties,
solver configuration and iteration traces."""

from __future__ import annotations

import abc
import csv
import math
from dataclasses import dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "CARD_EPS",
    "SmoothObjective",
    "FeasibleSet",
    "DcPenalty",
    "SolverConfig",
    "TraceRecord",
    "IterationTrace",
    "TRACE_COLUMNS",
    "cardinality",
    "finite_diff_gradient_check",
    "estimate_lipschitz",
    "largest_eigenvalue",
]

# entries with |x_i| above this count towards the reported cardinality
CARD_EPS = 1e-8


def cardinality(x: np.ndarray, eps: float = CARD_EPS) -> int:
    return int(np.count_nonzero(np.abs(x) > eps))


@dataclass(frozen=True)
class SmoothObjective:
    """Differentiable objective with a Lipschitz-continuous gradient.

    ``lipschitz`` must upper-bound the Lipschitz constant of ``grad``; the
    fixed-step solvers use ``1 / lipschitz`` as their step size.
    """

    n: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    convex: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if not (self.lipschitz > 0 and math.isfinite(self.lipschitz)):
            raise ValueError("lipschitz constant must be positive and finite")

    def __call__(self, x):
        return self.value(x)


@dataclass(frozen=True)
class FeasibleSet:
    """Closed convex set, accessed only through its Euclidean projection.

    ``kind`` is one of ``free``, ``ball``, ``hyperplane`` or ``nonneg``;
    ``index`` holds the (0-based) sign-constrained coordinates for
    ``nonneg``.
    """

    n: int
    kind: str
    projector: Callable[[np.ndarray], np.ndarray]
    membership: Callable[[np.ndarray, float], bool]
    index: tuple = ()

    def project(self, u):
        return self.projector(np.asarray(u, dtype=float))

    def contains(self, x, tol=1e-10):
        return bool(self.membership(np.asarray(x, dtype=float), tol))

    @property
    def is_free(self):
        return self.kind == "free"


class DcPenalty(abc.ABC):
    """Penalty ``g = g1 - g2`` with ``g1`` proper closed convex and ``g2``
    finite convex.

    Subclasses provide the prox of ``g1`` and one subgradient of ``g2``.
    """

    @abc.abstractmethod
    def value_g1(self, x) -> float:
        ...

    @abc.abstractmethod
    def prox_g1(self, u, alpha) -> np.ndarray:
        """Return ``argmin_v g1(v) + (alpha/2) ||v - u||^2``."""

    @abc.abstractmethod
    def value_g2(self, x) -> float:
        ...

    @abc.abstractmethod
    def subgrad_g2(self, x) -> np.ndarray:
        ...

    def value(self, x):
        return self.value_g1(x) - self.value_g2(x)


@dataclass(frozen=True)
class SolverConfig:
    """Step-rule, line-search and termination settings shared by solvers.

    ``eta_bt`` inflates the step parameter on a rejected backtracking trial;
    ``eta_nm`` weights the nonmonotone reference value.  ``rel_tol = 0``
    disables the objective-change termination test.
    """

    step_rule: str = "backtracking"
    sigma: float = 1e-5
    eta_bt: float = 2.0
    l_min: float = 1e-8
    l_max: float = 1e8
    delta: float = 1e-4
    eta_nm: float = 0.8
    rel_tol: float = 1e-5
    max_iter: int = 10_000
    rho: float = 1.0
    rho_grid: Optional[tuple] = None
    seed: int = 0
    bb_rule: str = "curvature"
    max_backtracks: int = 100
    residual_tol: float = 1e-10

    def __post_init__(self):
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if not self.eta_bt > 1:
            raise ValueError("eta_bt must exceed 1")
        if not 0 < self.l_min < self.l_max:
            raise ValueError("need 0 < l_min < l_max")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 < self.eta_nm <= 1:
            raise ValueError("eta_nm must lie in (0, 1]")
        if not self.rel_tol >= 0:
            raise ValueError("rel_tol must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.rho_grid is not None:
            object.__setattr__(self, "rho_grid", tuple(float(r) for r in self.rho_grid))
            if any(r < 0 for r in self.rho_grid):
                raise ValueError("rho grid entries must be nonnegative")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if self.bb_rule not in ("curvature", "inverse"):
            raise ValueError(f"unknown BB rule {self.bb_rule!r}")

    def replace(self, **changes):
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return SolverConfig(**kw)


TRACE_COLUMNS = (
    "t", "F", "phi", "g1", "g2", "penalty_residual",
    "cardinality_eps", "step_l", "branch", "cum_seconds",
)


@dataclass
class TraceRecord:
    t: int
    F: float
    phi: float
    g1: float
    g2: float
    penalty_residual: float
    cardinality_eps: int
    step_l: float
    branch: str
    cum_seconds: float
    # in-memory diagnostics, not written to CSV
    step_sq: float = math.nan
    c_ref: float = math.nan
    cand_F: float = math.nan
    cand_dist_sq: float = math.nan
    n_evals: int = 0
    restart: bool = False


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class IterationTrace:
    records: list = field(default_factory=list)

    def append(self, rec: TraceRecord):
        if self.records:
            last = self.records[-1]
            if rec.t <= last.t:
                raise ValueError("trace iteration counter must strictly increase")
            if rec.cum_seconds < last.cum_seconds:
                raise ValueError("trace time must be nondecreasing")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def extend(self, other: "IterationTrace", t_offset=0, time_offset=0.0):
        for r in other.records:
            d = dict(r.__dict__)
            d["t"] = r.t + t_offset
            d["cum_seconds"] = r.cum_seconds + time_offset
            self.append(TraceRecord(**d))

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for r in self.records:
                w.writerow([_fmt(getattr(r, c)) for c in TRACE_COLUMNS])

    @classmethod
    def read_csv(cls, path) -> "IterationTrace":
        trace = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            rows = csv.DictReader(fh)
            if tuple(rows.fieldnames or ()) != TRACE_COLUMNS:
                raise ValueError(f"unexpected trace columns {rows.fieldnames}")
            for row in rows:
                trace.append(TraceRecord(
                    t=int(row["t"]),
                    F=float(row["F"]),
                    phi=float(row["phi"]),
                    g1=float(row["g1"]),
                    g2=float(row["g2"]),
                    penalty_residual=float(row["penalty_residual"]),
                    cardinality_eps=int(row["cardinality_eps"]),
                    step_l=float(row["step_l"]),
                    branch=row["branch"],
                    cum_seconds=float(row["cum_seconds"]),
                ))
        return trace


def finite_diff_gradient_check(obj: SmoothObjective, x, h=1e-6) -> float:
    """Max over coordinates of the relative error between the analytic
    gradient and central differences with step ``h``."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    g = np.asarray(obj.grad(x), dtype=float)
    scale = max(1.0, float(np.max(np.abs(g))))
    worst = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fp, fm = obj.value(x + e), obj.value(x - e)
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise ValueError("objective not finite at probe")
        fd = (fp - fm) / (2 * h)
        worst = max(worst, abs(fd - g[i]) / scale)
    return worst


def _power_iteration(matvec, n, tol=1e-10, max_iter=10_000):
    # deterministic start with no special alignment to coordinate axes
    v = np.random.default_rng(12345).standard_normal(n) + 1.0
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


def largest_eigenvalue(S, tol=1e-10, max_iter=10_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    S = np.asarray(S, dtype=float)
    return _power_iteration(lambda v: S @ v, S.shape[0], tol, max_iter)


def estimate_lipschitz(A, tol=1e-10, max_iter=10_000) -> float:
    """Return ``lambda_max(A^T A)`` by power iteration.

    Iterates on the smaller of the two Gram matrices, which share their
    nonzero spectrum.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.any(A):
        raise ValueError("zero operator")
    m, n = A.shape
    G = A @ A.T if m < n else A.T @ A
    return largest_eigenvalue(G, tol, max_iter)


def as_index_tuple(I: Optional[Sequence[int]], n: int) -> tuple:
    if I is None:
        return ()
    out = tuple(sorted({int(i) for i in I}))
    if out and (out[0] < 0 or out[-1] >= n):
        raise IndexError("index out of range")
    return out
