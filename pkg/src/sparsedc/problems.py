"""Problem families, synthetic data generators and CSV loaders."""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import SmoothObjective, as_index_tuple, estimate_lipschitz, largest_eigenvalue
from .proxproj import budget_hyperplane, l2_ball, make_regularizer, nonneg_orthant
from .solvers import CompositeProblem, penalized_problem

__all__ = [
    "FAMILIES",
    "quadratic_objective",
    "least_squares",
    "build_sparse_pca",
    "build_portfolio",
    "build_nnls",
    "build_l1l2_regression",
    "rng_for",
    "gen_l1l2_data",
    "gen_nnls_data",
    "gen_covariance_data",
    "ar1_covariance",
    "load_matrix_csv",
    "load_vector_csv",
    "write_matrix_csv",
    "InstanceSpec",
]

FAMILIES = ("sparse_pca", "portfolio", "nnls", "l1l2_regression")

_PSD_TOL = 1e-8
_TINY_L = float(np.finfo(float).eps)


def quadratic_objective(Q, c=None, lipschitz=None, convex=False) -> SmoothObjective:
    """``x^T Q x + c^T x`` for symmetric ``Q``."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
    if lipschitz is None:
        lipschitz = 2 * largest_eigenvalue(Q @ Q) ** 0.5
    return SmoothObjective(
        n=n,
        value=lambda x: float(x @ (Q @ x) + c @ x),
        grad=lambda x: 2 * (Q @ x) + c,
        lipschitz=max(float(lipschitz), _TINY_L),
        convex=convex,
    )


def least_squares(A, b) -> SmoothObjective:
    """``0.5 ||A x - b||^2`` with ``L = lambda_max(A^T A)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[0] != b.size:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b has {b.size}")
    L = estimate_lipschitz(A) if np.any(A) else _TINY_L

    def value(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    return SmoothObjective(A.shape[1], value, lambda x: A.T @ (A @ x - b), L, convex=True)


def _check_psd(V):
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise ValueError("V must be square")
    if not np.allclose(V, V.T, atol=1e-10):
        raise ValueError("V must be symmetric")
    if np.linalg.eigvalsh(V)[0] < -_PSD_TOL:
        raise ValueError("V is not positive semidefinite")
    return V


def build_sparse_pca(V, k, rho=1.0) -> CompositeProblem:
    """``min -x^T V x`` over the unit l2 ball with at most k nonzeros.

    The objective is concave; ``L_phi = 2 lambda_max(V)`` still bounds the
    gradient's Lipschitz constant.
    """
    V = _check_psd(V)
    phi = quadratic_objective(-V, lipschitz=2 * largest_eigenvalue(V))
    return penalized_problem(phi, l2_ball(V.shape[0]), k, rho, "sparse_pca")


def build_portfolio(V, r, alpha, k, rho=1.0) -> CompositeProblem:
    """``min alpha x^T V x - r^T x`` subject to ``1^T x = 1``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    V = _check_psd(V)
    r = np.asarray(r, dtype=float).reshape(-1)
    if r.size != V.shape[0]:
        raise ValueError("dimension mismatch between V and r")
    phi = quadratic_objective(alpha * V, -r, lipschitz=2 * alpha * largest_eigenvalue(V),
                              convex=True)
    return penalized_problem(phi, budget_hyperplane(V.shape[0]), k, rho, "portfolio")


def build_nnls(A, b, I, k, rho=1.0) -> CompositeProblem:
    """``min 0.5 ||A x - b||^2`` with ``x_i >= 0`` for the 0-based indices ``I``."""
    phi = least_squares(A, b)
    I = as_index_tuple(I, phi.n)
    return penalized_problem(phi, nonneg_orthant(phi.n, I), k, rho, "nnls")


def build_l1l2_regression(A, b, rho) -> CompositeProblem:
    """``0.5 ||A x - b||^2 + rho (||x||_1 - ||x||_2)``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    f = least_squares(A, b)
    return CompositeProblem(f, make_regularizer("l1_minus_l2", rho), f, None, None,
                            None, "l1l2_regression")


def rng_for(seed, purpose) -> np.random.Generator:
    """Philox stream keyed by ``(seed, purpose)``.

    Each purpose gets its own counter-based stream, so adding a draw for one
    purpose never shifts another's.
    """
    key = zlib.crc32(purpose.encode("utf-8"))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), key])))


def _check_dims(*dims):
    for d in dims:
        if not (isinstance(d, (int, np.integer)) and d >= 1):
            raise ValueError("invalid dimension")


def _unit_columns(A):
    return A / np.linalg.norm(A, axis=0)


def gen_l1l2_data(m, n, k, seed):
    """Gaussian design with unit-norm columns, k-sparse Gaussian truth and
    ``b = A xbar - 0.01 eps``."""
    _check_dims(m, n, k)
    if k > n:
        raise ValueError("invalid dimension: k exceeds n")
    A = _unit_columns(rng_for(seed, "l1l2/A").standard_normal((m, n)))
    support = rng_for(seed, "l1l2/support").choice(n, size=k, replace=False)
    vals = rng_for(seed, "l1l2/xbar")
    entries = vals.standard_normal(k)
    while np.any(entries == 0):
        zero = entries == 0
        entries[zero] = vals.standard_normal(int(zero.sum()))
    xbar = np.zeros(n)
    xbar[np.sort(support)] = entries
    eps = rng_for(seed, "l1l2/noise").standard_normal(m)
    b = A @ xbar - 0.01 * eps
    return A, b, xbar


def ar1_covariance(n, r=0.5):
    idx = np.arange(n)
    return r ** np.abs(idx[:, None] - idx[None, :])


def _ar1_rows(Z, r=0.5):
    # multiply each row by the Cholesky factor of the AR(1) covariance in O(n)
    out = np.empty_like(Z)
    out[:, 0] = Z[:, 0]
    c = np.sqrt(1 - r * r)
    for j in range(1, Z.shape[1]):
        out[:, j] = r * out[:, j - 1] + c * Z[:, j]
    return out


def gen_nnls_data(m, n, seed):
    """Rows of A from ``N(0, Sigma)`` with ``Sigma_ij = 0.5^|i-j|``, columns
    scaled to unit norm; ``xbar ~ U(-1, 1)`` and ``b = A xbar + eps``."""
    _check_dims(m, n)
    Z = rng_for(seed, "nnls/A").standard_normal((m, n))
    A = _unit_columns(_ar1_rows(Z))
    xbar = rng_for(seed, "nnls/xbar").uniform(-1.0, 1.0, n)
    eps = rng_for(seed, "nnls/noise").standard_normal(m)
    return A, A @ xbar + eps, xbar


def gen_covariance_data(n, seed, m=None):
    """Sample covariance and mean of ``m`` synthetic return vectors drawn
    from a three-factor model; used by the pca and portfolio benchmarks."""
    m = 2 * n if m is None else m
    _check_dims(m, n)
    rng = rng_for(seed, "cov/returns")
    loadings = rng.standard_normal((n, 3))
    factors = rng.standard_normal((m, 3))
    R = 0.01 * (factors @ loadings.T + rng.standard_normal((m, n))) + 5e-4
    V = np.cov(R, rowvar=False)
    return (V + V.T) / 2, R.mean(axis=0)


def _parse_float(cell):
    try:
        return float(cell)
    except ValueError:
        return None


def load_matrix_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError("empty file")
    first = [_parse_float(c) for c in rows[0]]
    start = 1 if any(v is None for v in first) else 0
    width = len(rows[0])
    data = []
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise ValueError(f"ragged row {lineno}")
        vals = [_parse_float(c) for c in row]
        if any(v is None for v in vals):
            raise ValueError(f"non-numeric cell in row {lineno}")
        data.append(vals)
    return np.array(data, dtype=float).reshape(len(data), width)


def load_vector_csv(path) -> np.ndarray:
    M = load_matrix_csv(path)
    if M.shape[0] != 1 and M.shape[1] != 1:
        raise ValueError(f"expected a single row or column, got shape {M.shape}")
    return M.reshape(-1)


def write_matrix_csv(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in M:
            w.writerow([repr(float(v)) for v in row])


@dataclass
class InstanceSpec:
    """Everything needed to rebuild one benchmark instance."""

    family: str
    m: int
    n: int
    k: Optional[int] = None
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        _check_dims(self.m, self.n)
        if self.k is not None and not 1 <= self.k <= self.n:
            raise ValueError("k out of range")

    def build(self, rho=1.0) -> CompositeProblem:
        p = self.params
        if self.family == "l1l2_regression":
            A, b, _ = gen_l1l2_data(self.m, self.n, self.k, self.seed)
            return build_l1l2_regression(A, b, p.get("lam", 5e-4))
        if self.family == "nnls":
            A, b, _ = gen_nnls_data(self.m, self.n, self.seed)
            I = p.get("I", range(self.n // 10))
            return build_nnls(A, b, I, self.k, rho)
        V, r = gen_covariance_data(self.n, self.seed, self.m)
        if self.family == "sparse_pca":
            return build_sparse_pca(V, self.k, rho)
        return build_portfolio(V, r, p.get("alpha", 10.0), self.k, rho)
