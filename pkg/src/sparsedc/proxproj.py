"""Closed-form projections and DC-decomposed sparse penalties."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .core import DcPenalty, FeasibleSet, as_index_tuple
from .sparsity import (
    soft_threshold,
    top_k1_norm,
    top_k2_sq,
    top_k2_sq_subgrad,
)

__all__ = [
    "proj_l2_ball",
    "proj_budget_hyperplane",
    "proj_nonneg",
    "proj_restricted",
    "free_set",
    "l2_ball",
    "budget_hyperplane",
    "nonneg_orthant",
    "make_feasible_set",
    "Regularizer",
    "make_regularizer",
    "TopK2Penalty",
    "top_k1_penalty_value",
    "REGULARIZERS",
]


def proj_l2_ball(u):
    u = np.asarray(u, dtype=float)
    nrm = np.linalg.norm(u)
    return u / nrm if nrm >= 1 else u.copy()


def proj_budget_hyperplane(u):
    u = np.asarray(u, dtype=float)
    if u.size < 1:
        raise ValueError("empty vector")
    return u + (1.0 - u.sum()) / u.size


def proj_nonneg(u, I):
    u = np.asarray(u, dtype=float)
    idx = np.asarray(as_index_tuple(I, u.size), dtype=int)
    out = u.copy()
    if idx.size:
        out[idx] = np.maximum(out[idx], 0.0)
    return out


def proj_restricted(set_kind, u, S, I=()):
    """Project onto ``C`` intersected with ``{x : x_i = 0 for i not in S}``."""
    u = np.asarray(u, dtype=float)
    S = np.asarray(as_index_tuple(S, u.size), dtype=int)
    if S.size == 0:
        raise ValueError("empty support")
    out = np.zeros_like(u)
    sub = u[S]
    if set_kind == "ball":
        out[S] = proj_l2_ball(sub)
    elif set_kind == "hyperplane":
        out[S] = proj_budget_hyperplane(sub)
    elif set_kind == "nonneg":
        keep = np.isin(S, np.asarray(as_index_tuple(I, u.size), dtype=int))
        sub = sub.copy()
        sub[keep] = np.maximum(sub[keep], 0.0)
        out[S] = sub
    elif set_kind == "free":
        out[S] = sub
    else:
        raise ValueError(f"unknown set kind {set_kind!r}")
    return out


def free_set(n) -> FeasibleSet:
    return FeasibleSet(n, "free", lambda u: u.copy(), lambda x, tol: True)


def l2_ball(n) -> FeasibleSet:
    return FeasibleSet(n, "ball", proj_l2_ball,
                       lambda x, tol: np.linalg.norm(x) <= 1 + tol)


def budget_hyperplane(n) -> FeasibleSet:
    return FeasibleSet(n, "hyperplane", proj_budget_hyperplane,
                       lambda x, tol: abs(x.sum() - 1) <= tol * max(1.0, math.sqrt(x.size)))


def nonneg_orthant(n, I=None) -> FeasibleSet:
    """``{x : x_i >= 0 for i in I}``; ``I=None`` constrains every coordinate."""
    idx = tuple(range(n)) if I is None else as_index_tuple(I, n)
    arr = np.asarray(idx, dtype=int)

    def member(x, tol):
        return arr.size == 0 or x[arr].min() >= -tol

    return FeasibleSet(n, "nonneg", lambda u: proj_nonneg(u, idx), member, idx)


def make_feasible_set(kind, n, I=None) -> FeasibleSet:
    if kind == "free":
        return free_set(n)
    if kind == "ball":
        return l2_ball(n)
    if kind == "hyperplane":
        return budget_hyperplane(n)
    if kind == "nonneg":
        return nonneg_orthant(n, I)
    raise ValueError(f"unknown set kind {kind!r}")


REGULARIZERS = ("l1", "capped_l1", "lsp", "scad", "mcp", "l1_minus_l2")


class Regularizer(DcPenalty):
    """Sparse regularizer written as ``lam * ||x||_1 - g2(x)``.

    The second term follows the standard DC decompositions of capped-l1,
    LSP, SCAD, MCP and l1-l2; its subgradient takes the inner-branch value
    (zero where available) at kinks.
    """

    def __init__(self, kind, lam, theta=None):
        if kind not in REGULARIZERS:
            raise ValueError(f"unknown regularizer {kind!r}")
        if not lam > 0:
            raise ValueError("lambda must be positive")
        needs_theta = kind in ("capped_l1", "lsp", "scad", "mcp")
        if needs_theta and (theta is None or not theta > 0):
            raise ValueError(f"{kind} needs a positive theta")
        if kind == "lsp" and theta < 1:
            raise ValueError("lsp decomposition has convex g2 only for theta >= 1")
        if kind == "scad":
            if theta <= 1:
                raise ValueError("scad needs theta > 1")
            if theta <= 2:
                warnings.warn("scad is usually run with theta > 2", stacklevel=2)
        if kind == "mcp" and theta <= 1:
            warnings.warn("mcp is usually run with theta > 1", stacklevel=2)
        self.kind = kind
        self.lam = float(lam)
        self.theta = None if theta is None else float(theta)

    def __repr__(self):
        return f"Regularizer({self.kind!r}, lam={self.lam}, theta={self.theta})"

    def value_g1(self, x):
        return self.lam * float(np.abs(x).sum())

    def prox_g1(self, u, alpha):
        return soft_threshold(u, self.lam / alpha)

    def value_g2(self, x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        lam, th = self.lam, self.theta
        k = self.kind
        if k == "l1":
            return 0.0
        if k == "capped_l1":
            return lam * float(np.maximum(a - th, 0.0).sum())
        if k == "lsp":
            return lam * float((a - np.log1p(a / th)).sum())
        if k == "scad":
            mid = (a * a - 2 * lam * a + lam * lam) / (2 * (th - 1))
            hi = lam * a - (th + 1) * lam * lam / 2
            return float(np.where(a <= lam, 0.0, np.where(a <= th * lam, mid, hi)).sum())
        if k == "mcp":
            return float(np.where(a <= th * lam, a * a / (2 * th),
                                  lam * a - th * lam * lam / 2).sum())
        return lam * float(np.linalg.norm(x))

    def subgrad_g2(self, x):
        x = np.asarray(x, dtype=float)
        a, sg = np.abs(x), np.sign(x)
        lam, th = self.lam, self.theta
        k = self.kind
        if k == "l1":
            return np.zeros_like(x)
        if k == "capped_l1":
            return np.where(a > th, lam * sg, 0.0)
        if k == "lsp":
            return lam * sg * (1.0 - 1.0 / (th + a))
        if k == "scad":
            return np.where(a <= lam, 0.0,
                            np.where(a <= th * lam, (x - lam * sg) / (th - 1), lam * sg))
        if k == "mcp":
            return np.where(a <= th * lam, x / th, lam * sg)
        nrm = np.linalg.norm(x)
        return lam * x / nrm if nrm > 0 else np.zeros_like(x)


def make_regularizer(kind, lam, theta=None) -> Regularizer:
    return Regularizer(kind, lam, theta)


class TopK2Penalty(DcPenalty):
    """Quadratic cardinality penalty: ``g1`` is the indicator of ``C`` and
    ``g2 = rho * top_k2_sq``.

    The matching ``rho * ||x||^2`` term belongs to the smooth part, so the
    whole penalty ``rho (||x||^2 - top_k2_sq(x))`` only appears once the
    problem is assembled.
    """

    def __init__(self, rho, k, feasible: FeasibleSet, member_tol=1e-9):
        if rho < 0:
            raise ValueError("rho must be nonnegative")
        if not 1 <= k <= feasible.n:
            raise ValueError("k out of range")
        self.rho = float(rho)
        self.k = int(k)
        self.feasible = feasible
        self.member_tol = member_tol

    def __repr__(self):
        return f"TopK2Penalty(rho={self.rho}, k={self.k}, C={self.feasible.kind})"

    def value_g1(self, x):
        return 0.0 if self.feasible.contains(x, self.member_tol) else math.inf

    def prox_g1(self, u, alpha):
        return self.feasible.project(u)

    def value_g2(self, x):
        return self.rho * top_k2_sq(x, self.k)

    def subgrad_g2(self, x):
        return self.rho * top_k2_sq_subgrad(x, self.k)


def top_k1_penalty_value(x, k, rho=1.0) -> float:
    """``rho * (||x||_1 - top_k1_norm(x, k))``, for diagnostics only."""
    return rho * (float(np.abs(x).sum()) - top_k1_norm(x, k))
