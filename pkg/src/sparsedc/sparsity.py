"""Top-k norms, thresholding operators and the cardinality equivalence
checker."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "top_k_indices",
    "top_k1_norm",
    "top_k1_subgrad",
    "top_k2_sq",
    "top_k2_sq_subgrad",
    "hard_threshold",
    "soft_threshold",
    "penalty_residual",
    "Prop1Report",
    "check_prop1",
]

EQ_TOL = 1e-12


def _check_k(k, n):
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= n):
        raise ValueError("k out of range")


def top_k_indices(scores, k) -> np.ndarray:
    """Indices of the k largest scores, ordered by descending score.

    Ties go to the lowest index.  Selection runs through a partition to the
    k-th order statistic, so only the k winners get sorted.
    """
    scores = np.asarray(scores, dtype=float)
    n = scores.size
    _check_k(k, n)
    if k == n:
        cand = np.arange(n)
    else:
        kth = np.partition(scores, n - k)[n - k]
        above = np.flatnonzero(scores > kth)
        ties = np.flatnonzero(scores == kth)[: k - above.size]
        cand = np.concatenate([above, ties])
    order = np.lexsort((cand, -scores[cand]))
    return cand[order]


def _mask(scores, k):
    m = np.zeros(np.size(scores), dtype=bool)
    m[top_k_indices(scores, k)] = True
    return m


def top_k1_norm(x, k) -> float:
    # fsum: exactly rounded, so the value is order independent
    a = np.abs(np.asarray(x, dtype=float))
    return math.fsum(a[top_k_indices(a, k)])


def top_k1_subgrad(x, k) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    v = np.zeros_like(x)
    idx = top_k_indices(np.abs(x), k)
    v[idx] = np.sign(x[idx])
    return v


def top_k2_sq(x, k) -> float:
    s = np.asarray(x, dtype=float) ** 2
    return math.fsum(s[top_k_indices(s, k)])


def top_k2_sq_subgrad(x, k) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    v = np.zeros_like(x)
    idx = top_k_indices(x * x, k)
    v[idx] = 2 * x[idx]
    return v


def penalty_residual(x, k) -> float:
    """``||x||^2 - top_k2_sq(x, k)``; zero exactly when x is k-sparse."""
    s = np.asarray(x, dtype=float) ** 2
    mask = _mask(s, k)
    return float(s[~mask].sum())


def hard_threshold(u, k) -> np.ndarray:
    """Keep the k largest-magnitude entries of u and zero the rest."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    idx = top_k_indices(np.abs(u), k)
    out[idx] = u[idx]
    return out


def soft_threshold(u, tau) -> np.ndarray:
    if tau < 0:
        raise ValueError("negative tau")
    u = np.asarray(u, dtype=float)
    return np.sign(u) * np.maximum(np.abs(u) - tau, 0.0)


@dataclass(frozen=True)
class Prop1Report:
    cond1: bool
    cond2: bool
    cond3: bool
    cond4: bool
    cond5: bool
    cond6: bool
    kappa_h: Optional[int]
    kappa_n: Optional[int]

    @property
    def first_group(self):
        return (self.cond1, self.cond2, self.cond3)

    @property
    def second_group(self):
        return (self.cond4, self.cond5, self.cond6)


def _min_kappa(total, prefix, upper, lowest):
    for kappa in range(lowest, upper + 1):
        if abs(total - prefix[kappa]) <= EQ_TOL:
            return kappa
    return None


def check_prop1(x, k, h, nu="abs", kappa_from_zero=True) -> Prop1Report:
    """Evaluate the six cardinality conditions for ``x`` with ``k < h``.

    Conditions 5 and 6 ask for the smallest ``kappa`` at which a partial
    top-kappa sum already equals the top-h (resp. full) sum.  With
    ``kappa_from_zero`` the search starts at 0, which makes the zero vector
    report ``kappa = 0`` instead of 1; starting at 1 reproduces the literal
    range and breaks the 4-5-6 equivalence at ``x = 0, k = 1``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if not (1 <= k < h <= n):
        raise ValueError("need 1 <= k < h <= n")
    if nu == "abs":
        vals = np.abs(x)
    elif nu == "square":
        vals = x * x
    else:
        raise ValueError(f"unsupported nu {nu!r}")
    srt = np.sort(vals)[::-1]
    prefix = np.concatenate([[0.0], np.cumsum(srt)])
    l0 = int(np.count_nonzero(x))
    lowest = 0 if kappa_from_zero else 1
    kappa_h = _min_kappa(prefix[h], prefix, h - 1, lowest)
    kappa_n = _min_kappa(prefix[n], prefix, n - 1, lowest)
    return Prop1Report(
        cond1=l0 <= k,
        cond2=abs(prefix[h] - prefix[k]) <= EQ_TOL,
        cond3=abs(prefix[n] - prefix[k]) <= EQ_TOL,
        cond4=l0 == k,
        cond5=kappa_h == k,
        cond6=kappa_n == k,
        kappa_h=kappa_h,
        kappa_n=kappa_n,
    )
