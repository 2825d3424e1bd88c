"""Proximal DC solvers for ``min f(x) + g1(x) - g2(x)``.

Every solver records one :class:`~sparsedc.core.TraceRecord` for the
starting point (``t = 0``) and one per iteration, and stops when the
relative change of the objective between successive iterates drops below
``cfg.rel_tol`` or after ``cfg.max_iter`` iterations.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    DcPenalty,
    FeasibleSet,
    IterationTrace,
    SmoothObjective,
    SolverConfig,
    TraceRecord,
    cardinality,
)
from .proxproj import TopK2Penalty, proj_restricted
from .sparsity import hard_threshold, penalty_residual, top_k_indices

__all__ = [
    "CompositeProblem",
    "SolveResult",
    "penalized_problem",
    "pdca_step",
    "next_theta",
    "nm_update",
    "nm_accept",
    "pdca_fixed",
    "pdca_backtracking",
    "apdca",
    "pdca_extrapolation",
    "iht",
    "penalty_continuation",
    "round_to_ksparse",
    "sweep_rho",
    "SOLVERS",
    "run_solver",
]


@dataclass(frozen=True)
class CompositeProblem:
    """``F(x) = f(x) + g1(x) - g2(x)``.

    For the penalized cardinality problem ``f`` already contains the
    ``rho ||x||^2`` term and ``phi``, ``feasible``, ``k``, ``rho`` describe
    the underlying constrained problem.
    """

    f: SmoothObjective
    penalty: DcPenalty
    phi: Optional[SmoothObjective] = None
    feasible: Optional[FeasibleSet] = None
    k: Optional[int] = None
    rho: Optional[float] = None
    name: str = ""

    @property
    def n(self):
        return self.f.n

    def parts(self, x):
        fv = float(self.f.value(x))
        g1 = float(self.penalty.value_g1(x))
        g2 = float(self.penalty.value_g2(x))
        return fv + g1 - g2, fv, g1, g2

    def objective(self, x):
        return self.parts(x)[0]

    def with_rho(self, rho) -> "CompositeProblem":
        if self.phi is None or self.feasible is None or self.k is None:
            raise ValueError("problem carries no cardinality penalty")
        return penalized_problem(self.phi, self.feasible, self.k, rho, self.name)


def penalized_problem(phi: SmoothObjective, feasible: FeasibleSet, k, rho,
                      name="") -> CompositeProblem:
    """Assemble ``phi(x) + rho (||x||^2 - top_k2_sq(x)) + I_C(x)``."""
    rho = float(rho)
    f = SmoothObjective(
        n=phi.n,
        value=lambda x: phi.value(x) + rho * float(x @ x),
        grad=lambda x: phi.grad(x) + 2 * rho * x,
        lipschitz=phi.lipschitz + 2 * rho,
        convex=phi.convex,
    )
    return CompositeProblem(f, TopK2Penalty(rho, k, feasible), phi, feasible, k, rho, name)


@dataclass
class SolveResult:
    x: np.ndarray
    F: float
    iterations: int
    trace: IterationTrace
    status: str
    message: str = ""
    info: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.status == "converged"


def _zero_clock():
    return 0.0


class _Recorder:
    def __init__(self, problem: CompositeProblem, clock: Optional[Callable]):
        self.problem = problem
        self.clock = clock or _zero_clock
        self.t0 = self.clock()
        self.trace = IterationTrace()

    def record(self, t, x, parts, step_l, branch, **extra):
        F, fv, g1, g2 = parts
        k = self.problem.k
        res = penalty_residual(x, k) if k is not None else math.nan
        self.trace.append(TraceRecord(
            t=t, F=F, phi=fv, g1=g1, g2=g2, penalty_residual=res,
            cardinality_eps=cardinality(x), step_l=float(step_l), branch=branch,
            cum_seconds=self.clock() - self.t0, **extra,
        ))


def _rel_change(old, new):
    return abs(old - new) / max(abs(old), np.finfo(float).tiny)


def _done(cfg, old, new):
    return cfg.rel_tol > 0 and _rel_change(old, new) < cfg.rel_tol


def _start_point(problem: CompositeProblem, x0):
    x = np.array(x0, dtype=float).reshape(-1)
    if x.size != problem.n:
        raise ValueError(f"x0 has length {x.size}, expected {problem.n}")
    if not math.isfinite(problem.penalty.value_g1(x)):
        warnings.warn("x0 outside dom g1; projecting", stacklevel=3)
        x = problem.penalty.prox_g1(x, 1.0)
    return x


def pdca_step(problem: CompositeProblem, x, l, grad=None, sub=None):
    """One proximal DC step ``prox_{g1/l}(x - (grad f(x) - s(x)) / l)``."""
    if grad is None:
        grad = problem.f.grad(x)
    if sub is None:
        sub = problem.penalty.subgrad_g2(x)
    return problem.penalty.prox_g1(x - (grad - sub) / l, l)


def _bb(dx, dg, rule):
    xx = float(dx @ dx)
    xg = float(dx @ dg)
    if xx == 0 or xg <= 0:
        return None
    return xg / xx if rule == "curvature" else xx / xg


def _initial_l(cfg, dx, dg, previous):
    l0 = _bb(dx, dg, cfg.bb_rule) if dx is not None else None
    if l0 is None:
        l0 = previous if previous is not None else cfg.l_min
    return min(max(l0, cfg.l_min), cfg.l_max)


def _backtrack(problem, base, grad, sub, l, cfg, accept):
    """Inflate ``l`` until ``accept(candidate, parts, l)`` holds.

    Returns ``(candidate, parts, l, evaluations, ok)``.
    """
    evals = 0
    for _ in range(cfg.max_backtracks + 1):
        cand = problem.penalty.prox_g1(base - (grad - sub) / l, l)
        parts = problem.parts(cand)
        evals += 1
        if math.isnan(parts[0]):
            return cand, parts, l, evals, False
        if accept(cand, parts, l):
            return cand, parts, l, evals, True
        l *= cfg.eta_bt
    return cand, parts, l, evals, False


def next_theta(th):
    return (math.sqrt(4 * th * th + 1) + 1) / 2


def nm_update(q, c, F_new, eta):
    """Weighted-average recursion: returns ``(q+, c+)`` with
    ``c+ = (eta q c + F_new) / (eta q + 1)``."""
    q_new = eta * q + 1
    return q_new, (eta * q * c + F_new) / q_new


def nm_accept(F_cand, dist_sq, c, delta):
    return F_cand + delta * dist_sq <= c


def _nonfinite(F):
    return not math.isfinite(F)


def pdca_fixed(problem: CompositeProblem, x0, cfg: Optional[SolverConfig] = None,
               *, clock=time.perf_counter) -> SolveResult:
    """Proximal DC algorithm with the fixed step ``1 / L``.

    On the penalized cardinality problem each step is
    ``proj_C((L_phi x - grad phi(x) + s) / (L_phi + 2 rho))``.
    """
    cfg = cfg or SolverConfig(step_rule="fixed")
    x = _start_point(problem, x0)
    L = problem.f.lipschitz
    rec = _Recorder(problem, clock)
    parts = problem.parts(x)
    F = parts[0]
    rec.record(0, x, parts, math.nan, "plain", n_evals=1)
    if _nonfinite(F):
        return SolveResult(x, F, 0, rec.trace, "error", "objective not finite at x0")
    status, msg, it = "max_iter", "", 0
    for t in range(1, cfg.max_iter + 1):
        x_new = pdca_step(problem, x, L)
        parts = problem.parts(x_new)
        F_new = parts[0]
        d = x_new - x
        rec.record(t, x_new, parts, L, "plain", step_sq=float(d @ d), n_evals=1)
        it = t
        if _nonfinite(F_new):
            status, msg = "error", "objective not finite"
            x, F = x_new, F_new
            break
        stop = _done(cfg, F, F_new)
        x, F = x_new, F_new
        if stop:
            status = "converged"
            break
    return SolveResult(x, F, it, rec.trace, status, msg)


def pdca_backtracking(problem: CompositeProblem, x0, cfg: Optional[SolverConfig] = None,
                      *, clock=time.perf_counter) -> SolveResult:
    """Proximal DC algorithm with BB-initialised backtracking.

    A trial ``l`` is accepted once
    ``F(x+) <= F(x) - sigma/2 ||x+ - x||^2``; otherwise ``l <- eta_bt * l``.
    """
    cfg = cfg or SolverConfig()
    x = _start_point(problem, x0)
    rec = _Recorder(problem, clock)
    parts = problem.parts(x)
    F = parts[0]
    rec.record(0, x, parts, math.nan, "plain", n_evals=1)
    if _nonfinite(F):
        return SolveResult(x, F, 0, rec.trace, "error", "objective not finite at x0")
    g = problem.f.grad(x)
    x_old = g_old = l_prev = None
    status, msg, it = "max_iter", "", 0
    sigma = cfg.sigma
    for t in range(1, cfg.max_iter + 1):
        dx = None if x_old is None else x - x_old
        dg = None if g_old is None else g - g_old
        l0 = _initial_l(cfg, dx, dg, l_prev)
        s = problem.penalty.subgrad_g2(x)
        F_ref = F

        def accept(c, p, l, x=x, F_ref=F_ref):
            d = c - x
            return p[0] <= F_ref - sigma / 2 * float(d @ d)

        x_new, parts, l, ev, ok = _backtrack(problem, x, g, s, l0, cfg, accept)
        it = t
        if not ok:
            status, msg = "error", "line search stalled"
            break
        d = x_new - x
        rec.record(t, x_new, parts, l, "plain", step_sq=float(d @ d), n_evals=ev)
        l_prev = l
        F_new = parts[0]
        x_old, g_old = x, g
        stop = _done(cfg, F, F_new)
        x, F = x_new, F_new
        g = problem.f.grad(x)
        if stop:
            status = "converged"
            break
    return SolveResult(x, F, it, rec.trace, status, msg)


def apdca(problem: CompositeProblem, x0, cfg: Optional[SolverConfig] = None,
          step: Optional[str] = None, *, clock=time.perf_counter) -> SolveResult:
    """Accelerated proximal DC algorithm with a nonmonotone safeguard.

    Each iteration extrapolates ``y`` from the last two iterates and the
    last trial point ``z``, takes a proximal DC step from ``y`` and keeps it
    when ``F(z) + delta ||z - y||^2`` does not exceed the weighted average
    ``c`` of past objective values.  Otherwise a plain step ``v`` from ``x``
    is also computed and the better of ``z`` and ``v`` is kept.

    ``step`` is ``"fixed"`` (step ``1/L``) or ``"backtracking"``; it
    defaults to ``cfg.step_rule``.
    """
    cfg = cfg or SolverConfig()
    step = step or cfg.step_rule
    if step not in ("fixed", "backtracking"):
        raise ValueError(f"unknown step rule {step!r}")
    f, pen = problem.f, problem.penalty
    L = f.lipschitz
    sigma, delta, eta = cfg.sigma, cfg.delta, cfg.eta_nm

    x = _start_point(problem, x0)
    x_prev = x.copy()
    z = x.copy()
    th_prev, th = 0.0, 1.0
    rec = _Recorder(problem, clock)
    parts = problem.parts(x)
    Fx = parts[0]
    rec.record(0, x, parts, math.nan, "plain", n_evals=1)
    if _nonfinite(Fx):
        return SolveResult(x, Fx, 0, rec.trace, "error", "objective not finite at x0")
    q, c = 1.0, Fx
    y_last = gy_last = None
    ly_prev = lx_prev = None
    counts = {"z": 0, "v": 0}
    status, msg, it = "max_iter", "", 0

    for t in range(1, cfg.max_iter + 1):
        y = x + (th_prev / th) * (z - x) + ((th_prev - 1) / th) * (x - x_prev)
        gy = f.grad(y)
        sy = pen.subgrad_g2(y)
        evals = 0
        if step == "fixed":
            z_new = pen.prox_g1(y - (gy - sy) / L, L)
            pz = problem.parts(z_new)
            ly = L
            evals += 1
        else:
            dy = None if y_last is None else y - y_last
            dgy = None if gy_last is None else gy - gy_last
            l0 = _initial_l(cfg, dy, dgy, ly_prev)
            Fy = problem.objective(y)
            evals += 1
            if math.isfinite(Fy):
                def accept(cand, p, l, y=y, Fy=Fy):
                    d = cand - y
                    return p[0] <= Fy - sigma / 2 * float(d @ d)
            else:
                # y left dom g1: fall back to the quadratic upper bound on f
                fy = f.value(y)

                def accept(cand, p, l, y=y, fy=fy, gy=gy):
                    d = cand - y
                    return p[1] <= fy + float(gy @ d) + l / 2 * float(d @ d)
            z_new, pz, ly, ev, ok = _backtrack(problem, y, gy, sy, l0, cfg, accept)
            evals += ev
            if not ok:
                it = t
                status, msg = "error", "line search stalled"
                break
            ly_prev = ly

        Fz = pz[0]
        dzy = z_new - y
        dist_zy = float(dzy @ dzy)
        c_used = c
        if nm_accept(Fz, dist_zy, c, delta):
            x_new, p_new, branch, l_used = z_new, pz, "z", ly
        else:
            gx = f.grad(x)
            sx = pen.subgrad_g2(x)
            if step == "fixed":
                v = pen.prox_g1(x - (gx - sx) / L, L)
                pv = problem.parts(v)
                lx = L
                evals += 1
            else:
                dx = None if y_last is None else x - y_last
                dgx = None if gy_last is None else gx - gy_last
                l0 = _initial_l(cfg, dx, dgx, lx_prev)

                def accept(cand, p, l, x=x, Fx=Fx):
                    d = cand - x
                    return p[0] <= Fx - sigma / 2 * float(d @ d)

                v, pv, lx, ev, ok = _backtrack(problem, x, gx, sx, l0, cfg, accept)
                evals += ev
                if not ok:
                    it = t
                    status, msg = "error", "line search stalled"
                    break
                lx_prev = lx
            if Fz <= pv[0]:
                x_new, p_new = z_new, pz
            else:
                x_new, p_new = v, pv
            branch, l_used = "v", lx
        counts[branch] += 1
        y_last, gy_last = y, gy

        th_prev, th = th, next_theta(th)
        F_new = p_new[0]
        q, c = nm_update(q, c, F_new, eta)

        d = x_new - x
        rec.record(t, x_new, p_new, l_used, branch, step_sq=float(d @ d),
                   c_ref=c_used, cand_F=Fz, cand_dist_sq=dist_zy, n_evals=evals)
        it = t
        if _nonfinite(F_new):
            status, msg = "error", "objective not finite"
            x_prev, x, z, Fx = x, x_new, z_new, F_new
            break
        stop = _done(cfg, Fx, F_new)
        x_prev, x, z, Fx = x, x_new, z_new, F_new
        if stop:
            status = "converged"
            break
    return SolveResult(x, Fx, it, rec.trace, status, msg,
                       info={"branches": counts, "eta_nm": eta, "step": step})


def pdca_extrapolation(problem: CompositeProblem, x0, cfg: Optional[SolverConfig] = None,
                       restart="both", restart_every=200, stop="objective",
                       beta_max=1 - 1e-12, beta=None, *, clock=time.perf_counter) -> SolveResult:
    """Proximal DC algorithm with Nesterov extrapolation and restarts.

    ``restart`` is ``"fixed"`` (reset every ``restart_every`` iterations),
    ``"adaptive"`` (reset when ``<y - x+, x+ - x> > 0``), ``"both"`` or
    ``"none"``.  ``stop="iterate"`` ends the run on
    ``||x+ - x|| / max(1, ||x+||) < rel_tol`` instead of the objective
    change.  A constant extrapolation weight can be forced with ``beta``.
    Intended for convex ``f``.
    """
    cfg = cfg or SolverConfig(step_rule="fixed")
    if restart not in ("fixed", "adaptive", "both", "none"):
        raise ValueError(f"unknown restart mode {restart!r}")
    if stop not in ("objective", "iterate"):
        raise ValueError(f"unknown stop rule {stop!r}")
    if not 0 <= beta_max < 1:
        raise ValueError("beta_max must lie in [0, 1)")
    fixed_restart = restart in ("fixed", "both")
    adaptive_restart = restart in ("adaptive", "both")
    L = problem.f.lipschitz
    x = _start_point(problem, x0)
    x_prev = x.copy()
    rec = _Recorder(problem, clock)
    parts = problem.parts(x)
    F = parts[0]
    rec.record(0, x, parts, math.nan, "plain", n_evals=1)
    if _nonfinite(F):
        return SolveResult(x, F, 0, rec.trace, "error", "objective not finite at x0")
    th_prev = th = 1.0
    n_fixed = n_adaptive = 0
    betas = []
    status, msg, it = "max_iter", "", 0
    for t in range(1, cfg.max_iter + 1):
        if beta is None:
            b = min((th_prev - 1) / th, beta_max)
        else:
            b = float(beta)
        betas.append(b)
        th_prev, th = th, (1 + math.sqrt(1 + 4 * th * th)) / 2
        restarted = False
        if fixed_restart and t % restart_every == 0:
            th_prev = th = 1.0
            n_fixed += 1
            restarted = True
        y = x + b * (x - x_prev)
        s = problem.penalty.subgrad_g2(x)
        x_new = problem.penalty.prox_g1(y - (problem.f.grad(y) - s) / L, L)
        if adaptive_restart and float((y - x_new) @ (x_new - x)) > 0:
            th_prev = th = 1.0
            n_adaptive += 1
            restarted = True
        parts = problem.parts(x_new)
        F_new = parts[0]
        d = x_new - x
        rec.record(t, x_new, parts, L, "plain", step_sq=float(d @ d), n_evals=1,
                   restart=restarted)
        it = t
        if _nonfinite(F_new):
            status, msg = "error", "objective not finite"
            x_prev, x, F = x, x_new, F_new
            break
        if stop == "objective":
            done = _done(cfg, F, F_new)
        else:
            done = cfg.rel_tol > 0 and math.sqrt(float(d @ d)) / max(1.0, float(np.linalg.norm(x_new))) < cfg.rel_tol
        x_prev, x, F = x, x_new, F_new
        if done:
            status = "converged"
            break
    return SolveResult(x, F, it, rec.trace, status, msg,
                       info={"restarts_fixed": n_fixed, "restarts_adaptive": n_adaptive,
                             "betas": betas})


class _NoPenalty(DcPenalty):
    def value_g1(self, x):
        return 0.0

    def prox_g1(self, u, alpha):
        return np.array(u, dtype=float)

    def value_g2(self, x):
        return 0.0

    def subgrad_g2(self, x):
        return np.zeros_like(x)


def iht(phi: SmoothObjective, k, x0, cfg: Optional[SolverConfig] = None,
        feasible: Optional[FeasibleSet] = None, *, clock=time.perf_counter) -> SolveResult:
    """Iterative hard thresholding ``x+ = H_k(x - grad phi(x) / L_phi)``.

    Only valid without convex constraints; the starting point is
    hard-thresholded first so every recorded iterate is k-sparse.
    """
    if feasible is not None and not feasible.is_free:
        raise ValueError("IHT requires C = R^n: hard thresholding is not "
                         "applicable with an additional convex constraint")
    cfg = cfg or SolverConfig(step_rule="fixed")
    if not 1 <= k <= phi.n:
        raise ValueError("k out of range")
    problem = CompositeProblem(phi, _NoPenalty(), phi, None, int(k), None, "iht")
    L = phi.lipschitz
    x = hard_threshold(np.asarray(x0, dtype=float), k)
    rec = _Recorder(problem, clock)
    parts = problem.parts(x)
    F = parts[0]
    rec.record(0, x, parts, math.nan, "plain", n_evals=1)
    status, msg, it = "max_iter", "", 0
    for t in range(1, cfg.max_iter + 1):
        x_new = hard_threshold(x - phi.grad(x) / L, k)
        parts = problem.parts(x_new)
        F_new = parts[0]
        d = x_new - x
        rec.record(t, x_new, parts, L, "plain", step_sq=float(d @ d), n_evals=1)
        it = t
        if _nonfinite(F_new):
            status, msg = "error", "objective not finite"
            x, F = x_new, F_new
            break
        stop = _done(cfg, F, F_new)
        x, F = x_new, F_new
        if stop:
            status = "converged"
            break
    return SolveResult(x, F, it, rec.trace, status, msg)


def round_to_ksparse(phi: SmoothObjective, feasible: FeasibleSet, x, k,
                     cfg: Optional[SolverConfig] = None, tol=1e-12, max_iter=10_000):
    """Round ``x`` to a k-sparse point by re-optimising on its top-k support.

    Solves ``min phi`` over ``C`` with the off-support coordinates fixed at
    zero by projected gradient with BB-initialised backtracking.
    """
    cfg = cfg or SolverConfig()
    x = np.asarray(x, dtype=float)
    S = top_k_indices(np.abs(x), k)
    kind, I = feasible.kind, feasible.index

    def proj(u):
        return proj_restricted(kind, u, S, I)

    x = proj(x)
    F = phi.value(x)
    g = phi.grad(x)
    x_old = g_old = l_prev = None
    for _ in range(max_iter):
        dx = None if x_old is None else x - x_old
        dg = None if g_old is None else g - g_old
        l = _initial_l(cfg, dx, dg, l_prev if l_prev is not None else phi.lipschitz)
        for _ in range(cfg.max_backtracks + 1):
            cand = proj(x - g / l)
            d = cand - x
            Fc = phi.value(cand)
            if Fc <= F - cfg.sigma / 2 * float(d @ d):
                break
            l *= cfg.eta_bt
        else:
            break
        l_prev = l
        step = math.sqrt(float(d @ d))
        x_old, g_old = x, g
        x, Fold, F = cand, F, Fc
        g = phi.grad(x)
        if step <= tol * max(1.0, float(np.linalg.norm(x))) or _rel_change(Fold, F) <= tol:
            break
    return x


def _default_schedule(cfg: SolverConfig, stages=11):
    if cfg.rho_grid:
        return tuple(sorted(cfg.rho_grid))
    rho0 = cfg.rho if cfg.rho > 0 else 1.0
    return tuple(rho0 * 10.0 ** j for j in range(stages))


def penalty_continuation(phi: SmoothObjective, feasible: FeasibleSet, k, x0,
                         cfg: Optional[SolverConfig] = None, schedule=None,
                         inner="apdca", *, clock=time.perf_counter) -> SolveResult:
    """Solve the penalized problem for an increasing sequence of ``rho``.

    Each stage warm-starts from the previous solution; the run stops once
    ``||x||^2 - top_k2_sq(x, k) <= cfg.residual_tol``.
    """
    cfg = cfg or SolverConfig()
    schedule = tuple(schedule) if schedule is not None else _default_schedule(cfg)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("rho schedule must be increasing")
    runner = {"apdca": apdca, "pdca-bt": pdca_backtracking, "pdca": pdca_fixed}[inner]
    trace = IterationTrace()
    x = np.asarray(x0, dtype=float)
    residuals, total_it = [], 0
    status, msg, res, F = "max_iter", "", None, math.nan
    t_off, time_off = 0, 0.0
    for rho in schedule:
        prob = penalized_problem(phi, feasible, k, rho)
        res = runner(prob, x, cfg, clock=clock)
        trace.extend(res.trace, t_offset=t_off, time_offset=time_off)
        t_off = trace[-1].t + 1
        time_off = trace[-1].cum_seconds
        total_it += res.iterations
        x, F = res.x, res.F
        r = penalty_residual(x, k)
        residuals.append(r)
        if res.status == "error":
            status, msg = "error", res.message
            break
        if r <= cfg.residual_tol:
            status = "converged"
            break
    else:
        msg = f"schedule exhausted with residual {residuals[-1]:.3e}"
    return SolveResult(x, F, total_it, trace, status, msg,
                       info={"rho_final": rho, "residuals": residuals,
                             "stages": len(residuals)})


def _run_apdca_fix(p, x0, cfg, clock):
    return apdca(p, x0, cfg, "fixed", clock=clock)


def _run_apdca_bt(p, x0, cfg, clock):
    return apdca(p, x0, cfg, "backtracking", clock=clock)


def _run_pdcae(p, x0, cfg, clock):
    return pdca_extrapolation(p, x0, cfg, restart="both", restart_every=200,
                              stop="iterate", clock=clock)


SOLVERS = {
    "pdca": lambda p, x0, cfg, clock: pdca_fixed(p, x0, cfg, clock=clock),
    "pdca-bt": lambda p, x0, cfg, clock: pdca_backtracking(p, x0, cfg, clock=clock),
    "apdca-fix": _run_apdca_fix,
    "apdca-bt": _run_apdca_bt,
    "pdcae": _run_pdcae,
}


def run_solver(name, problem: CompositeProblem, x0, cfg: SolverConfig,
               clock=time.perf_counter) -> SolveResult:
    if name == "iht":
        if problem.feasible is not None and not problem.feasible.is_free:
            raise ValueError("IHT requires C = R^n: hard thresholding is not "
                             "applicable with an additional convex constraint")
        if problem.k is None:
            raise ValueError("IHT needs a sparsity level k")
        return iht(problem.phi or problem.f, problem.k, x0, cfg, clock=clock)
    try:
        fn = SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}") from None
    return fn(problem, x0, cfg, clock)


def sweep_rho(phi: SmoothObjective, feasible: FeasibleSet, k, x0, cfg: SolverConfig,
              solver="apdca-bt", grid=None, rounding=True,
              clock=time.perf_counter) -> SolveResult:
    """Solve the penalized problem independently for each ``rho`` in the grid
    and keep the k-sparse output with the smallest ``phi``."""
    grid = tuple(grid) if grid is not None else tuple(10.0 ** i for i in range(-4, 5))
    best, rows = None, []
    for rho in grid:
        prob = penalized_problem(phi, feasible, k, rho)
        res = run_solver(solver, prob, x0, cfg, clock)
        x = round_to_ksparse(phi, feasible, res.x, k, cfg) if rounding else res.x
        obj = float(phi.value(x))
        card = cardinality(x)
        rows.append({"rho": rho, "objective": obj, "cardinality": card,
                     "iterations": res.iterations, "status": res.status})
        if card <= k and res.status != "error" and (best is None or obj < best[0]):
            best = (obj, rho, res, x)
    if best is None:
        raise RuntimeError("no rho in the grid produced a k-sparse solution")
    obj, rho, res, x = best
    res.info.update({"rho": rho, "sweep": rows, "x_raw": res.x})
    return SolveResult(x, obj, res.iterations, res.trace, res.status, res.message, res.info)
