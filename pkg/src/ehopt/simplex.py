"""Bounded-variable primal simplex for small dense LPs.

Maximizes c'v subject to A v <= b and lo <= v <= up. Variable bounds
are handled natively (no extra rows), which is what keeps the offline
relaxations small: box constraints on the schedule and battery
variables never enter the tableau. Infeasible starts get a phase-1 run
with artificial columns on the violated rows.

The pivot loop itself lives in `_kernels` (compiled when available).
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import SimplexNumericalError

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
MAX_ITER_FACTOR = 200  # pivots allowed per constraint row
BLAND_TRIGGER = 32  # consecutive degenerate pivots before Bland's rule

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LpProblem:
    """max objective . v  s.t.  rows @ v <= rhs,  lower <= v <= upper."""

    objective: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    # When built from an offline instance, the first n_slots variables are
    # the per-slot transmit fractions and the next n_slots the batteries.
    n_slots: int | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        a = np.atleast_2d(np.asarray(self.rows, dtype=float))
        b = np.asarray(self.rhs, dtype=float)
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        for name, arr in (("objective", c), ("rows", a), ("rhs", b),
                          ("lower", lo), ("upper", up)):
            object.__setattr__(self, name, arr)
        n = c.shape[0]
        if a.shape != (b.shape[0], n) or lo.shape != (n,) or up.shape != (n,):
            raise ValueError("inconsistent LP dimensions")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("LP data must be finite")
        if not np.all(np.isfinite(lo)):
            raise ValueError("lower bounds must be finite")
        if np.any(lo > up):
            raise ValueError("lower bound exceeds upper bound")


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str
    x: np.ndarray  # transmit part (or the full vector for generic problems)
    b: np.ndarray  # battery part (empty for generic problems)
    value: float
    variables: np.ndarray = field(default=None, repr=False)
    iterations: int = 0
    integral: bool | None = None


def _run_phase(W, xb, basis, vstat, lo, up, r, max_iter):
    return _kernels.lp_pivot_loop(
        W, xb, basis, vstat, lo, up, r,
        PIVOT_TOL, PIVOT_TOL, max_iter, BLAND_TRIGGER,
    )


def solve_bounded_lp(c, a, b, lo, up):
    """Two-phase bounded simplex. Returns (status, variables, iterations)."""
    c = np.asarray(c, dtype=float)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    up = np.asarray(up, dtype=float)
    m, ns = a.shape
    max_iter = MAX_ITER_FACTOR * max(m, 20)

    # columns: structural | slacks | (artificials appended on demand)
    x0 = lo.copy()
    resid = b - a @ x0
    bad = resid < 0.0
    n_art = int(bad.sum())
    n = ns + m + n_art

    W = np.zeros((m, n))
    W[:, :ns] = a
    W[:, ns:ns + m] = np.eye(m)
    art_cols = np.full(m, -1, dtype=np.int64)
    if n_art:
        k = ns + m
        for i in np.where(bad)[0]:
            W[i, k] = -1.0
            art_cols[i] = k
            k += 1
        W[bad, :] *= -1.0  # basis of +/-1 diagonals; invert up front

    lo_full = np.concatenate([lo, np.zeros(m + n_art)])
    up_full = np.concatenate([up, np.full(m + n_art, np.inf)])
    vstat = np.zeros(n, dtype=np.int8)
    vstat[np.where(lo_full >= up_full)[0]] = 3  # fixed vars never enter
    basis = np.where(bad, art_cols, ns + np.arange(m)).astype(np.int64)
    vstat[basis] = 2
    xb = np.abs(resid)
    iters_total = 0

    if n_art:
        # phase 1: drive the artificial mass to zero
        c1 = np.zeros(n)
        c1[ns + m:] = -1.0
        r = c1 - c1[basis] @ W
        status, iters = _run_phase(W, xb, basis, vstat, lo_full, up_full, r, max_iter)
        iters_total += iters
        art_mass = np.abs(xb[basis >= ns + m]).sum()
        if status != _kernels.LP_OPTIMAL or art_mass > FEAS_TOL * max(1.0, np.abs(b).max()):
            return STATUS_INFEASIBLE, None, iters_total
        # pin artificials at zero for phase 2
        up_full[ns + m:] = 0.0
        for i in range(m):
            if basis[i] >= ns + m:
                xb[i] = 0.0
        nonbasic_art = (np.arange(n) >= ns + m) & (vstat != 2)
        vstat[nonbasic_art] = 3

    c_full = np.concatenate([c, np.zeros(m + n_art)])
    r = c_full - c_full[basis] @ W
    r[vstat == 2] = 0.0
    status, iters = _run_phase(W, xb, basis, vstat, lo_full, up_full, r, max_iter)
    iters_total += iters
    if status == _kernels.LP_UNBOUNDED:
        return STATUS_UNBOUNDED, None, iters_total
    if status != _kernels.LP_OPTIMAL:
        raise SimplexNumericalError(f"pivot limit {max_iter} reached")

    v = np.where(vstat == 1, up_full, lo_full)
    v[basis] = xb
    return STATUS_OPTIMAL, v[:ns], iters_total


def simplex_solve(problem: LpProblem) -> LpSolution:
    """Solve an LpProblem; feasibility of the result is re-checked."""
    status, v, iters = solve_bounded_lp(
        problem.objective, problem.rows, problem.rhs, problem.lower, problem.upper
    )
    if status != STATUS_OPTIMAL:
        empty = np.array([])
        return LpSolution(status, empty, empty, float("nan"), None, iters)

    slack = problem.rhs - problem.rows @ v
    worst = max(
        float(np.maximum(-slack, 0.0).max(initial=0.0)),
        float(np.maximum(problem.lower - v, 0.0).max(initial=0.0)),
        float(np.maximum(v - problem.upper, 0.0).max(initial=0.0)),
    )
    scale = max(1.0, float(np.abs(problem.rhs).max(initial=0.0)))
    if worst > FEAS_TOL * scale:
        raise SimplexNumericalError(f"solution violates constraints by {worst:.3e}")

    value = float(problem.objective @ v)
    if problem.n_slots is None:
        return LpSolution(STATUS_OPTIMAL, v, np.array([]), value, v, iters)
    ns = problem.n_slots
    return LpSolution(STATUS_OPTIMAL, v[:ns], v[ns:2 * ns], value, v, iters)
