"""Pure Python/numpy twins of the compiled kernels.

Selected at import when the extension is unavailable or when
EHOPT_KERNEL=python is set. Semantics (including every floating-point
operation and tie-break) match `_speedups.pyx` exactly; the compiled
module is built with FP contraction disabled so both produce the same
doubles. Keep the two files in lockstep.

Variable status codes used by the LP pivot loop:
    0 = nonbasic at lower bound   1 = nonbasic at upper bound
    2 = basic                     3 = fixed nonbasic (never enters)
"""
import numpy as np

IS_COMPILED = False

LP_OPTIMAL = 0
LP_UNBOUNDED = 1
LP_ITER_LIMIT = 2

_TIE_TOL = 1e-10
_DEGEN_TOL = 1e-10


def lp_pivot_loop(W, xb, basis, vstat, lo, up, r, tol, ptol, max_iter, bland_trigger):
    """Bounded-variable primal simplex pivot loop (maximization).

    Mutates the tableau W (= B^-1 A), basic values xb, basis, status
    vector and reduced costs r in place. Entering rule is largest
    reduced-cost violation, switching to Bland's smallest-index rule
    after `bland_trigger` consecutive degenerate pivots (anti-cycling).
    Returns (status, pivot count).
    """
    m, n = W.shape
    iters = 0
    degen_streak = 0
    bland = False
    while iters < max_iter:
        # --- entering variable ---
        score = np.where(vstat == 0, r, np.where(vstat == 1, -r, -np.inf))
        if bland:
            eligible = np.where(score > tol)[0]
            if eligible.size == 0:
                return LP_OPTIMAL, iters
            j = int(eligible[0])
        else:
            j = int(np.argmax(score))
            if not score[j] > tol:
                return LP_OPTIMAL, iters
        direction = 1.0 if vstat[j] == 0 else -1.0

        # --- ratio test ---
        col = W[:, j]
        coef = direction * col
        with np.errstate(divide="ignore", invalid="ignore"):
            caps = np.where(
                coef > ptol,
                (xb - lo[basis]) / coef,
                np.where(coef < -ptol, (up[basis] - xb) / (-coef), np.inf),
            )
        caps = np.maximum(caps, 0.0)
        t_min = float(caps.min()) if m else np.inf
        t_bound = up[j] - lo[j]
        if t_bound <= t_min + _TIE_TOL:
            # bound flip (preferred on ties: no pivot needed)
            if not np.isfinite(t_bound):
                return LP_UNBOUNDED, iters
            iters += 1
            f2 = direction * t_bound
            xb -= f2 * col
            vstat[j] = 1 - vstat[j]
            if t_bound <= _DEGEN_TOL:
                degen_streak += 1
                if degen_streak >= bland_trigger:
                    bland = True
            else:
                degen_streak = 0
                bland = False
            continue
        if not np.isfinite(t_min):
            return LP_UNBOUNDED, iters

        ties = np.where(caps <= t_min + _TIE_TOL)[0]
        if bland:
            i_leave = int(ties[np.argmin(basis[ties])])
        else:
            i_leave = int(ties[np.argmax(np.abs(col[ties]))])
        t_star = float(caps[i_leave])
        leave_to_upper = coef[i_leave] < 0.0

        iters += 1
        if t_star <= _DEGEN_TOL:
            degen_streak += 1
            if degen_streak >= bland_trigger:
                bland = True
        else:
            degen_streak = 0
            bland = False

        # --- move nonbasics' contribution into basic values ---
        f2 = direction * t_star
        xb -= f2 * col
        enter_val = lo[j] + t_star if direction > 0 else up[j] - t_star

        old = int(basis[i_leave])
        vstat[old] = 1 if leave_to_upper else 0
        if up[old] - lo[old] <= 0.0:
            vstat[old] = 3  # fixed variables never re-enter
        basis[i_leave] = j
        vstat[j] = 2
        xb[i_leave] = enter_val

        # --- eliminate the entering column ---
        piv = W[i_leave, j]
        W[i_leave, :] /= piv
        prow = W[i_leave, :].copy()
        factors = W[:, j].copy()
        factors[i_leave] = 0.0
        W -= np.outer(factors, prow)
        W[:, j] = 0.0
        W[i_leave, j] = 1.0
        rj = r[j]
        if rj != 0.0:
            r -= rj * prow
        r[j] = 0.0
    return LP_ITER_LIMIT, iters


def _scan(cum_row, u):
    """Smallest index k with u < cum_row[k]; cum_row[-1] is exactly 1."""
    k = 0
    while u >= cum_row[k]:
        k += 1
    return k


def q_learn_chunk(
    q, visits, cum_e, cum_d, cum_h, harvest, cost, data_bits,
    b_max, e, d, h, b, gamma, alpha, epsilon, u_explore, u_action, u_e, u_d, u_h,
):
    """Advance a Q-learner through len(u_explore) environment slots.

    q and visits are updated in place; alpha <= 0 selects the per-visit
    Robbins-Monro schedule 1/(1 + visits). Returns the final state.
    """
    n_d, n_h = cost.shape
    n_b = b_max + 1
    # read-only inputs as plain lists (exact values, much faster to index)
    ce, cd, ch = cum_e.tolist(), cum_d.tolist(), cum_h.tolist()
    harv, cst, bits = harvest.tolist(), cost.tolist(), data_bits.tolist()
    uxp, uac = u_explore.tolist(), u_action.tolist()
    ue, ud, uh = u_e.tolist(), u_d.tolist(), u_h.tolist()
    for k in range(len(uxp)):
        cost_dh = cst[d][h]
        s = ((e * n_d + d) * n_h + h) * n_b + b
        can = b >= cost_dh
        greedy_act = 1 if (can and q[s, 1] > q[s, 0]) else 0
        if uxp[k] < epsilon:
            a = (1 if uac[k] >= 0.5 else 0) if can else 0
        else:
            a = greedy_act
        reward = bits[d] if a else 0.0

        e2 = _scan(ce[e], ue[k])
        d2 = _scan(cd[d], ud[k])
        h2 = _scan(ch[h], uh[k])
        b2 = b - (cost_dh if a else 0) + harv[e]
        if b2 > b_max:
            b2 = b_max
        s2 = ((e2 * n_d + d2) * n_h + h2) * n_b + b2

        can2 = b2 >= cst[d2][h2]
        vmax = max(q[s2, 0], q[s2, 1]) if can2 else q[s2, 0]
        al = alpha if alpha > 0.0 else 1.0 / (1.0 + visits[s, a])
        q[s, a] = (1.0 - al) * q[s, a] + al * (reward + gamma * vmax)
        visits[s, a] += 1
        e, d, h, b = e2, d2, h2, b2
    return e, d, h, b


def r_learn_chunk(
    q, visits, cum_e, cum_d, cum_h, harvest, cost, data_bits,
    b_max, e, d, h, b, rho, alpha, beta, epsilon,
    u_explore, u_action, u_e, u_d, u_h,
):
    """Average-reward twin of q_learn_chunk.

    The gain estimate rho moves only on greedy slots and is subtracted
    from the reward in the Q update (no discounting). Returns the final
    state and rho.
    """
    n_d, n_h = cost.shape
    n_b = b_max + 1
    ce, cd, ch = cum_e.tolist(), cum_d.tolist(), cum_h.tolist()
    harv, cst, bits = harvest.tolist(), cost.tolist(), data_bits.tolist()
    uxp, uac = u_explore.tolist(), u_action.tolist()
    ue, ud, uh = u_e.tolist(), u_d.tolist(), u_h.tolist()
    for k in range(len(uxp)):
        cost_dh = cst[d][h]
        s = ((e * n_d + d) * n_h + h) * n_b + b
        can = b >= cost_dh
        greedy_act = 1 if (can and q[s, 1] > q[s, 0]) else 0
        if uxp[k] < epsilon:
            a = (1 if uac[k] >= 0.5 else 0) if can else 0
            greedy_step = False
        else:
            a = greedy_act
            greedy_step = True
        reward = bits[d] if a else 0.0
        vmax_here = max(q[s, 0], q[s, 1]) if can else q[s, 0]

        e2 = _scan(ce[e], ue[k])
        d2 = _scan(cd[d], ud[k])
        h2 = _scan(ch[h], uh[k])
        b2 = b - (cost_dh if a else 0) + harv[e]
        if b2 > b_max:
            b2 = b_max
        s2 = ((e2 * n_d + d2) * n_h + h2) * n_b + b2

        can2 = b2 >= cst[d2][h2]
        vmax = max(q[s2, 0], q[s2, 1]) if can2 else q[s2, 0]
        if greedy_step:
            rho = (1.0 - beta) * rho + beta * (reward + vmax - vmax_here)
        al = alpha if alpha > 0.0 else 1.0 / (1.0 + visits[s, a])
        q[s, a] = (1.0 - al) * q[s, a] + al * ((reward - rho) + vmax)
        visits[s, a] += 1
        e, d, h, b = e2, d2, h2, b2
    return e, d, h, b, rho
