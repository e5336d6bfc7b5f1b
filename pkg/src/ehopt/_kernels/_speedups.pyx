# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the kernels in _fallback.py.

Every floating-point expression, comparison and tie-break mirrors the
fallback line by line; the build disables FP contraction so results are
identical doubles. Keep the two files in lockstep.
"""
from libc.math cimport INFINITY, isinf

import numpy as np

IS_COMPILED = True

LP_OPTIMAL = 0
LP_UNBOUNDED = 1
LP_ITER_LIMIT = 2

cdef int _OPT = 0
cdef int _UNB = 1
cdef int _LIM = 2
cdef double _TIE_TOL = 1e-10
cdef double _DEGEN_TOL = 1e-10


def lp_pivot_loop(double[:, ::1] W, double[::1] xb, long long[::1] basis,
                  signed char[::1] vstat, double[::1] lo, double[::1] up,
                  double[::1] r, double tol, double ptol,
                  long long max_iter, long long bland_trigger):
    """See _fallback.lp_pivot_loop."""
    cdef Py_ssize_t m = W.shape[0]
    cdef Py_ssize_t n = W.shape[1]
    cdef long long iters = 0, degen_streak = 0
    cdef bint bland = False
    cdef Py_ssize_t i, j, k, i_leave
    cdef long long old
    cdef int status = -1
    cdef double direction, sc, best, coef, cap, t_min, t_bound, thresh
    cdef double t_star, f2, enter_val, piv, f, rj, best_abs
    cdef long long best_basis
    cdef bint leave_to_upper

    with nogil:
        while iters < max_iter:
            # --- entering variable ---
            j = -1
            if bland:
                for k in range(n):
                    if vstat[k] == 0:
                        sc = r[k]
                    elif vstat[k] == 1:
                        sc = -r[k]
                    else:
                        continue
                    if sc > tol:
                        j = k
                        break
            else:
                best = tol
                for k in range(n):
                    if vstat[k] == 0:
                        sc = r[k]
                    elif vstat[k] == 1:
                        sc = -r[k]
                    else:
                        continue
                    if sc > best:
                        best = sc
                        j = k
            if j < 0:
                status = _OPT
                break
            direction = 1.0 if vstat[j] == 0 else -1.0

            # --- ratio test, pass 1: minimum cap ---
            t_min = INFINITY
            for i in range(m):
                coef = direction * W[i, j]
                if coef > ptol:
                    cap = (xb[i] - lo[basis[i]]) / coef
                elif coef < -ptol:
                    cap = (up[basis[i]] - xb[i]) / (-coef)
                else:
                    continue
                if cap < 0.0:
                    cap = 0.0
                if cap < t_min:
                    t_min = cap
            t_bound = up[j] - lo[j]
            if t_bound <= t_min + _TIE_TOL:
                if isinf(t_bound):
                    status = _UNB
                    break
                iters += 1
                f2 = direction * t_bound
                for i in range(m):
                    xb[i] -= f2 * W[i, j]
                vstat[j] = 1 - vstat[j]
                if t_bound <= _DEGEN_TOL:
                    degen_streak += 1
                    if degen_streak >= bland_trigger:
                        bland = True
                else:
                    degen_streak = 0
                    bland = False
                continue
            if isinf(t_min):
                status = _UNB
                break

            # --- ratio test, pass 2: tie-break among minimal caps ---
            thresh = t_min + _TIE_TOL
            i_leave = -1
            best_basis = 0
            best_abs = 0.0
            for i in range(m):
                coef = direction * W[i, j]
                if coef > ptol:
                    cap = (xb[i] - lo[basis[i]]) / coef
                elif coef < -ptol:
                    cap = (up[basis[i]] - xb[i]) / (-coef)
                else:
                    continue
                if cap < 0.0:
                    cap = 0.0
                if cap <= thresh:
                    if bland:
                        if i_leave < 0 or basis[i] < best_basis:
                            i_leave = i
                            best_basis = basis[i]
                    else:
                        f = W[i, j]
                        if f < 0.0:
                            f = -f
                        if i_leave < 0 or f > best_abs:
                            i_leave = i
                            best_abs = f
            coef = direction * W[i_leave, j]
            if coef > ptol:
                t_star = (xb[i_leave] - lo[basis[i_leave]]) / coef
            else:
                t_star = (up[basis[i_leave]] - xb[i_leave]) / (-coef)
            if t_star < 0.0:
                t_star = 0.0
            leave_to_upper = coef < 0.0

            iters += 1
            if t_star <= _DEGEN_TOL:
                degen_streak += 1
                if degen_streak >= bland_trigger:
                    bland = True
            else:
                degen_streak = 0
                bland = False

            f2 = direction * t_star
            for i in range(m):
                xb[i] -= f2 * W[i, j]
            enter_val = lo[j] + t_star if direction > 0 else up[j] - t_star

            old = basis[i_leave]
            vstat[old] = 1 if leave_to_upper else 0
            if up[old] - lo[old] <= 0.0:
                vstat[old] = 3
            basis[i_leave] = j
            vstat[j] = 2
            xb[i_leave] = enter_val

            # --- eliminate the entering column ---
            piv = W[i_leave, j]
            for k in range(n):
                W[i_leave, k] /= piv
            for i in range(m):
                if i == i_leave:
                    continue
                f = W[i, j]
                if f != 0.0:
                    for k in range(n):
                        W[i, k] -= f * W[i_leave, k]
            for i in range(m):
                W[i, j] = 0.0
            W[i_leave, j] = 1.0
            rj = r[j]
            if rj != 0.0:
                for k in range(n):
                    r[k] -= rj * W[i_leave, k]
            r[j] = 0.0
    if status == -1:
        status = _LIM
    return status, int(iters)


cdef inline Py_ssize_t _scan(double[:, ::1] cum, Py_ssize_t row, double u) nogil:
    cdef Py_ssize_t k = 0
    while u >= cum[row, k]:
        k += 1
    return k


def q_learn_chunk(double[:, ::1] q, long long[:, ::1] visits,
                  double[:, ::1] cum_e, double[:, ::1] cum_d, double[:, ::1] cum_h,
                  long long[::1] harvest, long long[:, ::1] cost,
                  double[::1] data_bits, long long b_max,
                  long long e, long long d, long long h, long long b,
                  double gamma, double alpha, double epsilon,
                  double[::1] u_explore, double[::1] u_action,
                  double[::1] u_e, double[::1] u_d, double[::1] u_h):
    """See _fallback.q_learn_chunk."""
    cdef Py_ssize_t n_d = cost.shape[0]
    cdef Py_ssize_t n_h = cost.shape[1]
    cdef long long n_b = b_max + 1
    cdef Py_ssize_t n_slots = u_explore.shape[0]
    cdef Py_ssize_t k
    cdef long long s, s2, cost_dh, a, e2, d2, h2, b2
    cdef bint can, can2
    cdef double reward, vmax, al

    with nogil:
        for k in range(n_slots):
            cost_dh = cost[d, h]
            s = ((e * n_d + d) * n_h + h) * n_b + b
            can = b >= cost_dh
            if u_explore[k] < epsilon:
                a = (1 if u_action[k] >= 0.5 else 0) if can else 0
            else:
                a = 1 if (can and q[s, 1] > q[s, 0]) else 0
            reward = data_bits[d] if a else 0.0

            e2 = _scan(cum_e, e, u_e[k])
            d2 = _scan(cum_d, d, u_d[k])
            h2 = _scan(cum_h, h, u_h[k])
            b2 = b - (cost_dh if a else 0) + harvest[e]
            if b2 > b_max:
                b2 = b_max
            s2 = ((e2 * n_d + d2) * n_h + h2) * n_b + b2

            can2 = b2 >= cost[d2, h2]
            if can2:
                vmax = q[s2, 1] if q[s2, 1] > q[s2, 0] else q[s2, 0]
            else:
                vmax = q[s2, 0]
            al = alpha if alpha > 0.0 else 1.0 / (1.0 + visits[s, a])
            q[s, a] = (1.0 - al) * q[s, a] + al * (reward + gamma * vmax)
            visits[s, a] += 1
            e = e2
            d = d2
            h = h2
            b = b2
    return int(e), int(d), int(h), int(b)


def r_learn_chunk(double[:, ::1] q, long long[:, ::1] visits,
                  double[:, ::1] cum_e, double[:, ::1] cum_d, double[:, ::1] cum_h,
                  long long[::1] harvest, long long[:, ::1] cost,
                  double[::1] data_bits, long long b_max,
                  long long e, long long d, long long h, long long b,
                  double rho, double alpha, double beta, double epsilon,
                  double[::1] u_explore, double[::1] u_action,
                  double[::1] u_e, double[::1] u_d, double[::1] u_h):
    """See _fallback.r_learn_chunk."""
    cdef Py_ssize_t n_d = cost.shape[0]
    cdef Py_ssize_t n_h = cost.shape[1]
    cdef long long n_b = b_max + 1
    cdef Py_ssize_t n_slots = u_explore.shape[0]
    cdef Py_ssize_t k
    cdef long long s, s2, cost_dh, a, e2, d2, h2, b2
    cdef bint can, can2, greedy_step
    cdef double reward, vmax, vmax_here, al

    with nogil:
        for k in range(n_slots):
            cost_dh = cost[d, h]
            s = ((e * n_d + d) * n_h + h) * n_b + b
            can = b >= cost_dh
            if u_explore[k] < epsilon:
                a = (1 if u_action[k] >= 0.5 else 0) if can else 0
                greedy_step = False
            else:
                a = 1 if (can and q[s, 1] > q[s, 0]) else 0
                greedy_step = True
            reward = data_bits[d] if a else 0.0
            if can:
                vmax_here = q[s, 1] if q[s, 1] > q[s, 0] else q[s, 0]
            else:
                vmax_here = q[s, 0]

            e2 = _scan(cum_e, e, u_e[k])
            d2 = _scan(cum_d, d, u_d[k])
            h2 = _scan(cum_h, h, u_h[k])
            b2 = b - (cost_dh if a else 0) + harvest[e]
            if b2 > b_max:
                b2 = b_max
            s2 = ((e2 * n_d + d2) * n_h + h2) * n_b + b2

            can2 = b2 >= cost[d2, h2]
            if can2:
                vmax = q[s2, 1] if q[s2, 1] > q[s2, 0] else q[s2, 0]
            else:
                vmax = q[s2, 0]
            if greedy_step:
                rho = (1.0 - beta) * rho + beta * ((reward + vmax) - vmax_here)
            al = alpha if alpha > 0.0 else 1.0 / (1.0 + visits[s, a])
            q[s, a] = (1.0 - al) * q[s, a] + al * ((reward - rho) + vmax)
            visits[s, a] += 1
            e = e2
            d = d2
            h = h2
            b = b2
    return int(e), int(d), int(h), int(b), float(rho)
