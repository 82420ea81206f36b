# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled path kernel: the hot inner loop of the Monte Carlo engine.

Mirrors ``_pathref.simulate_batch`` operation-for-operation.  The state
recursion uses only IEEE-exact arithmetic and sqrt, so terminal states are
bit-identical to the numpy fallback; bridge survival accumulators may differ
at the last few ulps (different exp/log1p code paths).
"""
import numpy as np

from libc.math cimport INFINITY, exp, log1p, sqrt

from ._pathref import BatchResult

cdef double RHO_CAP = 1.0 - 1e-9
cdef double BRIDGE_ARG_FLOOR = -40.0


def simulate_batch(double[:, :, ::1] normals, double x0, double v0, double rho0,
                   double mu, double beta, double v_bar, double alpha,
                   double gamma, double rho_bar, double epsilon, double rho_cs,
                   double dt, double[::1] log_barriers,
                   signed char[::1] barrier_dirs, bint bridge, int touch_index):
    cdef Py_ssize_t m = normals.shape[0]
    cdef Py_ssize_t n_steps = normals.shape[1]
    cdef Py_ssize_t k = log_barriers.shape[0]

    x_t_arr = np.empty(m)
    x_min_arr = np.empty(m)
    x_max_arr = np.empty(m)
    log_surv_arr = np.zeros((m, max(k, 1)))[:, :k]
    touch_step_arr = np.full(m, -1, dtype=np.int32)
    touch_rho_arr = np.zeros(m)

    cdef double[::1] x_t = x_t_arr
    cdef double[::1] x_min = x_min_arr
    cdef double[::1] x_max = x_max_arr
    cdef double[:, :] log_surv = log_surv_arr
    cdef int[::1] touch_step = touch_step_arr
    cdef double[::1] touch_rho = touch_rho_arr

    cdef double sq_dt = sqrt(dt)
    cdef double cs_comp = sqrt(max(1.0 - rho_cs * rho_cs, 0.0))
    cdef long n_clamped = 0
    cdef Py_ssize_t i, s, j
    cdef double x, v, rho, xmin, xmax, vp, sv, one_m_rho2
    cdef double z1, z2, z3, dws, dwv, dwr, x_new, v_new, rho_new
    cdef double b, sign, dist0, dist1, arg
    cdef bint inception_breached

    with nogil:
        for i in range(m):
            x = x0
            v = v0
            rho = rho0
            xmin = x0
            xmax = x0
            for j in range(k):
                b = log_barriers[j]
                inception_breached = (barrier_dirs[j] < 0 and x0 <= b) or \
                                     (barrier_dirs[j] > 0 and x0 >= b)
                if inception_breached:
                    log_surv[i, j] = -INFINITY
                    if j == touch_index:
                        touch_step[i] = 0
                        touch_rho[i] = rho0
            for s in range(n_steps):
                z1 = normals[i, s, 0]
                z2 = normals[i, s, 1]
                z3 = normals[i, s, 2]
                vp = v if v > 0.0 else 0.0
                sv = sqrt(vp)
                one_m_rho2 = 1.0 - rho * rho
                if one_m_rho2 < 0.0:
                    one_m_rho2 = 0.0
                dws = z1
                dwv = rho * z1 + sqrt(one_m_rho2) * z2
                dwr = rho_cs * z1 + cs_comp * z3
                x_new = x + (mu - 0.5 * vp) * dt + sv * sq_dt * dws
                v_new = v + beta * (v_bar - vp) * dt + alpha * sv * sq_dt * dwv
                rho_new = rho + gamma * (rho_bar - rho) * dt \
                    + epsilon * sqrt(one_m_rho2) * sv * sq_dt * dwr
                if rho_new > RHO_CAP:
                    rho_new = RHO_CAP
                    n_clamped += 1
                elif rho_new < -RHO_CAP:
                    rho_new = -RHO_CAP
                    n_clamped += 1
                for j in range(k):
                    if log_surv[i, j] == -INFINITY:
                        continue
                    b = log_barriers[j]
                    sign = -1.0 if barrier_dirs[j] < 0 else 1.0
                    dist0 = sign * (b - x)
                    dist1 = sign * (b - x_new)
                    if dist1 <= 0.0:
                        log_surv[i, j] = -INFINITY
                        if j == touch_index and touch_step[i] == -1:
                            touch_step[i] = <int> (s + 1)
                            touch_rho[i] = rho_new
                    elif bridge and vp * dt > 0.0:
                        arg = -2.0 * dist0 * dist1 / (vp * dt)
                        if arg > BRIDGE_ARG_FLOOR:
                            if arg > 0.0:
                                arg = 0.0
                            log_surv[i, j] += log1p(-exp(arg))
                x = x_new
                v = v_new
                rho = rho_new
                if x < xmin:
                    xmin = x
                if x > xmax:
                    xmax = x
            x_t[i] = x
            x_min[i] = xmin
            x_max[i] = xmax

    return BatchResult(x_t_arr, x_min_arr, x_max_arr, log_surv_arr,
                       touch_step_arr, touch_rho_arr, n_clamped)
