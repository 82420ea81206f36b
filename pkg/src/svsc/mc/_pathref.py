"""Pure-numpy path kernel: the fallback backend for the Monte Carlo engine.

Mirrors the compiled kernel operation-for-operation so both backends produce
the same paths from the same normal draws (full-truncation Euler for the
variance, Euler with post-step clamping for the correlation, analytic
Cholesky of the three-factor correlation matrix).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RHO_CAP = 1.0 - 1e-9
# bridge crossing factors below exp(-40) are numerically zero
_BRIDGE_ARG_FLOOR = -40.0


@dataclass
class BatchResult:
    x_t: np.ndarray
    x_min: np.ndarray
    x_max: np.ndarray
    log_surv: np.ndarray  # (m, k); 0 = untouched, -inf = crossed at a step date
    touch_step: np.ndarray  # (m,) int32; -1 = never, 0 = breached at inception
    touch_rho: np.ndarray
    n_clamped: int


def correlate_draws(rho, rho_cs, z):
    """Map iid normals (m, 3) to correlated drivers (spot, variance, corr).

    Analytic Cholesky of [[1, rho, rho_cs], [rho, 1, rho*rho_cs],
    [rho_cs, rho*rho_cs, 1]]: the variance-vs-correlation entry factors so the
    third row is rho_cs * z1 + sqrt(1 - rho_cs^2) * z3 exactly.
    """
    dw_s = z[:, 0]
    dw_v = rho * z[:, 0] + np.sqrt(np.maximum(1.0 - rho * rho, 0.0)) * z[:, 1]
    dw_r = rho_cs * z[:, 0] + np.sqrt(max(1.0 - rho_cs * rho_cs, 0.0)) * z[:, 2]
    return dw_s, dw_v, dw_r


def step_state(x, v, rho, dt, z, mu, beta, v_bar, alpha, gamma, rho_bar,
               epsilon, rho_cs):
    """Advance (log-spot, variance, correlation) one Euler step.

    ``z`` holds three iid standard normals per path; correlation is applied
    internally because the Cholesky depends on the per-path state.  Returns
    the new state and the count of correlation clamps.
    """
    sq_dt = np.sqrt(dt)
    dw_s, dw_v, dw_r = correlate_draws(rho, rho_cs, z)
    v_plus = np.maximum(v, 0.0)
    sv = np.sqrt(v_plus)
    x_new = x + (mu - 0.5 * v_plus) * dt + sv * sq_dt * dw_s
    v_new = v + beta * (v_bar - v_plus) * dt + alpha * sv * sq_dt * dw_v
    rho_new = rho + gamma * (rho_bar - rho) * dt \
        + epsilon * np.sqrt(np.maximum(1.0 - rho * rho, 0.0)) * sv * sq_dt * dw_r
    clamped = np.abs(rho_new) > RHO_CAP
    n_clamped = int(np.count_nonzero(clamped))
    if n_clamped:
        rho_new = np.clip(rho_new, -RHO_CAP, RHO_CAP)
    return x_new, v_new, rho_new, n_clamped


def simulate_batch(normals, x0, v0, rho0, mu, beta, v_bar, alpha, gamma,
                   rho_bar, epsilon, rho_cs, dt, log_barriers, barrier_dirs,
                   bridge, touch_index):
    """Run one batch of paths from iid draws ``normals`` of shape (m, steps, 3).

    Barrier bookkeeping is done at step dates (and at inception); with
    ``bridge`` set, per-step Brownian-bridge crossing probabilities accumulate
    into ``log_surv`` to emulate continuous monitoring.
    """
    m, n_steps, _ = normals.shape
    k = len(log_barriers)
    x = np.full(m, x0)
    v = np.full(m, v0)
    rho = np.full(m, rho0)
    x_min = np.full(m, x0)
    x_max = np.full(m, x0)
    log_surv = np.zeros((m, k))
    touch_step = np.full(m, -1, dtype=np.int32)
    touch_rho = np.zeros(m)
    n_clamped = 0

    for j in range(k):
        b, d = log_barriers[j], barrier_dirs[j]
        if (d < 0 and x0 <= b) or (d > 0 and x0 >= b):
            log_surv[:, j] = -np.inf
            if j == touch_index:
                touch_step[:] = 0
                touch_rho[:] = rho0

    for s in range(n_steps):
        v_plus = np.maximum(v, 0.0)
        x_new, v_new, rho_new, nc = step_state(
            x, v, rho, dt, normals[:, s, :], mu, beta, v_bar, alpha, gamma,
            rho_bar, epsilon, rho_cs)
        n_clamped += nc
        for j in range(k):
            b = log_barriers[j]
            sign = -1.0 if barrier_dirs[j] < 0 else 1.0
            alive = log_surv[:, j] > -np.inf
            # distances measured towards the barrier: positive = not crossed
            dist0 = sign * (b - x)
            dist1 = sign * (b - x_new)
            crossed = alive & (dist1 <= 0.0)
            if np.any(crossed):
                log_surv[crossed, j] = -np.inf
                if j == touch_index:
                    new_touch = crossed & (touch_step == -1)
                    touch_step[new_touch] = s + 1
                    touch_rho[new_touch] = rho_new[new_touch]
            if bridge:
                open_ = alive & ~crossed & (v_plus * dt > 0.0)
                if np.any(open_):
                    arg = -2.0 * dist0[open_] * dist1[open_] / (v_plus[open_] * dt)
                    inc = np.where(arg > _BRIDGE_ARG_FLOOR,
                                   np.log1p(-np.exp(np.minimum(arg, 0.0))), 0.0)
                    log_surv[open_, j] += inc
        x, v, rho = x_new, v_new, rho_new
        np.minimum(x_min, x, out=x_min)
        np.maximum(x_max, x, out=x_max)

    return BatchResult(x, x_min, x_max, log_surv, touch_step, touch_rho,
                       n_clamped)
