"""Benchmark Monte Carlo engine for the three-factor model: log-spot, variance,
and a mean-reverting stochastic spot/vol correlation that is itself correlated
with spot.

Paths are generated in fixed-size batches, each driven by an independent
Philox stream spawned deterministically from the seed, so results are
reproducible and independent of the parallelism degree.  Antithetic variates
are paired within a batch and standard errors are computed pairwise.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import black_scholes as bs
from ..heston import HestonParams
from ..instruments import (BarrierOption, BsMarket, EuropeanDigital, OneTouch,
                           PricingResult, Vanilla)
from .backend import simulate_batch


@dataclass(frozen=True)
class SvscParams:
    """The nine model parameters plus rates.

    ``heston`` carries the mean reversion, long-run variance, initial
    variance, vol of vol, and initial correlation (its ``rho`` is read as
    the correlation's starting value).
    """

    heston: HestonParams
    gamma: float
    rho_bar: float
    epsilon: float
    rho_cs: float
    rate_dom: float = 0.0
    rate_asset: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not -1.0 <= self.rho_bar <= 1.0:
            raise ValueError("rho_bar must lie in [-1, 1]")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if not -1.0 < self.rho_cs < 1.0:
            raise ValueError("rho_cs must lie in (-1, 1)")

    @property
    def mu(self) -> float:
        return self.rate_dom - self.rate_asset

    @property
    def xi(self) -> float:
        """The spot/skew covariance mark: rho_cs * epsilon."""
        return self.rho_cs * self.epsilon

    def correlation_matrix(self, rho) -> np.ndarray:
        """Instantaneous 3x3 correlation of (spot, variance, correlation)."""
        return np.array([
            [1.0, rho, self.rho_cs],
            [rho, 1.0, rho * self.rho_cs],
            [self.rho_cs, rho * self.rho_cs, 1.0],
        ])


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    n_steps: int
    seed: int = 0
    antithetic: bool = True
    bridge_correction: bool = False

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be at least 1")


@dataclass
class PathSet:
    """Terminal and path-extreme state for a full simulation sweep.

    Leading axis is 1, or 2 when antithetic (row 0 = primary, row 1 =
    mirrored draws); statistics pair across that axis.
    """

    params: SvscParams
    cfg: McConfig
    expiry: float
    barriers: list  # [(level, direction)] matching log_surv columns
    x_t: np.ndarray  # (L, n)
    x_min: np.ndarray
    x_max: np.ndarray
    log_surv: np.ndarray  # (L, n, k)
    touch_step: np.ndarray | None
    touch_rho: np.ndarray | None
    clamp_fraction: float
    touch_barrier: tuple | None = None

    @property
    def discount(self) -> float:
        return math.exp(-self.params.rate_dom * self.expiry)

    @property
    def n_effective(self) -> int:
        return self.x_t.shape[0] * self.x_t.shape[1]

    def survival(self, barrier, direction) -> np.ndarray:
        j = self.barriers.index((barrier, direction))
        return np.exp(self.log_surv[:, :, j])


def _batch_pairs(n_steps) -> int:
    # keep each batch's normals under ~25 MB regardless of step count
    return max(128, 1_048_576 // max(n_steps, 1))


def run_paths(params: SvscParams, expiry, cfg: McConfig, barriers=(),
              track_touch=None, n_jobs=1) -> PathSet:
    """Simulate one full path sweep and collect per-path summaries.

    Parameters
    ----------
    barriers : sequence of (level, direction)
        Barrier levels to monitor; survival bookkeeping is shared by every
        instrument priced on this sweep.
    track_touch : (level, direction), optional
        Barrier for which first-touch time and correlation-at-touch are
        recorded (discrete monitoring).
    n_jobs : int
        Worker threads over path batches; results are independent of it.
    """
    barriers = list(dict.fromkeys(barriers))
    if track_touch is not None and track_touch not in barriers:
        barriers.append(track_touch)
    touch_index = barriers.index(track_touch) if track_touch is not None else -1

    h = params.heston
    n_units = (cfg.n_paths + 1) // 2 if cfg.antithetic else cfg.n_paths
    rows = 2 if cfg.antithetic else 1
    batch = _batch_pairs(cfg.n_steps)
    n_batches = (n_units + batch - 1) // batch
    dt = expiry / cfg.n_steps
    x0 = math.log(1.0)  # spot normalised to 1; engine prices are per unit spot
    log_b = np.array([math.log(b) for b, _ in barriers])
    dirs = np.array([1 if d == "up" else -1 for _, d in barriers], dtype=np.int8)
    children = np.random.SeedSequence(cfg.seed).spawn(n_batches)

    x_t = np.empty((rows, n_units))
    x_min = np.empty((rows, n_units))
    x_max = np.empty((rows, n_units))
    log_surv = np.empty((rows, n_units, len(barriers)))
    touch_step = np.empty((rows, n_units), dtype=np.int32) if touch_index >= 0 else None
    touch_rho = np.empty((rows, n_units)) if touch_index >= 0 else None
    clamp_total = 0

    def run_one(b_idx):
        lo = b_idx * batch
        hi = min(lo + batch, n_units)
        gen = np.random.Generator(np.random.Philox(children[b_idx]))
        normals = gen.standard_normal((hi - lo, cfg.n_steps, 3))
        out = []
        for row in range(rows):
            draws = normals if row == 0 else -normals
            out.append(simulate_batch(
                draws, x0, h.v0, h.rho, params.mu, h.beta, h.v_bar, h.alpha,
                params.gamma, params.rho_bar, params.epsilon, params.rho_cs,
                dt, log_b, dirs, cfg.bridge_correction, touch_index))
        return lo, hi, out

    def store(lo, hi, out):
        nonlocal clamp_total
        for row, res in enumerate(out):
            x_t[row, lo:hi] = res.x_t
            x_min[row, lo:hi] = res.x_min
            x_max[row, lo:hi] = res.x_max
            log_surv[row, lo:hi, :] = res.log_surv
            if touch_index >= 0:
                touch_step[row, lo:hi] = res.touch_step
                touch_rho[row, lo:hi] = res.touch_rho
            clamp_total += res.n_clamped

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            for lo, hi, out in pool.map(run_one, range(n_batches)):
                store(lo, hi, out)
    else:
        for b_idx in range(n_batches):
            store(*run_one(b_idx))

    return PathSet(
        params=params, cfg=cfg, expiry=expiry, barriers=barriers,
        x_t=x_t, x_min=x_min, x_max=x_max, log_surv=log_surv,
        touch_step=touch_step, touch_rho=touch_rho,
        clamp_fraction=clamp_total / (rows * n_units * cfg.n_steps),
        touch_barrier=track_touch)


def simulate_step(state, dt, draws, params: SvscParams):
    """Advance state arrays (log-spot, variance, correlation) one Euler step.

    ``draws`` holds three iid standard normals per path (shape (m, 3));
    the state-dependent correlation is applied internally.
    """
    from ._pathref import step_state
    x, v, rho = state
    h = params.heston
    x, v, rho, _ = step_state(
        np.asarray(x, dtype=float), np.asarray(v, dtype=float),
        np.asarray(rho, dtype=float), dt, np.asarray(draws, dtype=float),
        params.mu, h.beta, h.v_bar, h.alpha, params.gamma, params.rho_bar,
        params.epsilon, params.rho_cs)
    return x, v, rho


def _stats(values) -> tuple[float, float]:
    """Mean and standard error; antithetic rows are averaged pairwise first."""
    units = values.mean(axis=0)
    n = units.size
    mean = float(units.mean())
    if n < 2:
        return mean, 0.0
    return mean, float(units.std(ddof=1) / math.sqrt(n))


def _payoff_values(ps: PathSet, instrument, spot) -> np.ndarray:
    """Discounted per-path payoff of one instrument on the sweep."""
    df = ps.discount
    s_t = spot * np.exp(ps.x_t)
    if isinstance(instrument, Vanilla):
        w = 1.0 if instrument.kind == "call" else -1.0
        return df * np.maximum(w * (s_t - instrument.strike), 0.0)
    if isinstance(instrument, EuropeanDigital):
        above = s_t > instrument.strike
        return df * (above if instrument.kind == "above" else ~above)
    if isinstance(instrument, OneTouch):
        surv = ps.survival(instrument.barrier / spot, instrument.direction)
        return df * (1.0 - surv)
    if isinstance(instrument, BarrierOption):
        surv = ps.survival(instrument.barrier / spot, instrument.direction)
        w = 1.0 if instrument.underlying.kind == "call" else -1.0
        payoff = np.maximum(w * (s_t - instrument.underlying.strike), 0.0)
        keep = surv if instrument.style == "knockout" else 1.0 - surv
        return df * keep * payoff
    raise TypeError(f"unsupported instrument {type(instrument).__name__}")


def _barrier_specs(instrument, spot):
    if isinstance(instrument, OneTouch):
        return [(instrument.barrier / spot, instrument.direction)]
    if isinstance(instrument, BarrierOption):
        return [(instrument.barrier / spot, instrument.direction)]
    return []


def price_instruments(params: SvscParams, cfg: McConfig, instruments, spot=1.0,
                      n_jobs=1, path_set=None):
    """Price a list of same-expiry instruments on one shared path sweep.

    Common random numbers across the list make parity relations (knockout +
    knockin = vanilla) hold path by path.
    """
    expiries = {float(i.expiry) for i in instruments}
    if len(expiries) != 1:
        raise ValueError("instruments must share one expiry")
    expiry = expiries.pop()
    if path_set is None:
        barriers = [b for i in instruments for b in _barrier_specs(i, spot)]
        path_set = run_paths(params, expiry, cfg, barriers=barriers, n_jobs=n_jobs)
    results = []
    for instr in instruments:
        values = _payoff_values(path_set, instr, spot)
        mean, err = _stats(values)
        results.append(PricingResult(
            price=mean, stderr=err, n_paths=path_set.n_effective,
            n_steps=cfg.n_steps, seed=cfg.seed,
            diagnostics={"clamp_fraction": path_set.clamp_fraction}))
    return results


def price_vanilla(params, cfg, opt: Vanilla, spot=1.0, n_jobs=1) -> PricingResult:
    return price_instruments(params, cfg, [opt], spot, n_jobs)[0]


def price_digital(params, cfg, dig: EuropeanDigital, spot=1.0, n_jobs=1):
    return price_instruments(params, cfg, [dig], spot, n_jobs)[0]


def price_one_touch(params, cfg, ot: OneTouch, spot=1.0, n_jobs=1):
    return price_instruments(params, cfg, [ot], spot, n_jobs)[0]


def price_barrier(params, cfg, opt: BarrierOption, spot=1.0, n_jobs=1):
    return price_instruments(params, cfg, [opt], spot, n_jobs)[0]


@dataclass(frozen=True)
class SmilePoint:
    strike: float
    vol: float
    vol_stderr: float
    price: float
    price_stderr: float
    flagged: bool = False


def smile(params: SvscParams, cfg: McConfig, strikes, expiry, spot=1.0,
          n_jobs=1, path_set=None):
    """Implied-vol smile from Monte Carlo vanilla prices.

    Points whose Monte Carlo price falls outside the no-arbitrage band are
    returned flagged with NaN vols instead of raising.
    """
    if path_set is None:
        path_set = run_paths(params, expiry, cfg, n_jobs=n_jobs)
    out = []
    forward = spot * math.exp(params.mu * expiry)
    for k in strikes:
        kind = "call" if k >= forward else "put"
        opt = Vanilla(k, expiry, kind)
        values = _payoff_values(path_set, opt, spot)
        price, err = _stats(values)
        try:
            vol = bs.implied_vol(price, spot, params.rate_dom, params.rate_asset, opt)
        except ValueError:
            out.append(SmilePoint(k, math.nan, math.nan, price, err, True))
            continue
        vega = bs.vega(BsMarket(spot, params.rate_dom, params.rate_asset, vol), opt)
        out.append(SmilePoint(k, vol, err / max(vega, 1e-12), price, err))
    return out


@dataclass(frozen=True)
class RiskReversalEstimate:
    value: float
    stderr: float
    call_strike: float
    put_strike: float
    call_vol: float
    put_vol: float
    atm_vol: float


def risk_reversal(params: SvscParams, cfg: McConfig, expiry, delta=0.25,
                  spot=1.0, n_jobs=1) -> RiskReversalEstimate:
    """Model 25-delta risk reversal: smile vols at self-consistent delta strikes.

    Strikes are found by fixed-point iteration (strike -> implied vol ->
    delta strike); the standard error uses the delta method on the pairwise
    payoff differences so the common paths are accounted for.
    """
    path_set = run_paths(params, expiry, cfg, n_jobs=n_jobs)
    forward = spot * math.exp(params.mu * expiry)

    def vol_at(strike):
        kind = "call" if strike >= forward else "put"
        opt = Vanilla(strike, expiry, kind)
        price, err = _stats(_payoff_values(path_set, opt, spot))
        vol = bs.implied_vol(price, spot, params.rate_dom, params.rate_asset, opt)
        return vol, opt, err

    atm_vol, _, _ = vol_at(forward)
    k_call, k_put = forward, forward
    vol_c = vol_p = atm_vol
    for _ in range(8):
        mkt_c = BsMarket(spot, params.rate_dom, params.rate_asset, vol_c)
        mkt_p = BsMarket(spot, params.rate_dom, params.rate_asset, vol_p)
        k_call = bs.strike_for_delta(mkt_c, delta, expiry, "call")
        k_put = bs.strike_for_delta(mkt_p, -delta, expiry, "put")
        vol_c, opt_c, _ = vol_at(k_call)
        vol_p, opt_p, _ = vol_at(k_put)

    vega_c = bs.vega(BsMarket(spot, params.rate_dom, params.rate_asset, vol_c), opt_c)
    vega_p = bs.vega(BsMarket(spot, params.rate_dom, params.rate_asset, vol_p), opt_p)
    w = (_payoff_values(path_set, opt_c, spot) / vega_c
         - _payoff_values(path_set, opt_p, spot) / vega_p)
    _, rr_err = _stats(w)
    return RiskReversalEstimate(vol_c - vol_p, rr_err, k_call, k_put,
                                vol_c, vol_p, atm_vol)


@dataclass
class FirstTouchDistribution:
    bucket_edges: np.ndarray  # (n_buckets + 1,)
    probability: np.ndarray  # (n_buckets,)
    probability_stderr: np.ndarray
    rho_mean: np.ndarray  # conditional on first touch in the bucket
    rho_stderr: np.ndarray
    total_touch_probability: float


def first_touch_distribution(params: SvscParams, cfg: McConfig, barrier,
                             direction, expiry, n_buckets, spot=1.0,
                             n_jobs=1) -> FirstTouchDistribution:
    """Bucketed first-touch probabilities and conditional mean correlation.

    Discrete monitoring at step dates; serves as the simulation oracle for
    the approximation's touch-probability and conditional-correlation parts.
    """
    if n_buckets < 1:
        raise ValueError("n_buckets must be at least 1")
    ps = run_paths(params, expiry, cfg, track_touch=(barrier / spot, direction),
                   n_jobs=n_jobs)
    dt = expiry / cfg.n_steps
    steps = ps.touch_step.ravel()
    rhos = ps.touch_rho.ravel()
    n_total = steps.size
    edges = np.linspace(0.0, expiry, n_buckets + 1)
    touched = steps >= 0
    times = steps[touched] * dt
    rho_at = rhos[touched]
    idx = np.minimum((times / (expiry / n_buckets)).astype(int), n_buckets - 1)
    prob = np.zeros(n_buckets)
    prob_err = np.zeros(n_buckets)
    rho_mean = np.full(n_buckets, np.nan)
    rho_err = np.full(n_buckets, np.nan)
    for i in range(n_buckets):
        sel = idx == i
        n_i = int(np.count_nonzero(sel))
        p_i = n_i / n_total
        prob[i] = p_i
        prob_err[i] = math.sqrt(max(p_i * (1 - p_i), 0.0) / n_total)
        if n_i > 1:
            rho_mean[i] = float(rho_at[sel].mean())
            rho_err[i] = float(rho_at[sel].std(ddof=1) / math.sqrt(n_i))
    return FirstTouchDistribution(edges, prob, prob_err, rho_mean, rho_err,
                                  float(np.count_nonzero(touched) / n_total))
