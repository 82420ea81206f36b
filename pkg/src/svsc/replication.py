"""Fast barrier and one-touch pricing by semi-static vega replication.

The pipeline prices a knockout as a vanilla replication held until first
touch, minus the expected discounted cost of unwinding that replication at
the barrier.  Unwind values are Heston prices with an effective spot/vol
correlation that blends the correlation expected *conditional on reaching
the barrier* (Brownian-bridge argument) through the risk-reversal decay
factors.  Three marked parameters drive the whole correction: the variance
mean reversion ``beta``, the correlation mean reversion ``gamma``, and the
spot/skew covariance mark ``xi``.

Out-of-the-money knockouts use a two-vanilla replication (reflected strike);
one touches use twice a European digital; in-the-money knockouts are put
back to the out-of-the-money case through barrier put/call parity with a
barrier forward replicated by a strip of one touches.  Final prices are
re-anchored to the market vanilla via the model no-touch probability.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import black_scholes as bs
from . import heston
from .heston import HestonParams, VolQuote
from .instruments import (BarrierOption, BsMarket, EuropeanDigital, OneTouch,
                          PricingResult, Vanilla)

_RHO_CLAMP = 0.99
_MU_TINY = 1e-12


class ReplicationError(RuntimeError):
    """Raised when a replication cannot be constructed (no reflected strike)."""


@dataclass(frozen=True)
class SvscMarks:
    """The three marked parameters of the approximation."""

    beta: float
    gamma: float
    xi: float  # rho_cs * epsilon

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass(frozen=True)
class PortfolioLeg:
    instrument: object  # Vanilla | EuropeanDigital
    quantity: float


@dataclass(frozen=True)
class ReplicationPortfolio:
    legs: tuple
    barrier: float
    expiry: float
    kind: str  # "otm_barrier" | "one_touch"
    strike: float | None = None
    reflected_strike: float | None = None


@dataclass
class UnwindGrid:
    """Equal-time touch buckets with everything the unwind sum consumes."""

    t_start: np.ndarray
    t_mid: np.ndarray
    t_end: np.ndarray
    p_start: np.ndarray
    p_end: np.ndarray
    discount_mid: np.ndarray
    rho_unwind: np.ndarray
    local_var: np.ndarray
    replication_value: np.ndarray


@dataclass
class ApproxDiagnostics:
    replication_value0: float = math.nan
    unwind_value: float = math.nan
    heston_barrier_value: float = math.nan
    heston_vanilla_value: float = math.nan
    no_touch_probability: float = math.nan
    market_vanilla_value: float = math.nan
    price: float = math.nan
    reflected_strike: float | None = None
    short_quantity: float | None = None
    rho_clamps: int = 0
    value_clamped: bool = False
    no_touch_clamped: bool = False
    grid: UnwindGrid | None = None
    notes: list = field(default_factory=list)


@dataclass
class ApproxMarket:
    """Market snapshot the approximation consumes: spot, rates, three vol
    quotes at the pricing expiry, and an optional market vanilla pricer.

    ``vanilla_price`` overrides the final re-anchoring price (for example a
    benchmark model's vanilla value); by default vanillas are priced off a
    parabolic smile in log-moneyness through the three quotes.
    """

    spot: float
    rate_dom: float
    rate_asset: float
    quotes: tuple
    vanilla_price: object = None  # callable (Vanilla) -> price

    def __post_init__(self):
        if len(self.quotes) != 3:
            raise ValueError("market requires exactly three vol quotes")
        expiries = {q.expiry for q in self.quotes}
        if len(expiries) != 1:
            raise ValueError("quotes must share one expiry")
        self.quotes = tuple(sorted(self.quotes, key=lambda q: q.strike))

    @property
    def drift(self) -> float:
        return self.rate_dom - self.rate_asset

    @property
    def quote_expiry(self) -> float:
        return self.quotes[0].expiry

    def forward(self, t) -> float:
        return self.spot * math.exp(self.drift * t)

    def discount(self, t) -> float:
        return math.exp(-self.rate_dom * t)

    def smile_vol(self, strike) -> float:
        """Parabola in log-moneyness through the three quotes."""
        f = self.forward(self.quote_expiry)
        ks = np.log([q.strike / f for q in self.quotes])
        vols = [q.vol for q in self.quotes]
        coeffs = np.polyfit(ks, vols, 2)
        return float(np.polyval(coeffs, math.log(strike / f)))

    @property
    def atm_vol(self) -> float:
        return self.smile_vol(self.forward(self.quote_expiry))

    def market_vanilla(self, opt: Vanilla) -> float:
        if self.vanilla_price is not None:
            return float(self.vanilla_price(opt))
        mkt = BsMarket(self.spot, self.rate_dom, self.rate_asset,
                       self.smile_vol(opt.strike))
        return bs.vanilla_price(mkt, opt)


def _growth_ratio(z):
    """expm1(z)/z, series-stabilised near zero."""
    if abs(z) < 1e-6:
        return 1.0 + 0.5 * z + z * z / 6.0
    return math.expm1(z) / z


def _decay_ratio(z):
    """(1 - exp(-z))/z for z >= 0, continuous at zero."""
    return _growth_ratio(-z)


def decay_factors(beta, gamma, tau):
    """Mean-reversion weights (D1, D2) of the risk-reversal premium.

    D1 weights the long-run correlation, D2 the decaying initial deviation:

        D1 = 1 - (1 - e^(-beta tau)) / (beta tau)
        D2 = (1 - e^(-gamma tau))/(gamma tau)
             + (e^(-beta tau) - e^(-gamma tau))/((beta - gamma) tau)

    The gamma = beta removable singularity is handled by a series branch;
    both factors vanish like ``beta tau / 2`` as tau -> 0 so their ratio
    tends to one.
    """
    if beta <= 0 or gamma < 0 or tau <= 0:
        raise ValueError("need beta > 0, gamma >= 0, tau > 0")
    d1 = 1.0 - _decay_ratio(beta * tau)
    d2 = _decay_ratio(gamma * tau) \
        - math.exp(-gamma * tau) * _growth_ratio((gamma - beta) * tau)
    return d1, d2


def effective_correlation(rho_bar, rho0, beta, gamma, expiry) -> float:
    """Constant correlation reproducing the risk-reversal premium of the
    exponentially decaying correlation term structure."""
    d1, d2 = decay_factors(beta, gamma, expiry)
    ratio = d2 / d1 if d1 > 1e-14 else 1.0
    rho_a = rho_bar + (rho0 - rho_bar) * ratio
    return min(max(rho_a, -_RHO_CLAMP), _RHO_CLAMP)


def reflected_strike(spot, rate_dom, rate_asset, vol, strike, barrier, expiry,
                     kind) -> float:
    """Strike of the short replication leg.

    Solves for K' such that the short leg (opposite call/put type, quantity
    sqrt(K/K')) matches the Black-Scholes knockout discount at inception:

        v_short(K') sqrt(K/K') = v_vanilla(K) - v_knockout(B, K)

    Reduces to B^2/K at zero drift.  Raises ReplicationError when no root
    exists in a wide bracket around B^2/K.
    """
    mkt = BsMarket(spot, rate_dom, rate_asset, vol)
    direction = "down" if barrier < spot else "up"
    opt = Vanilla(strike, expiry, kind)
    ko = BarrierOption(opt, barrier, "knockout", direction)
    target = bs.vanilla_price(mkt, opt) - bs.barrier_price(mkt, ko)
    short_kind = "put" if kind == "call" else "call"

    def objective(log_k):
        k_refl = math.exp(log_k)
        short = Vanilla(k_refl, expiry, short_kind)
        return (bs.vanilla_price(mkt, short) * math.sqrt(strike / k_refl)
                - target)

    center = math.log(barrier * barrier / strike)
    width = 0.5
    for _ in range(6):
        lo, hi = center - width, center + width
        if objective(lo) * objective(hi) < 0:
            return math.exp(brentq(objective, lo, hi, xtol=1e-14, maxiter=200))
        width *= 2.0
    raise ReplicationError(
        f"no reflected strike bracketing B^2/K={barrier * barrier / strike:.6g} "
        f"(strike={strike}, barrier={barrier}, drift={rate_dom - rate_asset})")


def conditional_expected_correlation(t, barrier, forward_t, rho_h, gamma, xi,
                                     sigma2) -> float:
    """Expected instantaneous correlation conditional on spot at the barrier
    at time ``t`` (Brownian-bridge conditioning, two refinement passes)."""
    if t <= 0:
        return rho_h
    decay = _decay_ratio(gamma * t)
    bracket = math.log(barrier / forward_t) + 0.5 * sigma2 * t

    def one_pass(rho_prime):
        rp = min(max(rho_prime, -1.0), 1.0)
        return rho_h + xi * math.sqrt(1.0 - rp * rp) * decay * bracket

    rho_1 = min(max(one_pass(rho_h), -1.0), 1.0)
    rho_2 = one_pass(0.5 * (rho_h + rho_1))
    return min(max(rho_2, -1.0), 1.0)


def unwind_correlation(t, barrier, expiry, rho_h, beta, gamma, xi, forward_t,
                       sigma2) -> float:
    """Effective Heston correlation for an unwind at time ``t``: the
    conditional correlation blended through the remaining-life decay factors."""
    if not 0 < t < expiry:
        raise ValueError("t must lie strictly inside (0, expiry)")
    cond = conditional_expected_correlation(t, barrier, forward_t, rho_h,
                                            gamma, xi, sigma2)
    d1, d2 = decay_factors(beta, gamma, expiry - t)
    ratio = d2 / d1 if d1 > 1e-14 else 1.0
    return rho_h + (cond - rho_h) * ratio


class ApproxContext:
    """Calibration snapshot plus caches shared across one market's pricings."""

    def __init__(self, market: ApproxMarket, marks: SvscMarks,
                 heston_params: HestonParams | None = None):
        self.market = market
        self.marks = marks
        self.heston = heston_params if heston_params is not None else \
            heston.calibrate(list(market.quotes), marks.beta, market.spot,
                             market.rate_dom, market.rate_asset)
        self.atm_vol = market.atm_vol
        self._local_var = {}
        self._touch_prob = {}

    # -- locals -----------------------------------------------------------

    def local_variance(self, barrier, t) -> float:
        """Dupire instantaneous variance at (barrier, t), interpolated from a
        per-barrier time grid.

        Short times where the barrier strike is unreachable (several terminal
        stddevs away) make the finite differences 0/0; there the variance is
        frozen at the earliest stable time.  Touch probabilities at those
        times are negligible, so the frozen value never carries weight.
        """
        expiry = self.market.quote_expiry
        key = round(barrier, 12)
        interp = self._local_var.get(key)
        if interp is None:
            log_m = math.log(barrier / self.market.spot)
            t_stable = (log_m * log_m) / (20.0 * self.heston.v_bar)
            t_lo = min(max(expiry / 200.0, t_stable), 0.5 * expiry)
            grid = np.geomspace(t_lo, expiry, 25)
            vals = np.array([heston.local_variance(
                self.heston, self.market.spot, self.market.rate_dom,
                self.market.rate_asset, float(u), barrier) for u in grid])
            from scipy.interpolate import CubicSpline
            spline = CubicSpline(grid, vals)
            interp = (t_lo, expiry, spline)
            self._local_var[key] = interp
        t_lo, t_hi, spline = interp
        t_eval = min(max(t, t_lo), t_hi)
        return float(max(spline(t_eval), 1e-6))

    def touch_probability(self, barrier, direction, t) -> float:
        """First-touch probability by ``t``: Black-Scholes one touch plus a
        digital-replication skew adjustment, all as undiscounted probabilities:

            P = P_bs + 2 (E - E_bs)(1 - P_bs)
        """
        if t <= 0:
            return 0.0
        key = (round(barrier, 12), direction, round(t, 12))
        cached = self._touch_prob.get(key)
        if cached is not None:
            return cached
        m = self.market
        p_bs = bs.touch_probability(m.spot, m.drift, self.atm_vol, barrier,
                                    direction, t)
        dig_kind = "below" if direction == "down" else "above"
        dig = EuropeanDigital(barrier, t, dig_kind)
        df = m.discount(t)
        e_model = heston.digital_price(self.heston, m.spot, m.rate_dom,
                                       m.rate_asset, dig) / df
        e_bs = bs.digital_price(
            BsMarket(m.spot, m.rate_dom, m.rate_asset, self.atm_vol), dig) / df
        p = p_bs + 2.0 * (e_model - e_bs) * (1.0 - p_bs)
        p = min(max(p, 0.0), 1.0)
        self._touch_prob[key] = p
        return p

    def unwind_correlation(self, t, barrier, expiry) -> float:
        return unwind_correlation(
            t, barrier, expiry, self.heston.rho, self.marks.beta,
            self.marks.gamma, self.marks.xi,
            self.market.forward(t), self.heston.v_bar)

    def unwind_params(self, t, barrier, expiry, diag=None) -> HestonParams:
        """Heston parameters for valuing the replication at an unwind time."""
        rho = self.unwind_correlation(t, barrier, expiry)
        if abs(rho) > _RHO_CLAMP:
            rho = math.copysign(_RHO_CLAMP, rho)
            if diag is not None:
                diag.rho_clamps += 1
        h = self.heston
        return HestonParams(h.beta, h.v_bar, self.local_variance(barrier, t),
                            h.alpha, rho)


def build_otm_replication(market: ApproxMarket, opt: BarrierOption
                          ) -> ReplicationPortfolio:
    """Two-vanilla replication of an out-of-the-money knockout: long the
    underlying vanilla, short sqrt(K/K') of the reflected-strike opposite."""
    und = opt.underlying
    k_refl = reflected_strike(market.spot, market.rate_dom, market.rate_asset,
                              market.atm_vol, und.strike, opt.barrier,
                              und.expiry, und.kind)
    short_kind = "put" if und.kind == "call" else "call"
    qty = math.sqrt(und.strike / k_refl)
    legs = (PortfolioLeg(und, 1.0),
            PortfolioLeg(Vanilla(k_refl, und.expiry, short_kind), -qty))
    return ReplicationPortfolio(legs, opt.barrier, und.expiry, "otm_barrier",
                                strike=und.strike, reflected_strike=k_refl)


def build_one_touch_replication(ot: OneTouch) -> ReplicationPortfolio:
    """Twice the notional of a European digital struck at the barrier."""
    kind = "below" if ot.direction == "down" else "above"
    leg = PortfolioLeg(EuropeanDigital(ot.barrier, ot.expiry, kind), 2.0)
    return ReplicationPortfolio((leg,), ot.barrier, ot.expiry, "one_touch",
                                strike=ot.barrier)


def _portfolio_value(portfolio, params, spot, rate_dom, rate_asset, remaining):
    """Heston value of the replication legs with ``remaining`` life."""
    total = 0.0
    for leg in portfolio.legs:
        instr = leg.instrument
        if isinstance(instr, Vanilla):
            re_struck = Vanilla(instr.strike, remaining, instr.kind)
            total += leg.quantity * heston.vanilla_price(
                params, spot, rate_dom, rate_asset, re_struck)
        else:
            re_struck = EuropeanDigital(instr.strike, remaining, instr.kind)
            total += leg.quantity * heston.digital_price(
                params, spot, rate_dom, rate_asset, re_struck)
    return total


def _build_grid(ctx: ApproxContext, portfolio: ReplicationPortfolio,
                direction, expiry, n_buckets, diag) -> UnwindGrid:
    edges = np.linspace(0.0, expiry, n_buckets + 1)
    t_start, t_end = edges[:-1], edges[1:]
    t_mid = 0.5 * (t_start + t_end)
    b = portfolio.barrier
    p_edges = np.array([ctx.touch_probability(b, direction, float(t))
                        for t in edges])
    discount_mid = np.exp(-ctx.market.rate_dom * t_mid)
    rho_u = np.empty(n_buckets)
    local_var = np.empty(n_buckets)
    repl = np.empty(n_buckets)
    t_floor = expiry / (4.0 * n_buckets)
    for i, t in enumerate(t_mid):
        t = float(t)
        if expiry - t < t_floor and i > 0:
            # guard near-expiry blend; with midpoint grids this never fires
            rho_u[i] = rho_u[i - 1]
            local_var[i] = ctx.local_variance(b, t)
        else:
            rho_u[i] = ctx.unwind_correlation(t, b, expiry)
            local_var[i] = ctx.local_variance(b, t)
        params = ctx.unwind_params(t, b, expiry, diag)
        params = HestonParams(params.beta, params.v_bar, local_var[i],
                              params.alpha,
                              min(max(rho_u[i], -_RHO_CLAMP), _RHO_CLAMP))
        repl[i] = _portfolio_value(portfolio, params, b, ctx.market.rate_dom,
                                   ctx.market.rate_asset, expiry - t)
    return UnwindGrid(t_start, t_mid, t_end, p_edges[:-1], p_edges[1:],
                      discount_mid, rho_u, local_var, repl)


def _resolve_context(market, marks, context, heston_params):
    if context is not None:
        return context
    return ApproxContext(market, marks, heston_params)


def _classify_knockout(opt: BarrierOption, spot) -> str:
    """'otm' when the underlying vanilla is out of the money at the barrier."""
    b, k = opt.barrier, opt.underlying.strike
    if opt.direction == "down" and not b < spot:
        raise ValueError("down barrier must lie below spot")
    if opt.direction == "up" and not b > spot:
        raise ValueError("up barrier must lie above spot")
    if opt.underlying.kind == "call":
        return "otm" if b < k else "itm"
    return "otm" if b > k else "itm"


def price_otm_barrier(market: ApproxMarket, marks: SvscMarks,
                      opt: BarrierOption, n_buckets=10, context=None,
                      heston_params=None, market_vanilla=None) -> PricingResult:
    """Out-of-the-money knockout: replication minus bucketed unwind cost,
    re-anchored to the market vanilla through the no-touch probability."""
    if opt.style != "knockout":
        raise ValueError("price_otm_barrier prices knockouts")
    ctx = _resolve_context(market, marks, context, heston_params)
    und = opt.underlying
    if abs(und.expiry - market.quote_expiry) > 1e-12:
        raise ValueError("instrument expiry must match the quote expiry")
    if _classify_knockout(opt, market.spot) != "otm":
        raise ValueError("barrier/strike geometry is in-the-money; "
                         "use price_itm_barrier")
    diag = ApproxDiagnostics()
    portfolio = build_otm_replication(market, opt)
    diag.reflected_strike = portfolio.reflected_strike
    diag.short_quantity = -portfolio.legs[1].quantity

    diag.replication_value0 = _portfolio_value(
        portfolio, ctx.heston, market.spot, market.rate_dom, market.rate_asset,
        und.expiry)
    grid = _build_grid(ctx, portfolio, opt.direction, und.expiry, n_buckets,
                       diag)
    diag.grid = grid
    diag.unwind_value = float(np.sum(
        grid.replication_value * grid.discount_mid * (grid.p_end - grid.p_start)))
    value = diag.replication_value0 - diag.unwind_value
    if value < 0.0:
        value = 0.0
        diag.value_clamped = True
        diag.notes.append("negative replication-minus-unwind clamped to 0")
    diag.heston_barrier_value = value

    diag.heston_vanilla_value = heston.vanilla_price(
        ctx.heston, market.spot, market.rate_dom, market.rate_asset, und)
    no_touch = value / diag.heston_vanilla_value
    if not 0.0 <= no_touch <= 1.0:
        no_touch = min(max(no_touch, 0.0), 1.0)
        diag.no_touch_clamped = True
    diag.no_touch_probability = no_touch
    diag.market_vanilla_value = (market_vanilla if market_vanilla is not None
                                 else market.market_vanilla(und))
    diag.price = diag.market_vanilla_value * no_touch
    return PricingResult(price=diag.price, diagnostics={"approx": diag})


def price_one_touch(market: ApproxMarket, marks: SvscMarks, ot: OneTouch,
                    n_buckets=10, context=None, heston_params=None
                    ) -> PricingResult:
    """One touch: twice-a-digital replication plus the expected cost of
    switching it into a unit bond at first touch.

    At touch the digitals are sold at their Heston unwind value and the unit
    zero-coupon bond to expiry is bought, so each bucket contributes
    ``(D(T) - D(t) * v_repl(t)) * dP``; when the digital pair is worth par
    forward at the barrier the unwind is free and the replication price
    stands.
    """
    ctx = _resolve_context(market, marks, context, heston_params)
    m = market
    diag = ApproxDiagnostics()
    portfolio = build_one_touch_replication(ot)
    diag.replication_value0 = _portfolio_value(
        portfolio, ctx.heston, m.spot, m.rate_dom, m.rate_asset, ot.expiry)
    grid = _build_grid(ctx, portfolio, ot.direction, ot.expiry, n_buckets, diag)
    diag.grid = grid
    df_expiry = m.discount(ot.expiry)
    dp = grid.p_end - grid.p_start
    diag.unwind_value = float(np.sum(
        (df_expiry - grid.discount_mid * grid.replication_value) * dp))
    value = diag.replication_value0 + diag.unwind_value
    if not 0.0 <= value <= df_expiry:
        value = min(max(value, 0.0), df_expiry)
        diag.value_clamped = True
    diag.price = value
    return PricingResult(price=value, diagnostics={"approx": diag})


def price_barrier_forward(market: ApproxMarket, marks: SvscMarks, strike,
                          barrier, direction, expiry, n_buckets=10,
                          context=None, heston_params=None) -> float:
    """Barrier forward (long spot, short strike, knocked out at the barrier)
    replicated by a strip of one touches:

        v_bf = S e^(-qT) - K e^(-rT) - (B - K) v_ot(B, T)
               + B (q - r) * integral of e^(-q (T-t)) v_ot(B, t) dt

    With zero drift only the single one touch to expiry survives.
    """
    ctx = _resolve_context(market, marks, context, heston_params)
    m = market
    v_ot_full = price_one_touch(m, marks, OneTouch(barrier, expiry, direction),
                                n_buckets, context=ctx).price
    value = (m.spot * math.exp(-m.rate_asset * expiry)
             - strike * math.exp(-m.rate_dom * expiry)
             - (barrier - strike) * v_ot_full)
    if abs(m.drift) > _MU_TINY:
        edges = np.linspace(0.0, expiry, n_buckets + 1)
        t_mid = 0.5 * (edges[:-1] + edges[1:])
        dt = expiry / n_buckets
        integral = 0.0
        for t in t_mid:
            v_ot_t = price_one_touch(
                m, marks, OneTouch(barrier, float(t), direction), n_buckets,
                context=ctx).price
            integral += math.exp(-m.rate_asset * (expiry - float(t))) * v_ot_t * dt
        value += barrier * (m.rate_asset - m.rate_dom) * integral
    return value


def price_itm_barrier(market: ApproxMarket, marks: SvscMarks,
                      opt: BarrierOption, n_buckets=10, context=None,
                      heston_params=None, market_vanilla_otm_leg=None
                      ) -> PricingResult:
    """In-the-money knockout via barrier put/call parity:

        call(K, B) - put(K, B) = barrier_forward(K, B)

    The opposite-type knockout with the same strike and barrier is
    out-of-the-money at the barrier and is priced by replication;
    ``market_vanilla_otm_leg`` re-anchors that leg.
    """
    if opt.style != "knockout":
        raise ValueError("price_itm_barrier prices knockouts")
    ctx = _resolve_context(market, marks, context, heston_params)
    und = opt.underlying
    if _classify_knockout(opt, market.spot) != "itm":
        raise ValueError("barrier/strike geometry is out-of-the-money; "
                         "use price_otm_barrier")
    twin_kind = "put" if und.kind == "call" else "call"
    twin = BarrierOption(Vanilla(und.strike, und.expiry, twin_kind),
                         opt.barrier, "knockout", opt.direction)
    otm = price_otm_barrier(market, marks, twin, n_buckets, context=ctx,
                            market_vanilla=market_vanilla_otm_leg)
    forward_leg = price_barrier_forward(market, marks, und.strike, opt.barrier,
                                        opt.direction, und.expiry, n_buckets,
                                        context=ctx)
    if und.kind == "call":
        price = otm.price + forward_leg
    else:
        price = otm.price - forward_leg
    diag = otm.diagnostics["approx"]
    diag.notes.append(f"parity leg: barrier forward {forward_leg:+.8f}")
    diag.price = price
    return PricingResult(price=price, diagnostics={"approx": diag,
                                                   "barrier_forward": forward_leg})


def price_barrier(market: ApproxMarket, marks: SvscMarks, opt: BarrierOption,
                  n_buckets=10, context=None, heston_params=None,
                  market_vanilla=None) -> PricingResult:
    """Price any single-barrier option: dispatches on knockout geometry and
    handles knockins by in-out parity against the market vanilla."""
    ctx = _resolve_context(market, marks, context, heston_params)
    if opt.style == "knockin":
        ko = BarrierOption(opt.underlying, opt.barrier, "knockout",
                           opt.direction)
        ko_res = price_barrier(market, marks, ko, n_buckets, context=ctx,
                               market_vanilla=market_vanilla)
        vanilla = (market_vanilla if market_vanilla is not None
                   else market.market_vanilla(opt.underlying))
        return PricingResult(price=vanilla - ko_res.price,
                             diagnostics=ko_res.diagnostics)
    if _classify_knockout(opt, market.spot) == "otm":
        return price_otm_barrier(market, marks, opt, n_buckets, context=ctx,
                                 market_vanilla=market_vanilla)
    return price_itm_barrier(market, marks, opt, n_buckets, context=ctx,
                             market_vanilla_otm_leg=market_vanilla)
