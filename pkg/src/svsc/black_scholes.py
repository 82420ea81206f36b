"""Closed-form Black-Scholes analytics.

Vanilla prices and greeks, implied volatility, cash digitals, continuously
monitored single-barrier options (image solution, zero rebate), pay-at-expiry
one touches, delta-to-strike inversion, and the expected future vanna of a
vanilla position under lognormal spot.

Conventions
-----------
- ``d1 = (ln(F/K) + vol^2 T / 2) / (vol sqrt(T))``, ``d2 = d1 - vol sqrt(T)``
  with ``F`` the forward to expiry.
- Deltas are spot deltas without premium adjustment unless stated otherwise.
- Vanna is the derivative of vega with respect to the *forward*.
- Below ``vol * sqrt(T) = 1e-8`` prices fall back to discounted intrinsic.
"""
from __future__ import annotations

import math

from scipy.optimize import brentq
from scipy.stats import norm

from .instruments import BarrierOption, BsMarket, EuropeanDigital, OneTouch, Vanilla

_TINY_STDDEV = 1e-8
# |ln(B/S)| beyond this many terminal stddevs is treated as unreachable
_UNREACHABLE_STDDEVS = 40.0

_Phi = norm.cdf
_phi = norm.pdf


def _require_finite(*values):
    if not all(math.isfinite(v) for v in values):
        raise ValueError("non-finite input")


def _black(forward, strike, vol, expiry, df, w):
    """Discounted Black formula; ``w`` is +1 for a call, -1 for a put."""
    stddev = vol * math.sqrt(expiry)
    if stddev < _TINY_STDDEV:
        return df * max(w * (forward - strike), 0.0)
    d1 = (math.log(forward / strike) + 0.5 * stddev * stddev) / stddev
    d2 = d1 - stddev
    return df * w * (forward * _Phi(w * d1) - strike * _Phi(w * d2))


def vanilla_price(mkt: BsMarket, opt: Vanilla) -> float:
    """Black-Scholes present value of a European call or put.

    Parameters
    ----------
    mkt : BsMarket
        Spot, rates, and constant volatility.
    opt : Vanilla
        Strike, expiry, and call/put flag.

    Returns
    -------
    float
        Present value; always at least the discounted intrinsic value.
    """
    _require_finite(mkt.spot, mkt.vol, opt.strike, opt.expiry)
    w = 1.0 if opt.kind == "call" else -1.0
    return _black(mkt.forward(opt.expiry), opt.strike, mkt.vol, opt.expiry,
                  mkt.discount(opt.expiry), w)


def delta(mkt: BsMarket, opt: Vanilla) -> float:
    """Spot delta (no premium adjustment)."""
    stddev = mkt.vol * math.sqrt(opt.expiry)
    dfa = math.exp(-mkt.rate_asset * opt.expiry)
    if stddev < _TINY_STDDEV:
        itm = mkt.forward(opt.expiry) > opt.strike
        if opt.kind == "call":
            return dfa if itm else 0.0
        return 0.0 if itm else -dfa
    d1 = (math.log(mkt.forward(opt.expiry) / opt.strike) + 0.5 * stddev ** 2) / stddev
    if opt.kind == "call":
        return dfa * _Phi(d1)
    return -dfa * _Phi(-d1)


def vega(mkt: BsMarket, opt: Vanilla) -> float:
    """Derivative of the present value with respect to volatility."""
    return vega_forward(mkt.forward(opt.expiry), opt.strike, mkt.vol, opt.expiry,
                        mkt.discount(opt.expiry))


def vega_forward(forward, strike, vol, expiry, df=1.0):
    """Vega written on forward/discount inputs; same for calls and puts."""
    sqrt_t = math.sqrt(expiry)
    stddev = vol * sqrt_t
    if stddev < _TINY_STDDEV:
        return 0.0
    d1 = (math.log(forward / strike) + 0.5 * stddev * stddev) / stddev
    return df * forward * _phi(d1) * sqrt_t


def vanna(mkt: BsMarket, opt: Vanilla) -> float:
    """Derivative of vega with respect to the forward: ``-df d2 phi(d1)/vol``."""
    return vanna_forward(mkt.forward(opt.expiry), opt.strike, mkt.vol, opt.expiry,
                         mkt.discount(opt.expiry))


def vanna_forward(forward, strike, vol, expiry, df=1.0):
    stddev = vol * math.sqrt(expiry)
    if stddev < _TINY_STDDEV:
        return 0.0
    d1 = (math.log(forward / strike) + 0.5 * stddev * stddev) / stddev
    d2 = d1 - stddev
    return -df * d2 * _phi(d1) / vol


def implied_vol(price, spot, rate_dom, rate_asset, opt: Vanilla) -> float:
    """Invert the Black-Scholes formula for volatility.

    Raises
    ------
    ValueError
        If ``price`` lies outside the no-arbitrage bounds for the option.
    """
    _require_finite(price, spot, rate_dom, rate_asset)
    w = 1.0 if opt.kind == "call" else -1.0
    df = math.exp(-rate_dom * opt.expiry)
    forward = spot * math.exp((rate_dom - rate_asset) * opt.expiry)
    lower = df * max(w * (forward - opt.strike), 0.0)
    upper = df * (forward if opt.kind == "call" else opt.strike)
    if not lower < price < upper:
        raise ValueError(
            f"price {price} outside no-arbitrage bounds ({lower}, {upper})")

    def objective(vol):
        return _black(forward, opt.strike, vol, opt.expiry, df, w) - price

    return brentq(objective, 1e-10, 10.0, xtol=1e-14, rtol=8.9e-16, maxiter=200)


def digital_price(mkt: BsMarket, dig: EuropeanDigital) -> float:
    """Cash-or-nothing digital paying 1 at expiry if the terminal test holds."""
    df = mkt.discount(dig.expiry)
    stddev = mkt.vol * math.sqrt(dig.expiry)
    forward = mkt.forward(dig.expiry)
    if stddev < _TINY_STDDEV:
        above = forward > dig.strike
        hit = above if dig.kind == "above" else not above
        return df if hit else 0.0
    d2 = (math.log(forward / dig.strike) - 0.5 * stddev * stddev) / stddev
    return df * _Phi(d2 if dig.kind == "above" else -d2)


def touch_probability(spot, drift, vol, barrier, direction, expiry) -> float:
    """Probability that lognormal spot touches the barrier before expiry.

    Continuous monitoring; ``drift`` is the risk-neutral drift of spot.
    """
    _require_finite(spot, drift, vol, barrier, expiry)
    if expiry <= 0:
        return 0.0
    b = math.log(barrier / spot)
    if (direction == "down" and b >= 0) or (direction == "up" and b <= 0):
        return 1.0
    stddev = vol * math.sqrt(expiry)
    if stddev < _TINY_STDDEV or abs(b) > _UNREACHABLE_STDDEVS * max(stddev, _TINY_STDDEV):
        # barrier unreachable by diffusion; only deterministic drift could touch
        nu_t = (drift - 0.5 * vol * vol) * expiry
        if direction == "down":
            return 1.0 if nu_t <= b else 0.0
        return 1.0 if nu_t >= b else 0.0
    nu = drift - 0.5 * vol * vol
    if direction == "up":
        b, nu = -b, -nu
    # reflection formula for the running minimum of arithmetic brownian motion
    p = _Phi((b - nu * expiry) / stddev)
    p += math.exp(2.0 * nu * b / (vol * vol)) * _Phi((b + nu * expiry) / stddev)
    return min(max(p, 0.0), 1.0)


def one_touch_price(mkt: BsMarket, ot: OneTouch) -> float:
    """Pay-at-expiry one touch: discounted probability of touching the barrier."""
    df = mkt.discount(ot.expiry)
    return df * touch_probability(mkt.spot, mkt.drift, mkt.vol, ot.barrier,
                                  ot.direction, ot.expiry)


def _knockin_price(mkt: BsMarket, opt: BarrierOption) -> float:
    """Reiner-Rubinstein knockin formulas, zero rebate."""
    s, k, b = mkt.spot, opt.underlying.strike, opt.barrier
    t = opt.expiry
    vol = mkt.vol
    df = mkt.discount(t)
    dfa = math.exp(-mkt.rate_asset * t)
    sqrt_t = math.sqrt(t)
    stddev = vol * sqrt_t
    vanilla = vanilla_price(mkt, opt.underlying)

    log_ratio = math.log(b / s)
    if abs(log_ratio) > _UNREACHABLE_STDDEVS * stddev + abs(mkt.drift * t):
        return 0.0  # barrier unreachable: knockin worthless
    if stddev < _TINY_STDDEV:
        touched = touch_probability(s, mkt.drift, vol, b, opt.direction, t) > 0.5
        return vanilla if touched else 0.0

    mu_ = mkt.drift / (vol * vol) - 0.5
    w = 1.0 if opt.underlying.kind == "call" else -1.0  # phi
    e = 1.0 if opt.direction == "down" else -1.0  # eta
    pow_s = (b / s) ** (2.0 * mu_ + 2.0)
    pow_k = (b / s) ** (2.0 * mu_)

    x1 = math.log(s / k) / stddev + (1.0 + mu_) * stddev
    x2 = math.log(s / b) / stddev + (1.0 + mu_) * stddev
    y1 = math.log(b * b / (s * k)) / stddev + (1.0 + mu_) * stddev
    y2 = log_ratio / stddev + (1.0 + mu_) * stddev

    def leg(x):
        return w * (s * dfa * _Phi(w * x) - k * df * _Phi(w * (x - stddev)))

    def mirror(y):
        return w * (s * dfa * pow_s * _Phi(e * y)
                    - k * df * pow_k * _Phi(e * (y - stddev)))

    a_ = leg(x1)
    b_ = leg(x2)
    c_ = mirror(y1)
    d_ = mirror(y2)

    if opt.underlying.kind == "call":
        if opt.direction == "down":
            ki = c_ if k >= b else a_ - b_ + d_
        else:
            ki = a_ if k >= b else b_ - c_ + d_
    else:
        if opt.direction == "down":
            ki = b_ - c_ + d_ if k >= b else a_
        else:
            ki = a_ - b_ + d_ if k >= b else c_
    # guard tiny negative values from cancellation
    return min(max(ki, 0.0), vanilla)


def barrier_price(mkt: BsMarket, opt: BarrierOption) -> float:
    """Continuously monitored single-barrier option (image solution).

    Knockout plus the matching knockin reprices the vanilla exactly.  A spot
    already at or beyond the barrier values the knockout at zero and the
    knockin at the vanilla price.
    """
    _require_finite(mkt.spot, mkt.vol, opt.barrier)
    vanilla = vanilla_price(mkt, opt.underlying)
    if opt.breached(mkt.spot):
        return 0.0 if opt.style == "knockout" else vanilla
    ki = _knockin_price(mkt, opt)
    if opt.style == "knockin":
        return ki
    return vanilla - ki


def strike_for_delta(mkt: BsMarket, target_delta, expiry, kind,
                     forward_delta=False) -> float:
    """Strike whose Black-Scholes delta equals ``target_delta``.

    Spot delta (no premium adjustment) by default; set ``forward_delta`` for
    the forward-delta convention.  Put deltas are negative.
    """
    _require_finite(target_delta, expiry)
    if not 0.0 < abs(target_delta) < 1.0:
        raise ValueError("delta must lie strictly between 0 and 1 in magnitude")
    if kind == "call" and target_delta < 0 or kind == "put" and target_delta > 0:
        raise ValueError(f"delta sign inconsistent with {kind}")
    scale = 1.0 if forward_delta else math.exp(mkt.rate_asset * expiry)
    adj = abs(target_delta) * scale
    if adj >= 1.0:
        raise ValueError("delta magnitude unattainable under spot-delta convention")
    d1 = norm.ppf(adj) if kind == "call" else -norm.ppf(adj)
    stddev = mkt.vol * math.sqrt(expiry)
    return mkt.forward(expiry) * math.exp(-d1 * stddev + 0.5 * stddev * stddev)


def expected_future_vanna(d1_0, vol, expiry, t) -> float:
    """Expected vanna at time ``t`` of a vanilla struck at inception ``d1_0``.

    Exact lognormal average of the future vanna (forward convention, zero
    rates), written in terms of the option's initial ``d1``:

        phi(d1(0) - vol t / sqrt(T)) * (T - t)/(vol T)
            * (-d2(0) + vol t / sqrt(T))

    Equals the inception vanna at ``t = 0`` and decays to zero at ``t = T``.
    """
    _require_finite(d1_0, vol, expiry, t)
    if not 0.0 <= t <= expiry:
        raise ValueError("t must lie in [0, expiry]")
    if vol <= 0:
        raise ValueError("vol must be positive")
    sqrt_te = math.sqrt(expiry)
    d2_0 = d1_0 - vol * sqrt_te
    shift = vol * t / sqrt_te
    return _phi(d1_0 - shift) * (expiry - t) / (vol * expiry) * (-d2_0 + shift)


def expected_future_vanna_asymptotic(d1_0, vol, expiry, t) -> float:
    """Small ``vol sqrt(T)`` limit: inception vanna decaying linearly to zero."""
    _require_finite(d1_0, vol, expiry, t)
    if not 0.0 <= t <= expiry:
        raise ValueError("t must lie in [0, expiry]")
    d2_0 = d1_0 - vol * math.sqrt(expiry)
    return -d2_0 * _phi(d1_0) / vol * (expiry - t) / expiry
