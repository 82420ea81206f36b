"""Semi-closed-form Heston pricing, fast three-parameter calibration, digitals,
and local-variance extraction from the calibrated surface.

The characteristic function uses the rotation-safe formulation (principal
branch taken with the minus root), which stays continuous for the mean
reversion / vol-of-vol ranges used here.  Probabilities are recovered by
adaptive quadrature on a truncated domain chosen from the integrand decay.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import least_squares

from . import black_scholes as bs
from .instruments import EuropeanDigital, Vanilla

_ALPHA_TINY = 1e-8  # below this vol-of-vol the model is deterministic-variance
_QUAD_TOL = 1e-10
_LOCAL_VAR_FLOOR = 1e-6


class CalibrationError(RuntimeError):
    """Raised when the quote fit does not reach tolerance; carries residuals."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class HestonParams:
    """Mean reversion, long-run variance, initial variance, vol of vol, and
    spot/vol correlation."""

    beta: float
    v_bar: float
    v0: float
    alpha: float
    rho: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not (self.v_bar > 0 and self.v0 > 0):
            raise ValueError("variances must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")


@dataclass(frozen=True)
class VolQuote:
    strike: float
    vol: float
    expiry: float

    def __post_init__(self):
        if not self.vol > 0:
            raise ValueError("vol must be positive")


def term_variance(p: HestonParams, expiry) -> float:
    """Time-averaged expected variance: exact total variance when alpha = 0."""
    bt = p.beta * expiry
    weight = -math.expm1(-bt) / bt if bt > 1e-12 else 1.0
    return p.v_bar + (p.v0 - p.v_bar) * weight


def _cf(u, p: HestonParams, ln_fwd, expiry):
    """Characteristic function of terminal log-spot at complex argument ``u``."""
    iu = 1j * u
    a2 = p.alpha * p.alpha
    beta_u = p.beta - p.rho * p.alpha * iu
    d = cmath.sqrt(beta_u * beta_u + a2 * (iu + u * u))
    g = (beta_u - d) / (beta_u + d)
    edt = cmath.exp(-d * expiry)
    big_c = (p.beta * p.v_bar / a2) * (
        (beta_u - d) * expiry - 2.0 * cmath.log((1.0 - g * edt) / (1.0 - g)))
    big_d = ((beta_u - d) / a2) * (1.0 - edt) / (1.0 - g * edt)
    return cmath.exp(iu * ln_fwd + big_c + big_d * p.v0)


def _decay_cutoff(p: HestonParams, ln_fwd, expiry, shifted):
    """Upper integration limit: march until the CF magnitude is negligible."""
    u = 50.0
    for _ in range(12):
        arg = u - 1j if shifted else u
        if abs(_cf(arg, p, ln_fwd, expiry)) < 1e-14 * u:
            return u
        u *= 2.0
    return u


def _prob_above(p: HestonParams, ln_fwd, expiry, strike, shifted):
    """P2-style probability that terminal spot exceeds the strike.

    ``shifted`` selects the delta-measure probability P1 (CF evaluated at
    ``u - i`` and normalised by the forward).
    """
    ln_k = math.log(strike)
    fwd = math.exp(ln_fwd)

    def integrand(u):
        if shifted:
            val = _cf(u - 1j, p, ln_fwd, expiry) / fwd
        else:
            val = _cf(u, p, ln_fwd, expiry)
        return (cmath.exp(-1j * u * ln_k) * val / (1j * u)).real

    cutoff = _decay_cutoff(p, ln_fwd, expiry, shifted)
    integral, err = quad(integrand, 1e-12, cutoff,
                         epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=400)
    if not math.isfinite(integral) or err > 1e-6:
        raise ArithmeticError(
            f"quadrature failed: integral={integral}, err={err}, cutoff={cutoff}")
    return min(max(0.5 + integral / math.pi, 0.0), 1.0)


def vanilla_price(p: HestonParams, spot, rate_dom, rate_asset, opt: Vanilla) -> float:
    """Heston present value of a European vanilla.

    Falls back to Black-Scholes with the time-averaged deterministic variance
    when the vol of vol is (numerically) zero.
    """
    expiry = opt.expiry
    df = math.exp(-rate_dom * expiry)
    forward = spot * math.exp((rate_dom - rate_asset) * expiry)
    if p.alpha < _ALPHA_TINY:
        vol = math.sqrt(term_variance(p, expiry))
        w = 1.0 if opt.kind == "call" else -1.0
        return bs._black(forward, opt.strike, vol, expiry, df, w)
    ln_fwd = math.log(forward)
    p1 = _prob_above(p, ln_fwd, expiry, opt.strike, shifted=True)
    p2 = _prob_above(p, ln_fwd, expiry, opt.strike, shifted=False)
    call = df * (forward * p1 - opt.strike * p2)
    if opt.kind == "call":
        return max(call, 0.0)
    return max(call - df * (forward - opt.strike), 0.0)


def implied_vol(p: HestonParams, spot, rate_dom, rate_asset, strike, expiry) -> float:
    """Black-Scholes implied volatility of the Heston price at this strike."""
    forward = spot * math.exp((rate_dom - rate_asset) * expiry)
    kind = "call" if strike >= forward else "put"  # invert from the OTM side
    opt = Vanilla(strike, expiry, kind)
    price = vanilla_price(p, spot, rate_dom, rate_asset, opt)
    return bs.implied_vol(price, spot, rate_dom, rate_asset, opt)


def digital_price(p: HestonParams, spot, rate_dom, rate_asset,
                  dig: EuropeanDigital) -> float:
    """Cash digital under Heston: discounted terminal probability."""
    df = math.exp(-rate_dom * dig.expiry)
    forward = spot * math.exp((rate_dom - rate_asset) * dig.expiry)
    if p.alpha < _ALPHA_TINY:
        vol = math.sqrt(term_variance(p, dig.expiry))
        from .instruments import BsMarket
        return bs.digital_price(BsMarket(spot, rate_dom, rate_asset, vol), dig)
    p2 = _prob_above(p, math.log(forward), dig.expiry, dig.strike, shifted=False)
    return df * (p2 if dig.kind == "above" else 1.0 - p2)


_CAL_BOUNDS = ((1e-6, 1e-6, -0.99), (4.0, 5.0, 0.99))


def calibrate(quotes, beta, spot, rate_dom, rate_asset) -> HestonParams:
    """Fit (v_bar = v0, alpha, rho) to three implied-vol quotes at one expiry.

    ``beta`` is supplied externally.  Residuals are price differences scaled
    by Black-Scholes vega, i.e. approximately vol points.

    Raises
    ------
    CalibrationError
        If the repricing error of any quote exceeds 1e-4 in vol.
    """
    if len(quotes) != 3:
        raise ValueError("calibration expects exactly three quotes")
    expiry = quotes[0].expiry
    if any(abs(q.expiry - expiry) > 1e-12 for q in quotes):
        raise ValueError("quotes must share one expiry")
    if len({q.strike for q in quotes}) != 3:
        raise ValueError("quotes must have distinct strikes")

    quotes = sorted(quotes, key=lambda q: q.strike)
    forward = spot * math.exp((rate_dom - rate_asset) * expiry)
    df = math.exp(-rate_dom * expiry)
    opts = [Vanilla(q.strike, expiry, "call" if q.strike >= forward else "put")
            for q in quotes]
    targets = []
    vegas = []
    for q, opt in zip(quotes, opts):
        w = 1.0 if opt.kind == "call" else -1.0
        targets.append(bs._black(forward, q.strike, q.vol, expiry, df, w))
        vegas.append(max(bs.vega_forward(forward, q.strike, q.vol, expiry, df), 1e-12))

    def residuals(x):
        v_bar, alpha, rho = x
        params = HestonParams(beta, v_bar, v_bar, alpha, rho)
        return [(vanilla_price(params, spot, rate_dom, rate_asset, opt) - tgt) / vg
                for opt, tgt, vg in zip(opts, targets, vegas)]

    atm_vol = min(quotes, key=lambda q: abs(q.strike - forward)).vol
    rr_sign = quotes[2].vol - quotes[0].vol  # high strike minus low strike
    x0 = np.array([atm_vol * atm_vol, 0.3, 0.2 if rr_sign > 0 else -0.2])
    x0 = np.clip(x0, _CAL_BOUNDS[0], _CAL_BOUNDS[1])
    fit = least_squares(residuals, x0, bounds=_CAL_BOUNDS,
                        xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=400)
    final = residuals(fit.x)
    if max(abs(r) for r in final) > 1e-4:
        raise CalibrationError(
            f"calibration residuals {final} exceed 1e-4 vol", residuals=final)
    v_bar, alpha, rho = fit.x
    return HestonParams(beta, float(v_bar), float(v_bar), float(alpha), float(rho))


def local_variance(p: HestonParams, spot, rate_dom, rate_asset, t, k_eval,
                   rel_strike_step=1e-3, time_step=None) -> float:
    """Local variance at (strike, time) extracted from Heston call prices.

    Central finite differences of undiscounted-consistent call prices in the
    standard local-volatility identity with rates:

        sigma_loc^2 = (C_t + (r - q) K C_K + q C) / (K^2 C_KK / 2)

    Negative numerators/denominators from finite-difference noise are clamped
    to a small positive floor with a warning.
    """
    if not 0 < t:
        raise ValueError("t must be positive")
    if k_eval <= 0:
        raise ValueError("k_eval must be positive")
    if p.alpha < _ALPHA_TINY:
        # deterministic variance: local variance is the instantaneous variance
        return p.v_bar + (p.v0 - p.v_bar) * math.exp(-p.beta * t)

    hk = rel_strike_step * k_eval
    ht = time_step if time_step is not None else min(1e-3, t / 10.0)

    def call(k, tt):
        return vanilla_price(p, spot, rate_dom, rate_asset, Vanilla(k, tt, "call"))

    c0 = call(k_eval, t)
    c_up = call(k_eval + hk, t)
    c_dn = call(k_eval - hk, t)
    c_tp = call(k_eval, t + ht)
    c_tm = call(k_eval, t - ht) if t - ht > 1e-9 else None

    dc_dt = (c_tp - c_tm) / (2 * ht) if c_tm is not None else (c_tp - c0) / ht
    dc_dk = (c_up - c_dn) / (2 * hk)
    d2c_dk2 = (c_up - 2 * c0 + c_dn) / (hk * hk)

    mu = rate_dom - rate_asset
    numer = dc_dt + mu * k_eval * dc_dk + rate_asset * c0
    denom = 0.5 * k_eval * k_eval * d2c_dk2
    if denom <= 0 or numer <= 0:
        warnings.warn(
            f"local variance clamped at (k={k_eval}, t={t}): "
            f"numer={numer:.3e}, denom={denom:.3e}", RuntimeWarning)
        return _LOCAL_VAR_FLOOR
    return max(numer / denom, _LOCAL_VAR_FLOOR)
