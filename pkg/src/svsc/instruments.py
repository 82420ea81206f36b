"""Instrument and market value types shared across the pricing modules.

All payoffs are written on one unit of notional in the denominated currency.
A one touch pays its unit at expiry (not at touch), and barrier options are
continuously monitored with zero rebate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


def _require(cond, msg):
    if not cond:
        raise ValueError(msg)


def _finite(*values):
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class BsMarket:
    """Flat Black-Scholes market: spot, domestic/asset rates, constant vol.

    Rates are continuously compounded; the risk-neutral drift of spot is
    ``rate_dom - rate_asset``.
    """

    spot: float
    rate_dom: float
    rate_asset: float
    vol: float

    def __post_init__(self):
        _require(_finite(self.spot, self.rate_dom, self.rate_asset, self.vol),
                 "market inputs must be finite")
        _require(self.spot > 0, "spot must be positive")
        _require(self.vol > 0, "vol must be positive")

    @property
    def drift(self) -> float:
        return self.rate_dom - self.rate_asset

    def forward(self, expiry: float) -> float:
        return self.spot * math.exp(self.drift * expiry)

    def discount(self, expiry: float) -> float:
        return math.exp(-self.rate_dom * expiry)


@dataclass(frozen=True)
class Vanilla:
    """European call or put."""

    strike: float
    expiry: float
    kind: str  # "call" | "put"

    def __post_init__(self):
        _require(_finite(self.strike, self.expiry), "vanilla inputs must be finite")
        _require(self.strike > 0, "strike must be positive")
        _require(self.expiry > 0, "expiry must be positive")
        _require(self.kind in ("call", "put"), "kind must be 'call' or 'put'")


@dataclass(frozen=True)
class EuropeanDigital:
    """Cash-or-nothing digital paying 1 at expiry on the terminal condition."""

    strike: float
    expiry: float
    kind: str  # "above" | "below"

    def __post_init__(self):
        _require(_finite(self.strike, self.expiry), "digital inputs must be finite")
        _require(self.strike > 0, "strike must be positive")
        _require(self.expiry > 0, "expiry must be positive")
        _require(self.kind in ("above", "below"), "kind must be 'above' or 'below'")


@dataclass(frozen=True)
class OneTouch:
    """Pays one denominated unit at expiry if the barrier trades before expiry."""

    barrier: float
    expiry: float
    direction: str  # "up" | "down"

    def __post_init__(self):
        _require(_finite(self.barrier, self.expiry), "one-touch inputs must be finite")
        _require(self.barrier > 0, "barrier must be positive")
        _require(self.expiry > 0, "expiry must be positive")
        _require(self.direction in ("up", "down"), "direction must be 'up' or 'down'")


@dataclass(frozen=True)
class BarrierOption:
    """Knockout or knockin vanilla with a single continuously-monitored barrier."""

    underlying: Vanilla
    barrier: float
    style: str  # "knockout" | "knockin"
    direction: str  # "up" | "down"

    def __post_init__(self):
        _require(math.isfinite(self.barrier) and self.barrier > 0,
                 "barrier must be positive")
        _require(self.style in ("knockout", "knockin"),
                 "style must be 'knockout' or 'knockin'")
        _require(self.direction in ("up", "down"), "direction must be 'up' or 'down'")

    @property
    def expiry(self) -> float:
        return self.underlying.expiry

    def breached(self, spot: float) -> bool:
        """True when spot sits at or beyond the barrier at valuation time."""
        if self.direction == "down":
            return spot <= self.barrier
        return spot >= self.barrier


@dataclass(frozen=True)
class PricingResult:
    """Price plus Monte Carlo standard error (zero for analytic results)."""

    price: float
    stderr: float = 0.0
    n_paths: int = 0
    n_steps: int = 0
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        _require(self.stderr >= 0, "stderr must be non-negative")
