"""SVSC pricing library.

Heston dynamics with a stochastic, spot-correlated spot/volatility
correlation; a Monte Carlo benchmark engine for the full three-factor
system; and a fast semi-static-replication approximation for barrier
options and one touches driven by three marked parameters.
"""

__version__ = "0.1.0"

from .instruments import (  # noqa: F401
    BarrierOption,
    BsMarket,
    EuropeanDigital,
    OneTouch,
    PricingResult,
    Vanilla,
)
