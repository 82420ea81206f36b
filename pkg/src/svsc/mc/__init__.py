"""Monte Carlo benchmark engine for the three-factor model."""

from .backend import active_backend  # noqa: F401
from .engine import (  # noqa: F401
    FirstTouchDistribution,
    McConfig,
    PathSet,
    RiskReversalEstimate,
    SmilePoint,
    SvscParams,
    first_touch_distribution,
    price_barrier,
    price_digital,
    price_instruments,
    price_one_touch,
    price_vanilla,
    risk_reversal,
    run_paths,
    simulate_step,
    smile,
)
