"""Path-kernel backend selection.

The compiled Cython kernel is preferred when present; the pure-numpy kernel
is the fallback.  Set ``SVSC_MC_BACKEND=python`` or ``=cython`` to force a
choice (forcing cython without the built extension raises at import).
"""
from __future__ import annotations

import os

from . import _pathref

_FORCED = os.environ.get("SVSC_MC_BACKEND", "").lower() or None

try:
    from . import _pathkernel
except ImportError:
    _pathkernel = None

if _FORCED == "cython" and _pathkernel is None:
    raise ImportError("SVSC_MC_BACKEND=cython but the compiled kernel is absent; "
                      "build with: pip install -e . --no-build-isolation")

_use_compiled = _pathkernel is not None and _FORCED != "python"


def active_backend() -> str:
    return "cython" if _use_compiled else "python"


if _use_compiled:
    def simulate_batch(normals, x0, v0, rho0, mu, beta, v_bar, alpha, gamma,
                       rho_bar, epsilon, rho_cs, dt, log_barriers, barrier_dirs,
                       bridge, touch_index):
        return _pathkernel.simulate_batch(
            normals, x0, v0, rho0, mu, beta, v_bar, alpha, gamma, rho_bar,
            epsilon, rho_cs, dt, log_barriers, barrier_dirs, bridge, touch_index)
else:
    simulate_batch = _pathref.simulate_batch
