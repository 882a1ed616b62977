"""Kernel backend selection.

The hot numeric kernels exist twice: a numba ``@njit`` version with fused
loops and a vectorized pure-numpy version. ``LEXEMBED_NUMBA`` picks the
binding at import time:

    unset / "auto"  per-kernel default: numba where loop fusion beats
                    BLAS (the scatter-bound error-filter kernel), numpy
                    for the GEMM-bound kernels (see benchmarks/)
    "1" / "true"    force numba for every kernel
    "0" / "false"   force the pure-numpy fallback for every kernel

When numba is not importable everything falls back to numpy.
"""

from __future__ import annotations

import logging
import os

log = logging.getLogger("lexembed.backend")

_FALSY = {"0", "false", "off", "no"}
_TRUTHY = {"1", "true", "on", "yes", "force"}


def resolve_mode(env: str | None = None) -> str:
    """Map the env value to one of auto | numba | numpy."""
    if env is None:
        env = os.environ.get("LEXEMBED_NUMBA", "")
    env = env.strip().lower()
    if env in _FALSY:
        return "numpy"
    if env in _TRUTHY:
        return "numba"
    return "auto"


try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    NUMBA_AVAILABLE = False

KERNEL_MODE = resolve_mode()

if KERNEL_MODE == "numba" and not NUMBA_AVAILABLE:  # pragma: no cover
    log.warning("LEXEMBED_NUMBA=1 but numba is not importable; using numpy")
    KERNEL_MODE = "numpy"
elif KERNEL_MODE == "auto" and not NUMBA_AVAILABLE:  # pragma: no cover
    KERNEL_MODE = "numpy"


def backend_name() -> str:
    return KERNEL_MODE
