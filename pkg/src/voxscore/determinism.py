"""Bitwise-reproducible numerics.

OpenBLAS GEMM results differ across thread counts, so everything whose
output must be byte-stable (forward passes, gradients, training) runs with
BLAS pools pinned to one thread. The guard is re-entrant: nested pins are
free, so hot loops pin once at the top.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

from threadpoolctl import threadpool_limits

_state = threading.local()


@contextmanager
def deterministic_blas():
    if getattr(_state, "pinned", False):
        yield
        return
    _state.pinned = True
    try:
        with threadpool_limits(limits=1):
            yield
    finally:
        _state.pinned = False
