"""Kernel selection: compiled Cython when available, else pure Python.

Set ``GRIDCOSIM_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and the parity tests).
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("GRIDCOSIM_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

queue_admit = _impl.queue_admit
cfb_throughput = _impl.cfb_throughput
fdi_support_search = _impl.fdi_support_search

__all__ = ["BACKEND", "queue_admit", "cfb_throughput", "fdi_support_search"]
