"""Backend selection for the chart kernels.

The compiled extension is used when it imports; otherwise the pure-Python
reference is used.  Setting LEXMDL_PURE_PYTHON=1 forces the fallback.
"""
import logging
import os

_logger = logging.getLogger(__name__)

if os.environ.get("LEXMDL_PURE_PYTHON", "") not in ("", "0"):
    from ._pykernels import ExactMatcher, NoisyMatcher
    BACKEND = "python"
else:
    try:
        from ._ckernels import ExactMatcher, NoisyMatcher
        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._pykernels import ExactMatcher, NoisyMatcher
        BACKEND = "python"
        _logger.debug("compiled kernels unavailable, using pure Python")

__all__ = ["ExactMatcher", "NoisyMatcher", "BACKEND"]
