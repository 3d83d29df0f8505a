"""Hot kernels: compiled extension when available, pure Python otherwise.

Set ``HRW_PURE_PYTHON=1`` to force the fallback.  Both backends consume the
random streams identically, so simulated paths agree draw for draw.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if not os.environ.get("HRW_PURE_PYTHON"):
    try:
        from . import _ext as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

stream_words = _impl.stream_words
walk_discrete = _impl.walk_discrete
walk_continuous_at = _impl.walk_continuous_at
walk_return_times = _impl.walk_return_times
walk_last_exit = _impl.walk_last_exit
walk_occupation = _impl.walk_occupation
lower_gamma_scaled = _impl.lower_gamma_scaled
renewal_solve = _impl.renewal_solve

__all__ = [
    "BACKEND",
    "stream_words",
    "walk_discrete",
    "walk_continuous_at",
    "walk_return_times",
    "walk_last_exit",
    "walk_occupation",
    "lower_gamma_scaled",
    "renewal_solve",
]
