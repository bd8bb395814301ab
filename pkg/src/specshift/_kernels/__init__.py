"""Kernel backend selection.

The compiled extension ``specshift._speckern`` is preferred when it
imported successfully; otherwise (or when ``SPECSHIFT_PURE_PYTHON`` is
set in the environment) the pure-Python reference implementation is
used.  Both backends are bit-for-bit compatible.
"""

import os

from . import pure

N_COUNTERS = pure.N_COUNTERS
COUNTER_NAMES = (
    "target_calls", "draft_calls", "emitted", "proposed",
    "verified", "accepted", "bonus", "extra",
)

if os.environ.get("SPECSHIFT_PURE_PYTHON"):
    _impl = pure
else:
    try:
        from specshift import _speckern as _impl
    except ImportError:
        _impl = pure

BACKEND = "pure" if _impl is pure else "cython"

decode_batch_vanilla = _impl.decode_batch_vanilla
decode_batch_standard = _impl.decode_batch_standard
decode_batch_shifted = _impl.decode_batch_shifted


def get_backend(name: str):
    """Explicit backend module by name ('pure' or 'cython')."""
    if name == "pure":
        return pure
    if name == "cython":
        from specshift import _speckern
        return _speckern
    raise ValueError(f"unknown backend {name!r}")
