"""Kernel backend selection.

Prefers the compiled extension (``swimgait._kernels._core``, built from
Cython) and falls back to the numpy implementation. Set SWIMGAIT_PURE=1
to force the fallback, e.g. for benchmarking or debugging.
"""

import os

from . import pure

if os.environ.get("SWIMGAIT_PURE") == "1":
    _impl = pure
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pure

BACKEND: str = _impl.BACKEND
connection_batch = _impl.connection_batch
env_step = _impl.env_step


def available_backends() -> dict[str, object]:
    """All importable backends by name (for parity tests and benchmarks)."""
    out = {"pure": pure}
    try:
        from . import _core

        out["compiled"] = _core
    except ImportError:
        pass
    return out
