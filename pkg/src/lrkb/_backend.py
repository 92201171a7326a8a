"""Kernel backend selection.

The compiled extension ``lrkb._kernels`` is used when importable; otherwise
the pure-NumPy fallback takes over. Set ``LRKB_FORCE_PYTHON=1`` to force the
fallback (useful for benchmarking and debugging).
"""

import os

if os.environ.get("LRKB_FORCE_PYTHON", "") not in ("", "0"):
    from lrkb import _kernels_py as _impl
else:
    try:
        from lrkb import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from lrkb import _kernels_py as _impl

BACKEND_NAME = _impl.BACKEND_NAME
oja_rk4 = _impl.oja_rk4
riccati_rk4 = _impl.riccati_rk4
