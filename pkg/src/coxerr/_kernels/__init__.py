"""Kernel backend selection: compiled extension if available, else pure Python.

Set ``COXERR_PURE=1`` in the environment to force the fallback (used by the
benchmark and the backend-parity tests).
"""

import os

if os.environ.get("COXERR_PURE") == "1":
    from coxerr._kernels.pure import dykstra_project

    BACKEND = "pure"
else:
    try:
        from coxerr._kernels._core import dykstra_project

        BACKEND = "compiled"
    except ImportError:
        from coxerr._kernels.pure import dykstra_project

        BACKEND = "pure"

__all__ = ["dykstra_project", "BACKEND"]
