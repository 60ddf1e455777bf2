"""Backend selection for the stress kernels.

The compiled extension is used when importable. Set the environment variable
``CASIMIR_BVL_PURE_PYTHON=1`` to force the numpy implementation.
"""
from __future__ import annotations

import os

from . import _stress_kernel_py as python_backend

__all__ = ["BACKEND", "kernel", "python_backend", "compiled_backend"]

try:
    from . import _stress_kernel as compiled_backend
except ImportError:
    compiled_backend = None

if compiled_backend is not None and os.environ.get("CASIMIR_BVL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    kernel = compiled_backend
else:
    kernel = python_backend

BACKEND = kernel.BACKEND
