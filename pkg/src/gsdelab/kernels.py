"""Kernel backend selection.

The compiled extension is preferred; set ``GSDELAB_PURE_PYTHON=1`` to force the
numpy fallback (used by the benchmark and the backend-agreement tests).
"""
import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("GSDELAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

philox4x32 = _active.philox4x32
normal_block = _active.normal_block
gheat_steps = _active.gheat_steps
lattice_step = _active.lattice_step
