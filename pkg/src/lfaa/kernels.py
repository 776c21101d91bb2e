"""Backend selection for the hot loops.

The compiled extension is used when it was built; setting the environment
variable ``LFAA_PURE_PYTHON=1`` forces the NumPy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("LFAA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

shear_rows = _impl.shear_rows
shear_rows_adjoint = _impl.shear_rows_adjoint
gather_rows = _impl.gather_rows
col2im = _impl.col2im


def compiled_available():
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True
