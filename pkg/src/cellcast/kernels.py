"""Kernel dispatch: the compiled extension when it imports, numpy otherwise.

Set ``CELLCAST_PURE_PYTHON=1`` to force the numpy kernels.
"""

import os

from . import _pykernels

BACKEND = "python"
combined_error = _pykernels.combined_error
impute_weekly = _pykernels.impute_weekly

if os.environ.get("CELLCAST_PURE_PYTHON") != "1":
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        combined_error = _ckernels.combined_error
        impute_weekly = _ckernels.impute_weekly

__all__ = ["BACKEND", "combined_error", "impute_weekly"]
