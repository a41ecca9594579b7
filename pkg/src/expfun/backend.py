"""Selects the back-substitution implementation at import time.

The compiled extension is preferred when it was built; the numpy
fallback is always available.  Set EXPFUN_PURE_PYTHON=1 to force the
fallback (the benchmark uses this to compare the two).
"""

import os

from . import _kernels_py

if os.environ.get("EXPFUN_PURE_PYTHON", "") not in ("", "0"):
    back_substitute = _kernels_py.back_substitute
    BACKEND = "python"
else:
    try:
        from ._kernels import back_substitute

        BACKEND = "compiled"
    except ImportError:
        back_substitute = _kernels_py.back_substitute
        BACKEND = "python"
