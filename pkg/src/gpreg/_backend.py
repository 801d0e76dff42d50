"""Backend selection for the posterior-evaluation kernels.

The compiled extension ``gpreg._gpk`` is preferred when it was built; the
pure NumPy twin ``gpreg._gpk_py`` is used otherwise.  Setting the
environment variable ``GPREG_PURE_PYTHON=1`` forces the pure path, which is
what the benchmark uses to compare the two.
"""

import os

from . import _gpk_py

if os.environ.get("GPREG_PURE_PYTHON"):
    impl = _gpk_py
    BACKEND = "python"
else:
    try:
        from . import _gpk as impl
        BACKEND = "cython"
    except ImportError:
        impl = _gpk_py
        BACKEND = "python"


def available_backends():
    """Names of the importable backends (for tests and the benchmark)."""
    names = ["python"]
    try:
        from . import _gpk  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    return names
