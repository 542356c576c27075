"""Hot inner loops of the LSTM, with a compiled core and a numpy fallback.

The compiled extension (``layermix.kernels._native``, built from Cython) and
the pure-numpy module (``layermix.kernels.pyref``) implement the same two
functions; one of them is selected once at import time:

- ``LAYERMIX_KERNELS=auto`` (default): compiled if available, else numpy.
- ``LAYERMIX_KERNELS=native``: compiled, raising if the extension is missing.
- ``LAYERMIX_KERNELS=python``: always the numpy fallback.

``BACKEND`` names the selected implementation.  ``benchmarks/bench_kernels.py``
compares the two.
"""

import os

from . import pyref

_choice = os.environ.get("LAYERMIX_KERNELS", "auto")
if _choice not in ("auto", "native", "python"):
    raise ValueError(f"LAYERMIX_KERNELS must be auto|native|python, got {_choice!r}")

if _choice == "python":
    _impl = pyref
    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        if _choice == "native":
            raise
        _impl = pyref
        BACKEND = "python"

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
