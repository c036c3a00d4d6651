"""Backend selection for the pointwise hot kernels.

Prefers the compiled extension; falls back to the numpy implementation when
the extension is missing or when CYCLETRANS_PURE_PYTHON=1 is set. Both
backends implement the same contract (see kernels_py for the reference).
"""

import os

from . import kernels_py

if os.environ.get("CYCLETRANS_PURE_PYTHON") == "1":
    _impl = kernels_py
    BACKEND = "python"
else:
    try:
        from . import _fastkernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = kernels_py
        BACKEND = "python"

lstm_gates_forward = _impl.lstm_gates_forward
lstm_gates_backward = _impl.lstm_gates_backward
adagrad_update = _impl.adagrad_update
