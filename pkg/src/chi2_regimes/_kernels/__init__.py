"""Per-replicate tally kernels: compiled extension with a pure-Python twin.

The backend is chosen once at import time: the compiled extension when it
built, otherwise the pure-Python twin.  Set CHI2_REGIMES_BACKEND=python or
=c to force one (the benchmark and the parity tests import both directly).

The two backends execute the identical per-cell operation sequence in
ascending cell order, so their floating-point outputs are bit-identical;
tests enforce this.  Numeric results therefore never depend on the backend.
"""

import os

from . import _pykernels

_requested = os.environ.get("CHI2_REGIMES_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _pykernels
    BACKEND = "python"
elif _requested in ("", "c"):
    try:
        from . import _ckernels as _impl

        BACKEND = "c"
    except ImportError:
        if _requested == "c":
            raise ImportError(
                "CHI2_REGIMES_BACKEND=c but the compiled kernel is not built"
            ) from None
        _impl = _pykernels
        BACKEND = "python"
else:
    raise ImportError(
        f"CHI2_REGIMES_BACKEND must be 'c' or 'python', got {_requested!r}"
    )

tally = _impl.tally
