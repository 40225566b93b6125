"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the
pure-NumPy kernels are used. Set MIXORDER_BACKEND=python or
MIXORDER_BACKEND=compiled to force a choice (forcing ``compiled`` raises if
the extension is missing). Selection happens once, at import time.
"""

import os

_choice = os.environ.get("MIXORDER_BACKEND", "auto").strip().lower()

if _choice in ("auto", ""):
    try:
        from . import _fastkernels as _impl
    except ImportError:
        from . import _purekernels as _impl
elif _choice in ("compiled", "c", "fast"):
    from . import _fastkernels as _impl
elif _choice in ("python", "pure"):
    from . import _purekernels as _impl
else:
    raise RuntimeError(
        f"MIXORDER_BACKEND={_choice!r} not understood; "
        "use 'auto', 'compiled', or 'python'")

BACKEND = _impl.BACKEND_NAME
component_log_densities = _impl.component_log_densities
em_step = _impl.em_step
