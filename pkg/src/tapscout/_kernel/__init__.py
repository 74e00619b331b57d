"""Trial-loop kernel with a compiled core and a pure-Python fallback.

The compiled extension is preferred when built; set ``TAPSCOUT_KERNEL=python``
or ``TAPSCOUT_KERNEL=compiled`` to force a backend (the latter raises if the
extension is unavailable).
"""

from __future__ import annotations

import os

_choice = os.environ.get("TAPSCOUT_KERNEL", "").strip().lower()

if _choice == "python":
    from . import _reference as _impl

    BACKEND = "python"
elif _choice == "compiled":
    from . import _accel as _impl  # raises ImportError if not built

    BACKEND = "compiled"
else:
    try:
        from . import _accel as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _reference as _impl

        BACKEND = "python"

run_steps = _impl.run_steps

__all__ = ["run_steps", "BACKEND"]
