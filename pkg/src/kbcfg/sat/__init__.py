"""SAT core with a compiled hot path and a pure-Python fallback.

The backend is picked at import time: the Cython extension when it built,
otherwise the pure-Python engine. Set KBCFG_SAT_BACKEND=py|cy to force one.
Both implement the same algorithm with identical decision order, so every
result is reproducible across backends.
"""

import os

from .api import SatOutcome  # noqa: F401

_forced = os.environ.get("KBCFG_SAT_BACKEND")
if _forced not in (None, "", "py", "cy"):
    raise RuntimeError(f"KBCFG_SAT_BACKEND must be 'py' or 'cy', not {_forced!r}")

if _forced == "py":
    from ._engine import CdclSolver

    BACKEND = "py"
else:
    try:
        from ._engine_cy import CdclSolver  # type: ignore[no-redef]

        BACKEND = "cy"
    except ImportError:
        if _forced == "cy":
            raise
        from ._engine import CdclSolver  # type: ignore[no-redef]

        BACKEND = "py"

SolverInstance = CdclSolver

__all__ = ["SatOutcome", "CdclSolver", "SolverInstance", "BACKEND"]
