"""Backend selection: the compiled ``_core`` extension when importable, else numpy.

Set ``JA4ML_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("JA4ML_PURE_PYTHON") == "1":
    _compiled = None
else:
    try:
        from . import _core as _compiled
    except ImportError:
        _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"


def get(name: str | None = None):
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
