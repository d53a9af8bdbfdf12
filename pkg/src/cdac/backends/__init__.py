"""Backend selection for the hot Bellman sweep.

The compiled Cython kernel is preferred when it was built; otherwise the
pure-numpy twin is used.  Both produce bit-identical sweeps.  Selection can
be forced with the ``CDAC_BACKEND`` environment variable (``python`` or
``cython``) or per call via the ``backend=`` argument of the solver.
"""

from __future__ import annotations

import os

from . import sweep_py

try:
    from . import _sweep as _compiled
except ImportError:  # extension not built; numpy fallback
    _compiled = None

_ALIASES = {
    "python": "python",
    "numpy": "python",
    "cython": "cython",
    "compiled": "cython",
}


def available_backends() -> tuple[str, ...]:
    return ("python", "cython") if _compiled is not None else ("python",)


def get_sweep(name: str | None = None):
    """Resolve a sweep function by backend name (None = auto)."""
    if name is None:
        name = os.environ.get("CDAC_BACKEND", "").strip().lower() or None
    if name is None:
        return _compiled.bellman_sweep if _compiled is not None else sweep_py.bellman_sweep
    try:
        resolved = _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; expected one of {sorted(_ALIASES)}") from None
    if resolved == "cython":
        if _compiled is None:
            raise RuntimeError(
                "compiled backend requested but the extension is not built; "
                "reinstall with a working C toolchain or use backend='python'")
        return _compiled.bellman_sweep
    return sweep_py.bellman_sweep


def default_backend_name() -> str:
    fn = get_sweep(None)
    return "cython" if _compiled is not None and fn is _compiled.bellman_sweep else "python"


continuation_values = sweep_py.continuation_values
