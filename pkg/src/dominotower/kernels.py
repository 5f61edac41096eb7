"""Kernel dispatch: compiled extension when importable, pure Python otherwise.

Set ``DOMINOTOWER_PURE=1`` to force the fallback (the benchmark and the
kernel-equivalence tests import both backends directly).
"""

import os

from . import _pykernels

SAT = _pykernels.SAT
UNSAT = _pykernels.UNSAT
ABORTED = _pykernels.ABORTED
UNKNOWN_PROFILE = _pykernels.UNKNOWN_PROFILE

_compiled = None
if not os.environ.get("DOMINOTOWER_PURE"):
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

backend = _compiled if _compiled is not None else _pykernels
BACKEND_NAME = "compiled" if _compiled is not None else "python"

cayley_bfs = backend.cayley_bfs
norm_profile = backend.norm_profile
walk_many = backend.walk_many
solve_csp = backend.solve_csp


def backends():
    """Available backends as ``{name: module}``."""
    out = {"python": _pykernels}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
