"""Backend selection for the DBM inner loops.

The compiled extension (`_flow_core`, Cython) is preferred; the pure-numpy
twin (`_flow_py`) is the fallback. Set WIGNERLAB_PURE_PYTHON=1 to force the
fallback (used by the benchmark and the backend-consistency tests).
"""

import os

if os.environ.get("WIGNERLAB_PURE_PYTHON") == "1":
    from . import _flow_py as backend
else:
    try:
        from . import _flow_core as backend  # type: ignore[attr-defined]
    except ImportError:
        from . import _flow_py as backend

BACKEND = backend.BACKEND
em_block = backend.em_block
replay_block = backend.replay_block


def get_backend(name: str | None = None):
    """Return a named backend module ("cython" | "python"), or the active one."""
    if name is None:
        return backend
    if name == "python":
        from . import _flow_py

        return _flow_py
    if name == "cython":
        from . import _flow_core  # raises ImportError when not built

        return _flow_core
    raise ValueError(f"unknown backend {name!r}")
