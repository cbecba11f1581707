"""Time-loop backends.

The compiled Euler loop (``_euler``, Cython) is used when it was built;
otherwise the pure-Python loop in :mod:`.euler_py` runs the same steps
through :mod:`hfgt_hydro.esn`. Set ``HFGT_HYDRO_BACKEND=python`` to force
the fallback.
"""

from __future__ import annotations

import os

from . import euler_py

try:
    from . import _euler
except ImportError:  # extension not built
    _euler = None

AVAILABLE = ("compiled", "python") if _euler is not None else ("python",)

if os.environ.get("HFGT_HYDRO_BACKEND", "").lower() == "python" or _euler is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"


def get_backend(name: str | None = None):
    """Return the ``run(problem) -> (states, firings, warnings)`` callable for ``name``."""
    name = name or BACKEND
    if name == "python":
        return euler_py.run
    if name == "compiled":
        if _euler is None:
            raise RuntimeError("compiled backend is not available; build the extension with "
                               "'pip install -e . --no-build-isolation'")
        from .euler_compiled import run

        return run
    raise ValueError(f"unknown backend {name!r}; expected one of {AVAILABLE}")
