"""Kernel backend selection.

The compiled extension is used when importable; setting the environment
variable ``BAYESOT_PURE_PYTHON=1`` forces the numpy fallback.
"""
import importlib
import os

_NAMES = {"cython": "bayesot._ckernels", "python": "bayesot._pykernels"}


def load(name):
    """Import a backend by name (``"cython"`` or ``"python"``)."""
    try:
        return importlib.import_module(_NAMES[name])
    except KeyError:
        raise ValueError(f"unknown backend {name!r}") from None


def available():
    out = []
    for name in _NAMES:
        try:
            load(name)
        except ImportError:
            continue
        out.append(name)
    return out


if os.environ.get("BAYESOT_PURE_PYTHON"):
    BACKEND = "python"
else:
    try:
        load("cython")
        BACKEND = "cython"
    except ImportError:
        BACKEND = "python"

kernels = load(BACKEND)
