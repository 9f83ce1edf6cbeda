"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``SERRE_GALERKIN_PURE`` is set to a non-empty value
other than ``0``, the numpy fallback is used. Both expose
``quad_values``, ``quad_values_multi``, ``assemble_sym``, ``load``, ``serre_terms`` and ``CyclicFactor``.
"""

import os

_force_pure = os.environ.get("SERRE_GALERKIN_PURE", "") not in ("", "0")

if _force_pure:
    from . import _fallback as backend
else:
    try:
        from . import _kernels as backend
    except ImportError:  # extension not built
        from . import _fallback as backend

from . import _fallback as python_backend

IMPLEMENTATION = backend.IMPLEMENTATION
quad_values = backend.quad_values
quad_values_multi = backend.quad_values_multi
assemble_sym = backend.assemble_sym
load = backend.load
CyclicFactor = backend.CyclicFactor
serre_terms = backend.serre_terms


def compiled_backend():
    """The compiled extension module, or None if it is not built."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels
