"""Kernel backend selection.

The hot inner loops (Cayley-Dickson products, small-matrix Jacobi SVD,
torus curve integration) exist twice: a Cython extension (_fast) and a
pure numpy reference (_ref). The extension is used when importable;
set DSL_BACKEND=pure or DSL_BACKEND=ext to force a choice.
"""

import os

from . import _ref

_choice = os.environ.get("DSL_BACKEND", "auto").lower()

if _choice == "pure":
    _impl = _ref
elif _choice == "ext":
    from . import _fast as _impl
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = _ref

BACKEND = "ext" if _impl is not _ref else "pure"

cd_mul = _impl.cd_mul
cd_conj = _impl.cd_conj
jacobi_svd = _impl.jacobi_svd
batch_singular_values = _impl.batch_singular_values
integrate_level_curve = _impl.integrate_level_curve
integrate_gradient_flow = _impl.integrate_gradient_flow

__all__ = [
    "BACKEND",
    "cd_mul",
    "cd_conj",
    "jacobi_svd",
    "batch_singular_values",
    "integrate_level_curve",
    "integrate_gradient_flow",
]
