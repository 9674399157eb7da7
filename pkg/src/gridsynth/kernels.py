"""Kernel selection: compiled extension if available, pure Python otherwise.

Set GRIDSYNTH_PURE=1 to force the pure implementation (used by the
benchmark and the equivalence tests).
"""

import importlib
import os

from gridsynth import _kernels_py


def load_impl(pure: bool):
    """Return the requested kernel module, or the pure one if unavailable."""
    if pure:
        return _kernels_py
    try:
        return importlib.import_module("gridsynth._kernels_cy")
    except ImportError:
        return _kernels_py


def use_impl(module) -> None:
    """Rebind the public kernel surface to `module` (benchmark helper)."""
    g = globals()
    g["IMPL"] = module.IMPL
    for name in (
        "ewise_int",
        "ewise_int_scalar",
        "ewise_cmp",
        "ewise_cmp_scalar",
        "select",
        "paste_pixels",
        "crop_cells",
        "coord_lists",
    ):
        g[name] = getattr(module, name)


_impl = load_impl(pure=os.environ.get("GRIDSYNTH_PURE") == "1")

IMPL = _impl.IMPL

OP_ADD = _impl.OP_ADD
OP_SUB = _impl.OP_SUB
OP_MUL = _impl.OP_MUL
OP_DIV = _impl.OP_DIV
OP_MOD = _impl.OP_MOD
OP_MAX = _impl.OP_MAX
OP_MIN = _impl.OP_MIN

CMP_EQ = _impl.CMP_EQ
CMP_NE = _impl.CMP_NE
CMP_GT = _impl.CMP_GT
CMP_LT = _impl.CMP_LT

ewise_int = _impl.ewise_int
ewise_int_scalar = _impl.ewise_int_scalar
ewise_cmp = _impl.ewise_cmp
ewise_cmp_scalar = _impl.ewise_cmp_scalar
select = _impl.select
paste_pixels = _impl.paste_pixels
crop_cells = _impl.crop_cells
coord_lists = _impl.coord_lists
