"""Primitive catalog: names, arities, and per-example implementations.

Implementations receive already-resolved argument values for one example
and return exactly one output value. Value kinds are int, bool, list of
int, list of bool, or Grid; kind errors raise TypeMismatch and runtime
range/length failures raise ExecError, both of which kill the candidate
without aborting the search.

The catalog order is load-bearing: token ids in the vocabulary follow it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from gridsynth import kernels
from gridsynth.errors import ExecError, TypeMismatch
from gridsynth.grid import GRID_CAP, N_COLORS, Grid

DEL = "del"

# Magnitude cap for arithmetic results; keeps compiled and pure kernels on
# identical integer behaviour (no silent C overflow).
INT_LIMIT = 2**31

# Length cap for constructed lists.
LIST_LIMIT = GRID_CAP * GRID_CAP

KIND_INT = "int"
KIND_BOOL = "bool"
KIND_INT_LIST = "int_list"
KIND_BOOL_LIST = "bool_list"
KIND_GRID = "grid"


def value_kind(v) -> str:
    if isinstance(v, bool):
        return KIND_BOOL
    if isinstance(v, int):
        return KIND_INT
    if isinstance(v, Grid):
        return KIND_GRID
    if isinstance(v, list):
        if v and isinstance(v[0], bool):
            return KIND_BOOL_LIST
        return KIND_INT_LIST
    raise TypeMismatch(f"unsupported value type {type(v).__name__}")


def _want_int(v, who):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeMismatch(f"{who} expects an integer, got {value_kind(v)}")
    return v


def _want_grid(v, who):
    if not isinstance(v, Grid):
        raise TypeMismatch(f"{who} expects a grid, got {value_kind(v)}")
    return v


# The empty list satisfies both list kinds; every list-producing primitive
# keeps element types homogeneous, so this is the only ambiguous value.


def _want_int_list(v, who):
    if not isinstance(v, list) or (v and isinstance(v[0], bool)):
        raise TypeMismatch(f"{who} expects an integer list, got {value_kind(v)}")
    return v


def _want_bool_list(v, who):
    if not isinstance(v, list) or (v and not isinstance(v[0], bool)):
        raise TypeMismatch(f"{who} expects a boolean list, got {value_kind(v)}")
    return v


def _check_int_range(v):
    if v > INT_LIMIT or v < -INT_LIMIT:
        raise ExecError("integer result out of range")
    return v


def _check_int_list_range(vs):
    for v in vs:
        if v > INT_LIMIT or v < -INT_LIMIT:
            raise ExecError("integer result out of range")
    return vs


def _numeric_binary(op, a, b, who):
    """Int/IntList x Int/IntList with scalar broadcast; lists must length-match."""
    ka, kb = value_kind(a), value_kind(b)
    if ka == KIND_INT and kb == KIND_INT:
        try:
            return _check_int_range(kernels.ewise_int_scalar(op, [a], b, False)[0])
        except ValueError as e:
            raise ExecError(str(e)) from None
    try:
        if ka == KIND_INT_LIST and kb == KIND_INT_LIST:
            if len(a) != len(b):
                raise ExecError(f"{who}: list lengths differ ({len(a)} vs {len(b)})")
            return _check_int_list_range(kernels.ewise_int(op, a, b))
        if ka == KIND_INT_LIST and kb == KIND_INT:
            return _check_int_list_range(kernels.ewise_int_scalar(op, a, b, False))
        if ka == KIND_INT and kb == KIND_INT_LIST:
            return _check_int_list_range(kernels.ewise_int_scalar(op, b, a, True))
    except ValueError as e:
        raise ExecError(str(e)) from None
    raise TypeMismatch(f"{who} expects integers or integer lists, got {ka} and {kb}")


def _numeric_compare(op, a, b, who):
    ka, kb = value_kind(a), value_kind(b)
    if ka == KIND_INT and kb == KIND_INT:
        return kernels.ewise_cmp_scalar(op, [a], b, False)[0]
    if ka == KIND_INT_LIST and kb == KIND_INT_LIST:
        if len(a) != len(b):
            raise ExecError(f"{who}: list lengths differ ({len(a)} vs {len(b)})")
        return kernels.ewise_cmp(op, a, b)
    if ka == KIND_INT_LIST and kb == KIND_INT:
        return kernels.ewise_cmp_scalar(op, a, b, False)
    if ka == KIND_INT and kb == KIND_INT_LIST:
        return kernels.ewise_cmp_scalar(op, b, a, True)
    raise TypeMismatch(f"{who} expects integers or integer lists, got {ka} and {kb}")


def _bool_binary(fn, a, b, who):
    if isinstance(a, bool) and isinstance(b, bool):
        return fn(a, b)
    if isinstance(a, list) and isinstance(b, list):
        _want_bool_list(a, who)
        _want_bool_list(b, who)
        if len(a) != len(b):
            raise ExecError(f"{who}: list lengths differ ({len(a)} vs {len(b)})")
        return [fn(x, y) for x, y in zip(a, b)]
    if isinstance(a, list) and isinstance(b, bool):
        return [fn(x, b) for x in _want_bool_list(a, who)]
    if isinstance(a, bool) and isinstance(b, list):
        return [fn(a, y) for y in _want_bool_list(b, who)]
    raise TypeMismatch(f"{who} expects booleans or boolean lists")


def _switch(cond, a, b):
    cond = _want_bool_list(cond, "switch")
    ka, kb = value_kind(a), value_kind(b)
    if ka not in (KIND_INT, KIND_INT_LIST) or kb not in (KIND_INT, KIND_INT_LIST):
        raise TypeMismatch("switch branches expect integers or integer lists")
    if ka == KIND_INT_LIST and len(a) != len(cond):
        raise ExecError("switch: true-branch length differs from condition")
    if kb == KIND_INT_LIST and len(b) != len(cond):
        raise ExecError("switch: false-branch length differs from condition")
    a_list, a_scalar = (a, 0) if ka == KIND_INT_LIST else (None, a)
    b_list, b_scalar = (b, 0) if kb == KIND_INT_LIST else (None, b)
    return kernels.select(cond, a_list, a_scalar, b_list, b_scalar)


def _set_pixels(g, xs, ys, cs):
    g = _want_grid(g, "set_pixels")
    xs = _want_int_list(xs, "set_pixels")
    ys = _want_int_list(ys, "set_pixels")
    cs = _want_int_list(cs, "set_pixels")
    if not len(xs) == len(ys) == len(cs):
        raise ExecError("set_pixels: coordinate and color lists must length-match")
    try:
        cells, w, h = kernels.paste_pixels(g.cells, g.width, g.height, xs, ys, cs, GRID_CAP)
    except ValueError as e:
        raise ExecError(str(e)) from None
    return Grid(tuple(cells), w, h, g.ul_x, g.ul_y)


def _crop(g, w, h):
    g = _want_grid(g, "crop")
    w = _want_int(w, "crop")
    h = _want_int(h, "crop")
    if not (1 <= w <= g.width and 1 <= h <= g.height):
        raise ExecError(f"crop: {w}x{h} outside current {g.width}x{g.height} grid")
    return Grid(tuple(kernels.crop_cells(g.cells, g.width, g.height, w, h)), w, h, g.ul_x, g.ul_y)


def _new_grid(w, h, fill):
    w = _want_int(w, "new_grid")
    h = _want_int(h, "new_grid")
    fill = _want_int(fill, "new_grid")
    if not (1 <= w <= GRID_CAP and 1 <= h <= GRID_CAP):
        raise ExecError(f"new_grid: dimensions {w}x{h} outside 1..{GRID_CAP}")
    if not 0 <= fill < N_COLORS:
        raise ExecError(f"new_grid: fill color {fill} outside 0-{N_COLORS - 1}")
    return Grid((fill,) * (w * h), w, h)


def _const_list(k, n):
    k = _want_int(k, "const_list")
    n = _want_int(n, "const_list")
    if not 0 <= n <= LIST_LIMIT:
        raise ExecError(f"const_list: length {n} outside 0..{LIST_LIMIT}")
    return [k] * n


def _not_op(a):
    if isinstance(a, bool):
        return not a
    if isinstance(a, list):
        return [not x for x in _want_bool_list(a, "not_op")]
    raise TypeMismatch(f"not_op expects a boolean or boolean list, got {value_kind(a)}")


def _sum_list(a):
    return _check_int_range(sum(_want_int_list(a, "sum_list")))


def _len_list(a):
    if value_kind(a) not in (KIND_INT_LIST, KIND_BOOL_LIST):
        raise TypeMismatch(f"len_list expects a list, got {value_kind(a)}")
    return len(a)


def _count_true(a):
    return sum(1 for x in _want_bool_list(a, "count_true") if x)


@dataclass(frozen=True)
class PrimitiveSpec:
    name: str
    arity: int
    impl: Callable | None  # None for del, which the interpreter handles itself
    ref_only_args: bool = False


_DEFAULT_PRIMITIVES = (
    PrimitiveSpec("identity", 1, lambda v: v),
    PrimitiveSpec("equal", 2, lambda a, b: _numeric_compare(kernels.CMP_EQ, a, b, "equal")),
    PrimitiveSpec("not_equal", 2, lambda a, b: _numeric_compare(kernels.CMP_NE, a, b, "not_equal")),
    PrimitiveSpec("greater_than", 2, lambda a, b: _numeric_compare(kernels.CMP_GT, a, b, "greater_than")),
    PrimitiveSpec("less_than", 2, lambda a, b: _numeric_compare(kernels.CMP_LT, a, b, "less_than")),
    PrimitiveSpec("switch", 3, _switch),
    PrimitiveSpec("add", 2, lambda a, b: _numeric_binary(kernels.OP_ADD, a, b, "add")),
    PrimitiveSpec("sub", 2, lambda a, b: _numeric_binary(kernels.OP_SUB, a, b, "sub")),
    PrimitiveSpec("mul", 2, lambda a, b: _numeric_binary(kernels.OP_MUL, a, b, "mul")),
    PrimitiveSpec("div", 2, lambda a, b: _numeric_binary(kernels.OP_DIV, a, b, "div")),
    PrimitiveSpec("mod", 2, lambda a, b: _numeric_binary(kernels.OP_MOD, a, b, "mod")),
    PrimitiveSpec("max_of", 2, lambda a, b: _numeric_binary(kernels.OP_MAX, a, b, "max_of")),
    PrimitiveSpec("min_of", 2, lambda a, b: _numeric_binary(kernels.OP_MIN, a, b, "min_of")),
    PrimitiveSpec("and_op", 2, lambda a, b: _bool_binary(lambda x, y: x and y, a, b, "and_op")),
    PrimitiveSpec("or_op", 2, lambda a, b: _bool_binary(lambda x, y: x or y, a, b, "or_op")),
    PrimitiveSpec("not_op", 1, _not_op),
    PrimitiveSpec("sum_list", 1, _sum_list),
    PrimitiveSpec("len_list", 1, _len_list),
    PrimitiveSpec("count_true", 1, _count_true),
    PrimitiveSpec("const_list", 2, _const_list),
    PrimitiveSpec("colorOf", 1, lambda g: list(_want_grid(g, "colorOf").cells)),
    PrimitiveSpec("new_grid", 3, _new_grid),
    PrimitiveSpec("set_pixels", 4, _set_pixels),
    PrimitiveSpec("crop", 3, _crop),
    PrimitiveSpec(DEL, 1, None, ref_only_args=True),
)


class Catalog:
    """Ordered primitive set; the order fixes token ids."""

    def __init__(self, primitives=_DEFAULT_PRIMITIVES):
        self.primitives = tuple(primitives)
        self.by_name = {p.name: p for p in self.primitives}
        if len(self.by_name) != len(self.primitives):
            raise ValueError("duplicate primitive names in catalog")

    def __contains__(self, name):
        return name in self.by_name

    def __len__(self):
        return len(self.primitives)

    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.primitives)

    def get(self, name: str) -> PrimitiveSpec:
        try:
            return self.by_name[name]
        except KeyError:
            raise KeyError(f"unknown primitive {name!r}") from None

    def restrict(self, names) -> "Catalog":
        """Sub-catalog preserving the default order (for small-scale tests)."""
        keep = set(names)
        missing = keep - set(self.by_name)
        if missing:
            raise KeyError(f"unknown primitives: {sorted(missing)}")
        return Catalog(tuple(p for p in self.primitives if p.name in keep))


def default_catalog() -> Catalog:
    return Catalog()
