# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled kernels for the interpreter hot path.

Must stay behaviour-identical to `_kernels_py` (the pure twin); the
equivalence is property-tested. Integer division/modulo follow Python
floor semantics, not C truncation.
"""

IMPL = "compiled"

OP_ADD = 0
OP_SUB = 1
OP_MUL = 2
OP_DIV = 3
OP_MOD = 4
OP_MAX = 5
OP_MIN = 6

CMP_EQ = 0
CMP_NE = 1
CMP_GT = 2
CMP_LT = 3


# cdivision stays off, so // and % on C longs keep Python floor semantics.
cdef long _apply_int(int op, long x, long y) except? -9223372036854775807:
    if op == OP_ADD:
        return x + y
    if op == OP_SUB:
        return x - y
    if op == OP_MUL:
        return x * y
    if op == OP_DIV:
        if y == 0:
            raise ValueError("division by zero")
        return x // y
    if op == OP_MOD:
        if y == 0:
            raise ValueError("modulo by zero")
        return x % y
    if op == OP_MAX:
        return x if x >= y else y
    return x if x <= y else y


cdef inline bint _apply_cmp(int op, long x, long y):
    if op == CMP_EQ:
        return x == y
    if op == CMP_NE:
        return x != y
    if op == CMP_GT:
        return x > y
    return x < y


def ewise_int(int op, list a, list b):
    cdef Py_ssize_t i, n = len(a)
    cdef list out = [0] * n
    for i in range(n):
        out[i] = _apply_int(op, a[i], b[i])
    return out


def ewise_int_scalar(int op, list a, long s, bint scalar_left):
    cdef Py_ssize_t i, n = len(a)
    cdef list out = [0] * n
    if scalar_left:
        for i in range(n):
            out[i] = _apply_int(op, s, a[i])
    else:
        for i in range(n):
            out[i] = _apply_int(op, a[i], s)
    return out


def ewise_cmp(int op, list a, list b):
    cdef Py_ssize_t i, n = len(a)
    cdef list out = [False] * n
    for i in range(n):
        out[i] = _apply_cmp(op, a[i], b[i])
    return out


def ewise_cmp_scalar(int op, list a, long s, bint scalar_left):
    cdef Py_ssize_t i, n = len(a)
    cdef list out = [False] * n
    if scalar_left:
        for i in range(n):
            out[i] = _apply_cmp(op, s, a[i])
    else:
        for i in range(n):
            out[i] = _apply_cmp(op, a[i], s)
    return out


def select(list cond, a_list, a_scalar, b_list, b_scalar):
    """out[i] = a[i] if cond[i] else b[i], where a/b are a list or a scalar."""
    cdef Py_ssize_t i, n = len(cond)
    cdef list out = [0] * n
    cdef bint a_is_list = a_list is not None
    cdef bint b_is_list = b_list is not None
    for i in range(n):
        if cond[i]:
            out[i] = a_list[i] if a_is_list else a_scalar
        else:
            out[i] = b_list[i] if b_is_list else b_scalar
    return out


def paste_pixels(tuple cells, long w, long h, list xs, list ys, list cs, long cap):
    """Copy the grid, then write cs[i] at (xs[i], ys[i]) in order.

    Negative coordinates are dropped silently; coordinates past the current
    edge grow the grid with zero padding, up to `cap` on either axis.
    Returns (new_cells, new_w, new_h).
    """
    cdef Py_ssize_t i, n = len(xs)
    cdef long x, y, c, new_w = w, new_h = h
    for i in range(n):
        x = xs[i]
        y = ys[i]
        if x < 0 or y < 0:
            continue
        c = cs[i]
        if c < 0 or c > 9:
            raise ValueError("paste color out of range 0-9")
        if x >= new_w:
            new_w = x + 1
        if y >= new_h:
            new_h = y + 1
    if new_w > cap or new_h > cap:
        raise ValueError("paste grows grid past the size cap")

    cdef list out
    if new_w == w and new_h == h:
        out = list(cells)
    else:
        out = [0] * (new_w * new_h)
        for y in range(h):
            for x in range(w):
                out[y * new_w + x] = cells[y * w + x]

    for i in range(n):
        x = xs[i]
        y = ys[i]
        if x < 0 or y < 0:
            continue
        out[y * new_w + x] = cs[i]
    return out, new_w, new_h


def crop_cells(tuple cells, long w, long h, long new_w, long new_h):
    cdef list out = []
    cdef long y
    for y in range(new_h):
        out.extend(cells[y * w : y * w + new_w])
    return out


def coord_lists(long w, long h):
    cdef list xs = []
    cdef list ys = []
    cdef long x, y
    for y in range(h):
        for x in range(w):
            xs.append(x)
            ys.append(y)
    return xs, ys
