"""Pure-Python kernels for the interpreter hot path.

Same surface as the compiled module `_kernels_cy`; `gridsynth.kernels` picks
one at import time. Callers validate list lengths and value kinds; kernels
only raise ValueError for range violations they can detect themselves
(bad paste color, grid growing past the cap, division by zero).
"""

IMPL = "pure"

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


def _apply_int(op, x, y):
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


def _apply_cmp(op, x, y):
    if op == CMP_EQ:
        return x == y
    if op == CMP_NE:
        return x != y
    if op == CMP_GT:
        return x > y
    return x < y


def ewise_int(op, a, b):
    return [_apply_int(op, x, y) for x, y in zip(a, b)]


def ewise_int_scalar(op, a, s, scalar_left):
    if scalar_left:
        return [_apply_int(op, s, x) for x in a]
    return [_apply_int(op, x, s) for x in a]


def ewise_cmp(op, a, b):
    return [_apply_cmp(op, x, y) for x, y in zip(a, b)]


def ewise_cmp_scalar(op, a, s, scalar_left):
    if scalar_left:
        return [_apply_cmp(op, s, x) for x in a]
    return [_apply_cmp(op, x, s) for x in a]


def select(cond, a_list, a_scalar, b_list, b_scalar):
    """out[i] = a[i] if cond[i] else b[i], where a/b are a list or a scalar."""
    out = []
    for i, c in enumerate(cond):
        if c:
            out.append(a_list[i] if a_list is not None else a_scalar)
        else:
            out.append(b_list[i] if b_list is not None else b_scalar)
    return out


def paste_pixels(cells, w, h, xs, ys, cs, cap):
    """Copy the grid, then write cs[i] at (xs[i], ys[i]) in order.

    Negative coordinates are dropped silently; coordinates past the current
    edge grow the grid with zero padding, up to `cap` on either axis.
    Returns (new_cells, new_w, new_h).
    """
    new_w = w
    new_h = h
    for i in range(len(xs)):
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

    if new_w == w and new_h == h:
        out = list(cells)
    else:
        out = [0] * (new_w * new_h)
        for y in range(h):
            base = y * w
            nbase = y * new_w
            for x in range(w):
                out[nbase + x] = cells[base + x]

    for i in range(len(xs)):
        x = xs[i]
        y = ys[i]
        if x < 0 or y < 0:
            continue
        out[y * new_w + x] = cs[i]
    return out, new_w, new_h


def crop_cells(cells, w, h, new_w, new_h):
    out = []
    for y in range(new_h):
        base = y * w
        out.extend(cells[base : base + new_w])
    return out


def coord_lists(w, h):
    xs = []
    ys = []
    for y in range(h):
        for x in range(w):
            xs.append(x)
            ys.append(y)
    return xs, ys
