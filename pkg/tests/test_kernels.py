"""Pure and compiled kernels must be behaviour-identical."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridsynth import _kernels_py as pure
from gridsynth import kernels
from gridsynth.kernels import load_impl

compiled = load_impl(pure=False)

needs_compiled = pytest.mark.skipif(
    compiled.IMPL != "compiled", reason="compiled kernels not built"
)

ints = st.integers(min_value=-(2**31), max_value=2**31)
int_lists = st.lists(ints, min_size=0, max_size=40)
all_ops = st.sampled_from(
    [pure.OP_ADD, pure.OP_SUB, pure.OP_MUL, pure.OP_DIV, pure.OP_MOD, pure.OP_MAX, pure.OP_MIN]
)
cmp_ops = st.sampled_from([pure.CMP_EQ, pure.CMP_NE, pure.CMP_GT, pure.CMP_LT])


def both(name):
    return getattr(pure, name), getattr(compiled, name)


@needs_compiled
@settings(max_examples=300)
@given(op=all_ops, a=int_lists, s=ints, left=st.booleans())
def test_ewise_scalar_equivalence(op, a, s, left):
    p, c = both("ewise_int_scalar")
    try:
        expected = p(op, a, s, left)
    except ValueError:
        with pytest.raises(ValueError):
            c(op, a, s, left)
        return
    assert c(op, a, s, left) == expected


@needs_compiled
@settings(max_examples=300)
@given(op=all_ops, pairs=st.lists(st.tuples(ints, ints), max_size=40))
def test_ewise_list_equivalence(op, pairs):
    a = [x for x, _ in pairs]
    b = [y for _, y in pairs]
    p, c = both("ewise_int")
    try:
        expected = p(op, a, b)
    except ValueError:
        with pytest.raises(ValueError):
            c(op, a, b)
        return
    assert c(op, a, b) == expected


@needs_compiled
@settings(max_examples=200)
@given(op=cmp_ops, pairs=st.lists(st.tuples(ints, ints), max_size=40), s=ints, left=st.booleans())
def test_cmp_equivalence(op, pairs, s, left):
    a = [x for x, _ in pairs]
    b = [y for _, y in pairs]
    assert compiled.ewise_cmp(op, a, b) == pure.ewise_cmp(op, a, b)
    assert compiled.ewise_cmp_scalar(op, a, s, left) == pure.ewise_cmp_scalar(op, a, s, left)


@needs_compiled
@settings(max_examples=200)
@given(
    cond=st.lists(st.booleans(), max_size=30),
    scalars=st.tuples(ints, ints),
    use_lists=st.tuples(st.booleans(), st.booleans()),
    data=st.data(),
)
def test_select_equivalence(cond, scalars, use_lists, data):
    n = len(cond)
    fixed = st.lists(ints, min_size=n, max_size=n)
    a_list = data.draw(fixed) if use_lists[0] else None
    b_list = data.draw(fixed) if use_lists[1] else None
    args = (cond, a_list, scalars[0], b_list, scalars[1])
    assert compiled.select(*args) == pure.select(*args)


@needs_compiled
@settings(max_examples=300)
@given(
    w=st.integers(1, 8),
    h=st.integers(1, 8),
    writes=st.lists(
        st.tuples(st.integers(-3, 12), st.integers(-3, 12), st.integers(-1, 10)),
        max_size=30,
    ),
    cap=st.sampled_from([8, 12, 64]),
    data=st.data(),
)
def test_paste_equivalence(w, h, writes, cap, data):
    cells = tuple(data.draw(st.integers(0, 9)) for _ in range(w * h))
    xs = [x for x, _, _ in writes]
    ys = [y for _, y, _ in writes]
    cs = [c for _, _, c in writes]
    try:
        expected = pure.paste_pixels(cells, w, h, xs, ys, cs, cap)
    except ValueError:
        with pytest.raises(ValueError):
            compiled.paste_pixels(cells, w, h, xs, ys, cs, cap)
        return
    assert compiled.paste_pixels(cells, w, h, xs, ys, cs, cap) == expected


@needs_compiled
@settings(max_examples=100)
@given(w=st.integers(1, 10), h=st.integers(1, 10), data=st.data())
def test_crop_and_coords_equivalence(w, h, data):
    cells = tuple(data.draw(st.integers(0, 9)) for _ in range(w * h))
    nw = data.draw(st.integers(1, w))
    nh = data.draw(st.integers(1, h))
    assert compiled.crop_cells(cells, w, h, nw, nh) == pure.crop_cells(cells, w, h, nw, nh)
    assert compiled.coord_lists(w, h) == pure.coord_lists(w, h)


def test_paste_negative_coordinates_dropped():
    cells, w, h = kernels.paste_pixels((1, 2, 3, 4), 2, 2, [-1, 0], [0, -2], [5, 5], 64)
    assert (cells, w, h) == ([1, 2, 3, 4], 2, 2)


def test_paste_extends_with_zero_padding():
    cells, w, h = kernels.paste_pixels((1, 2, 3, 4), 2, 2, [2], [0], [7], 64)
    assert (w, h) == (3, 2)
    assert cells == [1, 2, 7, 3, 4, 0]


def test_paste_rejects_growth_past_cap():
    with pytest.raises(ValueError):
        kernels.paste_pixels((1,), 1, 1, [4], [0], [5], 4)


def test_paste_rejects_bad_color():
    with pytest.raises(ValueError):
        kernels.paste_pixels((1,), 1, 1, [0], [0], [10], 64)


def test_division_follows_floor_semantics():
    assert kernels.ewise_int(kernels.OP_DIV, [-7], [2]) == [-4]
    assert kernels.ewise_int(kernels.OP_MOD, [-7], [2]) == [1]
    with pytest.raises(ValueError):
        kernels.ewise_int(kernels.OP_DIV, [1], [0])


def test_pure_fallback_selected_via_environment():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "from gridsynth import kernels; print(kernels.IMPL)"],
        env={"GRIDSYNTH_PURE": "1", "PATH": "/usr/bin:/bin"},
        capture_output=True,
        text=True,
    )
    assert out.stdout.strip() == "pure"
