import random

import pytest

from gridsynth.catalog import default_catalog
from gridsynth.codec import Vocabulary
from gridsynth.dsl import Const, InstructionStep, Program, Ref, RefAttr, parse_program
from gridsynth.grid import ATTRIBUTES, Grid
from gridsynth.tasks import GREEN


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def vocab(catalog):
    return Vocabulary.from_catalog(catalog)


# The four-step recolor-to-2 program exercised throughout: mask the zero
# pixels, pick 0-or-2 per pixel, drop the mask (renumbering the colors
# slot), repaint in place.
RECOLOR_TO_2 = """
equal(N0.c, 0)
switch(N1, 0, 2)
del(N1)
set_pixels(N0, N0.x, N0.y, N1)
"""


@pytest.fixture(scope="session")
def recolor_to_2(catalog):
    return parse_program(RECOLOR_TO_2, catalog)


def random_grid_rows(rng, min_dim=1, max_dim=8, zero_bias=True):
    w = rng.randint(min_dim, max_dim)
    h = rng.randint(min_dim, max_dim)
    if zero_bias:
        pick = lambda: rng.choice([0, 0, 0, rng.randint(1, 9)])
    else:
        pick = lambda: rng.randint(0, 9)
    return [[pick() for _ in range(w)] for _ in range(h)]


def random_structural_step(rng, catalog, n_slots, allow_del=True):
    """Grammar-valid step with random argument forms; types not guaranteed."""
    while True:
        spec = catalog.primitives[rng.randrange(len(catalog.primitives))]
        if spec.name == "del" and not allow_del:
            continue
        break
    args = []
    for _ in range(spec.arity):
        if spec.ref_only_args:
            args.append(Ref(rng.randrange(n_slots)))
            continue
        form = rng.random()
        if form < 0.4:
            args.append(Const(rng.randrange(10)))
        elif form < 0.7:
            args.append(Ref(rng.randrange(n_slots)))
        else:
            args.append(RefAttr(rng.randrange(n_slots), rng.choice(ATTRIBUTES)))
    return InstructionStep(spec.name, tuple(args))


# Row-level reference transforms, independent of the DSL; used as the
# execution oracle for the shipped task programs.


def ref_mirror_x(rows):
    return [list(reversed(r)) for r in rows]


def ref_mirror_y(rows):
    return [list(r) for r in reversed(rows)]


def ref_recolor(rows):
    return [[GREEN if v else 0 for v in r] for r in rows]


def ref_shift(rows, dx, dy):
    h, w = len(rows), len(rows[0])
    out = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h:
                out[ny][nx] = rows[y][x]
    return out


REFERENCE_TRANSFORMS = {
    "Train1": ref_mirror_x,
    "Train2": ref_mirror_y,
    "Train3": ref_recolor,
    "Train4": lambda r: ref_recolor(ref_mirror_x(r)),
    "Train5": lambda r: ref_recolor(ref_mirror_y(r)),
    "Train6": lambda r: ref_shift(r, 1, 0),
    "Train7": lambda r: ref_shift(r, 0, -1),
    "Train8": lambda r: ref_shift(r, 0, 1),
    "Train9": lambda r: ref_mirror_x(ref_shift(r, 1, 0)),
    "Train10": lambda r: ref_shift(ref_mirror_y(r), 1, 0),
    "Train11": lambda r: ref_shift(ref_mirror_x(r), 0, -1),
    "Train12": lambda r: ref_mirror_x(ref_shift(r, 0, 1)),
    "Train13": lambda r: ref_mirror_y(ref_shift(r, 0, -1)),
    "Train14": lambda r: ref_shift(ref_mirror_y(r), 0, -1),
    "OOD1": lambda r: ref_recolor(ref_shift(r, 1, 0)),
    "OOD2": lambda r: ref_shift(ref_mirror_x(r), 1, 0),
    "OOD3": lambda r: ref_shift(r, 1, -1),
    "OOD4": lambda r: ref_mirror_x(ref_mirror_y(r)),
    "OOD5": lambda r: ref_mirror_y(ref_shift(ref_mirror_x(r), 1, 0)),
    "OOD6": lambda r: ref_shift(ref_recolor(r), 1, -1),
    "OOD7": lambda r: ref_shift(r, -1, 0),
}


def make_ood2_special_instance(rng, n_demos=3, max_dim=8):
    """OOD2 demos whose inputs have an all-zero rightmost column, so the
    mirrored grid's left column is already blank and the ground truth's
    zero-out steps do nothing."""
    from gridsynth.grid import grids_equal
    from gridsynth.tasks import TASKS_BY_ID, TaskInstance, _gt_run

    spec = TASKS_BY_ID["OOD2"]
    demos = []
    while len(demos) < n_demos:
        rows = random_grid_rows(rng, min_dim=3, max_dim=max_dim)
        for row in rows:
            row[-1] = 0
        if all(v == 0 for row in rows for v in row):
            continue
        g = Grid.from_rows(rows)
        targets, _ = _gt_run(spec.ground_truth, (g,), default_catalog())
        if grids_equal(g, targets[0]):
            continue
        demos.append((g, targets[0]))
    return TaskInstance(demos, [])
