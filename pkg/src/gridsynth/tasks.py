"""Task suite: ground-truth programs, instance sampling, dataset emission.

Fourteen training tasks compose mirror, shift, and recolor subroutines in
seen combinations; seven held-out tasks recombine the same subroutines in
ways the training set never shows. Shift subroutines paste the pixels at
an offset onto the source grid, crop back to the source size, then zero
out the stale line left behind; the crop is deliberately kept even for
the shift directions that cannot extend the grid, and on inputs whose
stale line is already blank the zero-out steps are dead weight a searcher
can legitimately skip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from gridsynth.catalog import Catalog, default_catalog
from gridsynth.codec import Vocabulary, encode_instruction, encode_state
from gridsynth.dsl import (
    MAX_REFS_DEFAULT,
    Const,
    InstructionStep,
    Program,
    ProgramState,
    Ref,
    RefAttr,
    exec_step,
    run_program,
    shift_index_after_del,
)
from gridsynth.errors import DslError
from gridsynth.grid import TASK_DIM_MAX, Grid, grids_equal

GREEN = 3


class SamplerExhausted(RuntimeError):
    """Rejection sampling failed to produce an acceptable instance."""


class FormatError(ValueError):
    """Malformed task file."""


# -- ground-truth program construction ---------------------------------------


class _Slot:
    """Handle to a live state variable; the builder renumbers it on del."""

    __slots__ = ("index",)

    def __init__(self, index: int):
        self.index = index


class ProgramBuilder:
    """Builds programs against live slot handles so del renumbering can
    never silently corrupt a reference."""

    def __init__(self, max_refs: int = MAX_REFS_DEFAULT):
        self.max_refs = max_refs
        self.steps: list[InstructionStep] = []
        self.input = _Slot(0)
        self._live: list[_Slot] = [self.input]

    def _arg(self, a):
        if isinstance(a, int):
            return Const(a)
        if isinstance(a, _Slot):
            return Ref(a.index)
        slot, attr_name = a
        return RefAttr(slot.index, attr_name)

    def step(self, primitive: str, *args) -> _Slot:
        if len(self._live) >= self.max_refs:
            raise RuntimeError(
                f"program needs more than {self.max_refs} live slots; add del steps"
            )
        self.steps.append(InstructionStep(primitive, tuple(self._arg(a) for a in args)))
        out = _Slot(len(self._live))
        self._live.append(out)
        return out

    def delete(self, slot: _Slot) -> None:
        self.steps.append(InstructionStep("del", (Ref(slot.index),)))
        self._live.remove(slot)
        for s in self._live:
            if s.index > slot.index:
                s.index -= 1
        slot.index = -1

    def build(self) -> Program:
        return Program(tuple(self.steps))


def _mirror(b: ProgramBuilder, src: _Slot, axis: str):
    """Left-right (axis='x') or top-bottom (axis='y') mirror.

    Uses colorOf for the colors even though the .c attribute would do; the
    two extra tokens leave room for a searcher to find a tighter variant.
    """
    if axis == "x":
        coords = b.step("sub", (src, "max_x"), (src, "x"))
        colors = b.step("colorOf", src)
        out = b.step("set_pixels", src, coords, (src, "y"), colors)
    else:
        coords = b.step("sub", (src, "max_y"), (src, "y"))
        colors = b.step("colorOf", src)
        out = b.step("set_pixels", src, (src, "x"), coords, colors)
    return out, (coords, colors)


def _recolor(b: ProgramBuilder, src: _Slot, color: int):
    """Repaint every non-zero pixel with `color`."""
    mask = b.step("equal", (src, "c"), 0)
    colors = b.step("switch", mask, 0, color)
    b.delete(mask)
    out = b.step("set_pixels", src, (src, "x"), (src, "y"), colors)
    return out, (colors,)


def _shift(b: ProgramBuilder, src: _Slot, dx: int, dy: int, purge=(), purge_paste=False):
    """Move pixels by one cell along dx/dy with no wrapping.

    Paste at the offset onto the source grid, crop back to the source
    dimensions, then blank the line the shift left behind. Pasting past the
    right/bottom edge grows the grid (hence the crop); pasting past the
    left/top edge silently drops those pixels, so for those directions the
    crop is a no-op that is kept anyway. Deep compositions pass `purge`
    slots (and purge_paste) to free dead variables right after the crop.
    """
    xs = b.step("add" if dx > 0 else "sub", (src, "x"), 1) if dx else (src, "x")
    ys = b.step("add" if dy > 0 else "sub", (src, "y"), 1) if dy else (src, "y")
    pasted = b.step("set_pixels", src, xs, ys, (src, "c"))
    out = b.step("crop", pasted, (src, "width"), (src, "height"))
    for slot in purge:
        b.delete(slot)
    if purge_paste:
        b.delete(pasted)
    masks = []
    if dx > 0:
        masks.append(b.step("equal", (out, "x"), 0))
    if dx < 0:
        masks.append(b.step("equal", (out, "x"), (out, "max_x")))
    if dy > 0:
        masks.append(b.step("equal", (out, "y"), 0))
    if dy < 0:
        masks.append(b.step("equal", (out, "y"), (out, "max_y")))
    mask = masks[0] if len(masks) == 1 else b.step("or_op", masks[0], masks[1])
    colors = b.step("switch", mask, 0, (out, "c"))
    temps = () if purge_paste else (pasted,)
    return b.step("set_pixels", out, (out, "x"), (out, "y"), colors), temps


def _build(make) -> Program:
    b = ProgramBuilder()
    make(b)
    return b.build()


def _train_programs() -> dict[str, Program]:
    def t1(b):
        _mirror(b, b.input, "x")

    def t2(b):
        _mirror(b, b.input, "y")

    def t3(b):
        _recolor(b, b.input, GREEN)

    def t4(b):
        out, _ = _mirror(b, b.input, "x")
        _recolor(b, out, GREEN)

    def t5(b):
        out, _ = _mirror(b, b.input, "y")
        _recolor(b, out, GREEN)

    def t6(b):
        _shift(b, b.input, 1, 0)

    def t7(b):
        _shift(b, b.input, 0, -1)

    def t8(b):
        _shift(b, b.input, 0, 1)

    def t9(b):
        out, _ = _shift(b, b.input, 1, 0)
        _mirror(b, out, "x")

    def t10(b):
        out, _ = _mirror(b, b.input, "y")
        _shift(b, out, 1, 0)

    def t11(b):
        out, _ = _mirror(b, b.input, "x")
        _shift(b, out, 0, -1)

    def t12(b):
        out, _ = _shift(b, b.input, 0, 1)
        _mirror(b, out, "x")

    def t13(b):
        out, _ = _shift(b, b.input, 0, -1)
        _mirror(b, out, "y")

    def t14(b):
        out, _ = _mirror(b, b.input, "y")
        _shift(b, out, 0, -1)

    makers = [t1, t2, t3, t4, t5, t6, t7, t8, t9, t10, t11, t12, t13, t14]
    return {f"Train{i}": _build(m) for i, m in enumerate(makers, start=1)}


def _ood_programs() -> dict[str, Program]:
    def o1(b):
        out, _ = _shift(b, b.input, 1, 0)
        _recolor(b, out, GREEN)

    def o2(b):
        out, _ = _mirror(b, b.input, "x")
        _shift(b, out, 1, 0)

    def o3(b):
        _shift(b, b.input, 1, -1)

    def o4(b):
        out, _ = _mirror(b, b.input, "y")
        _mirror(b, out, "x")

    def o5(b):
        flipped, temps = _mirror(b, b.input, "x")
        shifted, _ = _shift(b, flipped, 1, 0, purge=temps, purge_paste=True)
        _mirror(b, shifted, "y")

    def o6(b):
        recolored, temps = _recolor(b, b.input, GREEN)
        _shift(b, recolored, 1, -1, purge=temps, purge_paste=True)

    def o7(b):
        _shift(b, b.input, -1, 0)

    makers = [o1, o2, o3, o4, o5, o6, o7]
    return {f"OOD{i}": _build(m) for i, m in enumerate(makers, start=1)}


# -- task specs ---------------------------------------------------------------


@dataclass(frozen=True)
class SamplerParams:
    min_dim: int = 3
    max_dim: int = TASK_DIM_MAX
    background_density: float = 0.6


@dataclass(frozen=True)
class TaskSpec:
    id: str
    description: str
    ground_truth: Program
    sampler: SamplerParams = field(default_factory=SamplerParams)


_DESCRIPTIONS = {
    "Train1": "mirror the grid left-right",
    "Train2": "mirror the grid top-bottom",
    "Train3": "recolor every non-zero pixel to green",
    "Train4": "mirror left-right, then recolor non-zero pixels to green",
    "Train5": "mirror top-bottom, then recolor non-zero pixels to green",
    "Train6": "move all pixels one column right; the first column goes black",
    "Train7": "move all pixels one row up",
    "Train8": "move all pixels one row down",
    "Train9": "move pixels one column right, then mirror left-right",
    "Train10": "mirror top-bottom, then move pixels one column right",
    "Train11": "mirror left-right, then move pixels one row up",
    "Train12": "move pixels one row down, then mirror left-right",
    "Train13": "move pixels one row up, then mirror top-bottom",
    "Train14": "mirror top-bottom, then move pixels one row up",
    "OOD1": "move pixels one column right, then recolor non-zero pixels to green",
    "OOD2": "mirror left-right, then move pixels one column right",
    "OOD3": "move pixels one cell toward the upper-right corner",
    "OOD4": "rotate the grid 180 degrees",
    "OOD5": "mirror left-right, move pixels one column right, then mirror top-bottom",
    "OOD6": "recolor non-zero pixels to green, then move one cell up-right",
    "OOD7": "move all pixels one column left",
}


def _make_suite(programs: dict[str, Program]) -> tuple[TaskSpec, ...]:
    return tuple(
        TaskSpec(task_id, _DESCRIPTIONS[task_id], program)
        for task_id, program in programs.items()
    )


TRAIN_TASKS: tuple[TaskSpec, ...] = _make_suite(_train_programs())
OOD_TASKS: tuple[TaskSpec, ...] = _make_suite(_ood_programs())
ALL_TASKS: tuple[TaskSpec, ...] = TRAIN_TASKS + OOD_TASKS
TASKS_BY_ID = {spec.id: spec for spec in ALL_TASKS}


def oracle_suite(specs=ALL_TASKS) -> list[tuple[str, Program]]:
    return [(spec.id, spec.ground_truth) for spec in specs]


# -- instance sampling --------------------------------------------------------


@dataclass
class TaskInstance:
    demos: list[tuple[Grid, Grid]]
    tests: list[tuple[Grid, Grid]]

    def inputs(self) -> tuple[Grid, ...]:
        return tuple(g for g, _ in self.demos)

    def targets(self) -> tuple[Grid, ...]:
        return tuple(t for _, t in self.demos)


def random_grid(rng, params: SamplerParams) -> Grid:
    w = rng.randint(params.min_dim, params.max_dim)
    h = rng.randint(params.min_dim, params.max_dim)
    cells = tuple(
        0 if rng.random() < params.background_density else rng.randint(1, 9)
        for _ in range(w * h)
    )
    return Grid(cells, w, h)


def _gt_run(program: Program, inputs: tuple[Grid, ...], catalog: Catalog):
    """Targets plus every proper-prefix output of the ground truth."""
    state = ProgramState.initial(inputs)
    out_slot = 0
    prefix_outputs = []
    for step in program.steps:
        state, produced = exec_step(state, step, catalog)
        if produced is None:
            out_slot = shift_index_after_del(out_slot, step.args[0].index)
        else:
            out_slot = state.n_slots - 1
        prefix_outputs.append(state.slots[out_slot])
    return prefix_outputs[-1], prefix_outputs[:-1]


def _all_match(outputs, targets) -> bool:
    return all(
        isinstance(o, Grid) and grids_equal(o, t) for o, t in zip(outputs, targets)
    )


_PAINT_ATTRS = ("x", "y", "c")


def _depth_one_solvable(demos, catalog: Catalog) -> bool:
    """Cheap underdetermination screen over single-step grid-valued programs.

    Covers identity (input equals target is rejected earlier), crop-like
    targets, constant targets reachable by new_grid, and the one-step
    set_pixels rewrites over the coordinate/color attributes.
    """
    inputs = [g for g, _ in demos]
    targets = [t for _, t in demos]

    if all(len(set(t.cells)) == 1 for t in targets):
        return True

    def is_topleft_crop(g, t):
        if t.width > g.width or t.height > g.height:
            return False
        return all(
            t.cell(x, y) == g.cell(x, y) for y in range(t.height) for x in range(t.width)
        )

    if all(is_topleft_crop(g, t) for g, t in demos):
        return True

    for ax in _PAINT_ATTRS:
        for ay in _PAINT_ATTRS:
            for ac in _PAINT_ATTRS:
                step = InstructionStep(
                    "set_pixels",
                    (Ref(0), RefAttr(0, ax), RefAttr(0, ay), RefAttr(0, ac)),
                )
                program = Program((step,))
                try:
                    outs = run_program(program, tuple(inputs), catalog)
                except DslError:
                    continue
                if _all_match(outs, targets):
                    return True
    return False


def sample_instance(
    spec: TaskSpec,
    rng,
    n_demos: int = 3,
    n_tests: int = 1,
    params: SamplerParams | None = None,
    catalog: Catalog | None = None,
    max_attempts: int = 1000,
) -> TaskInstance:
    """Sample demo/test pairs for a task; targets come from the ground truth.

    Rejected draws: any demo whose input equals its target, demo sets a
    strict ground-truth prefix already solves, and demo sets with a
    single-step solution (both would make the instance underdetermined).
    """
    if n_demos < 1:
        raise ValueError("need at least one demonstration pair")
    params = params or spec.sampler
    catalog = catalog or default_catalog()
    for _ in range(max_attempts):
        inputs = tuple(random_grid(rng, params) for _ in range(n_demos))
        try:
            targets, prefix_outputs = _gt_run(spec.ground_truth, inputs, catalog)
        except DslError:
            continue
        demos = list(zip(inputs, targets))
        if any(grids_equal(g, t) for g, t in demos):
            continue
        if any(_all_match(outs, targets) for outs in prefix_outputs):
            continue
        if _depth_one_solvable(demos, catalog):
            continue
        tests = []
        ok = True
        for _ in range(n_tests):
            for _ in range(max_attempts):
                test_in = random_grid(rng, params)
                try:
                    test_out, _ = _gt_run(spec.ground_truth, (test_in,), catalog)
                except DslError:
                    continue
                if not grids_equal(test_in, test_out[0]):
                    tests.append((test_in, test_out[0]))
                    break
            else:
                ok = False
                break
        if not ok:
            continue
        return TaskInstance(demos, tests)
    raise SamplerExhausted(f"no acceptable instance for {spec.id} in {max_attempts} draws")


# -- training data emission ---------------------------------------------------


@dataclass(frozen=True)
class TrainingSample:
    task_id: str
    state_tokens: tuple[int, ...]
    target_tokens: tuple[int, ...]


def emit_dataset(
    specs,
    n_examples: int,
    rng,
    vocab: Vocabulary,
    catalog: Catalog | None = None,
    n_demos: int = 1,
    params: SamplerParams | None = None,
):
    """Teacher-forcing pairs: one sample per ground-truth instruction step.

    Each of the `n_examples` sampled instances contributes its whole
    decomposition: (serialized state so far, next step tokens).
    """
    specs = list(specs)
    catalog = catalog or default_catalog()
    for _ in range(n_examples):
        spec = specs[rng.randrange(len(specs))]
        instance = sample_instance(spec, rng, n_demos=n_demos, n_tests=0, params=params, catalog=catalog)
        inputs = instance.inputs()
        targets = instance.targets()
        state = ProgramState.initial(inputs)
        for step in spec.ground_truth.steps:
            yield TrainingSample(
                spec.id,
                tuple(encode_state(state, targets, vocab)),
                tuple(encode_instruction(step, vocab)),
            )
            state, _ = exec_step(state, step, catalog)


def write_dataset_line(sample: TrainingSample) -> str:
    return json.dumps(
        {
            "task": sample.task_id,
            "state_tokens": list(sample.state_tokens),
            "target_tokens": list(sample.target_tokens),
        },
        sort_keys=True,
        separators=(",", ":"),
    )


# -- task file I/O ------------------------------------------------------------


def _grid_from_json(rows, where: str) -> Grid:
    if not isinstance(rows, list) or not rows:
        raise FormatError(f"{where}: expected a non-empty list of rows")
    for y, row in enumerate(rows):
        if not isinstance(row, list) or not row:
            raise FormatError(f"{where}[{y}]: expected a non-empty row")
        for x, v in enumerate(row):
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= 9:
                raise FormatError(f"{where}[{y}][{x}]: cell {v!r} outside colors 0-9")
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise FormatError(f"{where}: ragged rows")
    if width > TASK_DIM_MAX or len(rows) > TASK_DIM_MAX:
        raise FormatError(f"{where}: grid exceeds {TASK_DIM_MAX}x{TASK_DIM_MAX}")
    return Grid.from_rows(rows)


def _pairs_from_json(entries, where: str):
    if not isinstance(entries, list):
        raise FormatError(f"{where}: expected a list of input/output pairs")
    pairs = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "input" not in entry or "output" not in entry:
            raise FormatError(f"{where}[{i}]: expected an object with input and output")
        pairs.append(
            (
                _grid_from_json(entry["input"], f"{where}[{i}].input"),
                _grid_from_json(entry["output"], f"{where}[{i}].output"),
            )
        )
    return pairs


def load_arc_task(path) -> TaskInstance:
    """Read a task in the public ARC JSON shape."""
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(data, dict) or "train" not in data:
        raise FormatError(f"{path}: expected an object with a 'train' list")
    demos = _pairs_from_json(data["train"], "train")
    if not demos:
        raise FormatError(f"{path}: need at least one training pair")
    tests = _pairs_from_json(data.get("test", []), "test")
    return TaskInstance(demos, tests)


def instance_to_arc_json(instance: TaskInstance) -> dict:
    return {
        "train": [{"input": g.rows(), "output": t.rows()} for g, t in instance.demos],
        "test": [{"input": g.rows(), "output": t.rows()} for g, t in instance.tests],
    }
