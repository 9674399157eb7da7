"""Instruction-step DSL: arguments, programs, state, and execution.

A program is a straight-line sequence of instruction steps. Each non-del
step applies one primitive to every demonstration example independently
(broadcast) and appends exactly one new state slot; `del` removes a slot
and renumbers every higher reference down by one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from gridsynth.catalog import DEL, Catalog, PrimitiveSpec
from gridsynth.errors import ArityMismatch, BadRef, ExecError, NonGridResult, TypeMismatch
from gridsynth.grid import ATTRIBUTES, Grid, attr_raw

MAX_REFS_DEFAULT = 10


@dataclass(frozen=True)
class Const:
    value: int  # 0-9; the only literals the token grammar can spell

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Ref:
    index: int

    def __str__(self):
        return f"N{self.index}"


@dataclass(frozen=True)
class RefAttr:
    index: int
    attr: str

    def __str__(self):
        return f"N{self.index}.{self.attr}"


Arg = Const | Ref | RefAttr


@dataclass(frozen=True)
class InstructionStep:
    primitive: str
    args: tuple[Arg, ...]

    def __str__(self):
        return f"{self.primitive}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class Program:
    steps: tuple[InstructionStep, ...]

    def __len__(self):
        return len(self.steps)

    def __str__(self):
        return format_program(self)


@dataclass(frozen=True)
class ProgramState:
    """Ordered live variables; each slot holds one value per example."""

    slots: tuple[tuple, ...]

    @classmethod
    def initial(cls, inputs: tuple) -> "ProgramState":
        return cls((tuple(inputs),))

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    @property
    def n_examples(self) -> int:
        return len(self.slots[0]) if self.slots else 0


class ProgramTextError(ValueError):
    """Malformed program text."""


def validate_step(step: InstructionStep, catalog: Catalog, n_slots: int, max_refs: int) -> PrimitiveSpec:
    if step.primitive not in catalog:
        raise TypeMismatch(f"unknown primitive {step.primitive!r}")
    spec = catalog.get(step.primitive)
    if len(step.args) != spec.arity:
        raise ArityMismatch(
            f"{spec.name} takes {spec.arity} argument(s), got {len(step.args)}"
        )
    for arg in step.args:
        if isinstance(arg, (Ref, RefAttr)):
            if spec.ref_only_args and not isinstance(arg, Ref):
                raise TypeMismatch(f"{spec.name} only accepts plain references")
            if isinstance(arg, RefAttr) and arg.attr not in ATTRIBUTES:
                raise TypeMismatch(f"unknown attribute .{arg.attr}")
            if arg.index >= max_refs:
                raise BadRef(f"reference N{arg.index} outside the {max_refs}-slot budget")
            if not 0 <= arg.index < n_slots:
                raise BadRef(f"reference N{arg.index} outside state of {n_slots} slot(s)")
        else:
            if spec.ref_only_args:
                raise TypeMismatch(f"{spec.name} only accepts plain references")
            if not 0 <= arg.value <= 9:
                raise TypeMismatch(f"constant {arg.value} outside the 0-9 token range")
    return spec


def _resolve(arg: Arg, state: ProgramState, example: int):
    if isinstance(arg, Const):
        return arg.value
    value = state.slots[arg.index][example]
    if isinstance(arg, RefAttr):
        if not isinstance(value, Grid):
            raise TypeMismatch(f"attribute .{arg.attr} on non-grid slot N{arg.index}")
        return attr_raw(value, arg.attr)
    return value


def exec_step(
    state: ProgramState,
    step: InstructionStep,
    catalog: Catalog,
    max_refs: int = MAX_REFS_DEFAULT,
):
    """Run one step on all examples.

    Returns (new_state, slot) where slot is the freshly appended value tuple,
    or (new_state, None) for del. Raises a DslError subclass on any failure.
    """
    spec = validate_step(step, catalog, state.n_slots, max_refs)

    if spec.name == DEL:
        k = step.args[0].index
        slots = state.slots[:k] + state.slots[k + 1 :]
        return ProgramState(slots), None

    if state.n_slots >= max_refs:
        raise ExecError(f"state already holds the maximum of {max_refs} slots")

    out = []
    for i in range(state.n_examples):
        values = [_resolve(a, state, i) for a in step.args]
        out.append(spec.impl(*values))
    slot = tuple(out)
    return ProgramState(state.slots + (slot,)), slot


def shift_index_after_del(index: int, deleted: int) -> int | None:
    """Where a slot index lands after `del deleted`; None if it was deleted."""
    if index == deleted:
        return None
    return index - 1 if index > deleted else index


def run_program(
    program: Program,
    inputs: tuple[Grid, ...],
    catalog: Catalog,
    max_refs: int = MAX_REFS_DEFAULT,
) -> tuple[Grid, ...]:
    """Execute all steps from a fresh state; the answer is the output slot of
    the last non-del step (the inputs themselves for an empty program)."""
    state = ProgramState.initial(inputs)
    out_slot = 0
    for step in program.steps:
        state, produced = exec_step(state, step, catalog, max_refs)
        if produced is None:
            shifted = shift_index_after_del(out_slot, step.args[0].index)
            if shifted is None:
                raise ExecError("program deleted its own result slot")
            out_slot = shifted
        else:
            out_slot = state.n_slots - 1
    result = state.slots[out_slot]
    for v in result:
        if not isinstance(v, Grid):
            raise NonGridResult(f"program result is {type(v).__name__}, not a grid")
    return result


def eliminate_dels(program: Program) -> Program:
    """Equivalent del-free program: drop dels, rewrite later references.

    Sound because del only renumbers; it never changes any slot value.
    """
    # current state position -> slot position in the del-free program
    mapping = [0]
    next_index = 1
    steps = []
    for step in program.steps:
        if step.primitive == DEL:
            k = step.args[0].index
            if not 0 <= k < len(mapping):
                raise BadRef(f"del of N{k} outside state of {len(mapping)} slot(s)")
            mapping.pop(k)
            continue
        args = []
        for arg in step.args:
            if isinstance(arg, Ref):
                args.append(Ref(mapping[arg.index]))
            elif isinstance(arg, RefAttr):
                args.append(RefAttr(mapping[arg.index], arg.attr))
            else:
                args.append(arg)
        steps.append(InstructionStep(step.primitive, tuple(args)))
        mapping.append(next_index)
        next_index += 1
    return Program(tuple(steps))


_ARG_RE = re.compile(r"^(?:(?P<const>-?\d+)|N(?P<ref>\d+)(?:\.(?P<attr>[a-z_]+))?)$")
_LINE_RE = re.compile(r"^(?P<name>[A-Za-z_][A-Za-z0-9_]*)\((?P<args>.*)\)$")


def _parse_arg(text: str, where: str) -> Arg:
    m = _ARG_RE.match(text)
    if not m:
        raise ProgramTextError(f"{where}: bad argument {text!r}")
    if m.group("const") is not None:
        value = int(m.group("const"))
        if not 0 <= value <= 9:
            raise ProgramTextError(f"{where}: constant {value} outside 0-9")
        return Const(value)
    index = int(m.group("ref"))
    attr_name = m.group("attr")
    if attr_name is None:
        return Ref(index)
    if attr_name not in ATTRIBUTES:
        raise ProgramTextError(f"{where}: unknown attribute .{attr_name}")
    return RefAttr(index, attr_name)


def parse_program(text: str, catalog: Catalog) -> Program:
    """Parse the one-instruction-per-line text form, e.g. `equal(N0.c, 0)`."""
    steps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        where = f"line {lineno}"
        m = _LINE_RE.match(line)
        if not m:
            raise ProgramTextError(f"{where}: expected primitive(arg, ...), got {line!r}")
        name = m.group("name")
        if name not in catalog:
            raise ProgramTextError(f"{where}: unknown primitive {name!r}")
        arg_text = m.group("args").strip()
        args = ()
        if arg_text:
            args = tuple(_parse_arg(a.strip(), where) for a in arg_text.split(","))
        spec = catalog.get(name)
        if len(args) != spec.arity:
            raise ProgramTextError(
                f"{where}: {name} takes {spec.arity} argument(s), got {len(args)}"
            )
        if spec.ref_only_args and any(not isinstance(a, Ref) for a in args):
            raise ProgramTextError(f"{where}: {name} only accepts plain references")
        steps.append(InstructionStep(name, args))
    return Program(tuple(steps))


def format_program(program: Program) -> str:
    return "\n".join(str(step) for step in program.steps)
