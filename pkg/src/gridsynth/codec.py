"""Token codec: instruction-step grammar and program-state serialization.

Vocabulary layout is dense and ordered: integer constants 0-9, primitives,
grid attributes, the SEP/ARGSEP/EOS controls, state-variable references,
then the structural tokens used only by state serialization. Every guidance
model (oracle, uniform, remote) consumes the same serialized state, so the
layout is written out as a versioned manifest whose hash both sides of the
wire must agree on.

Instruction grammar:  primitive SEP arg (ARGSEP arg)* EOS
with  arg := const | ref | ref attr
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from gridsynth.catalog import Catalog
from gridsynth.dsl import Const, InstructionStep, Program, ProgramState, Ref, RefAttr
from gridsynth.grid import ATTRIBUTES, Grid

MANIFEST_VERSION = "gridsynth-vocab v1"

CONTROL_NAMES = ("SEP", "ARGSEP", "EOS")
STATE_TOKEN_NAMES = (
    "EXAMPLE",
    "SLOT",
    "TARGET",
    "GRID",
    "INT",
    "BOOL",
    "ILIST",
    "BLIST",
    "ROWSEP",
    "VSEP",
    "NEG",
)

N_INT_TOKENS = 10


class ParseError(ValueError):
    """Token sequence violates the instruction grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at token {position})")
        self.position = position


class RefOverflow(ValueError):
    """Reference index outside the vocabulary's reference-token budget."""


class ManifestError(ValueError):
    """Malformed vocabulary manifest."""


class Vocabulary:
    """Token id assignment for a primitive catalog and reference budget."""

    def __init__(self, prim_names, prim_arities, ref_only, max_refs: int):
        self.prim_names = tuple(prim_names)
        self.prim_arities = dict(prim_arities)
        self.ref_only = frozenset(ref_only)
        self.max_refs = max_refs

        base = N_INT_TOKENS
        self._prim_base = base
        self._prim_to_id = {name: base + i for i, name in enumerate(self.prim_names)}
        base += len(self.prim_names)
        self._attr_base = base
        self._attr_to_id = {name: base + i for i, name in enumerate(ATTRIBUTES)}
        base += len(ATTRIBUTES)
        self.SEP = base
        self.ARGSEP = base + 1
        self.EOS = base + 2
        base += 3
        self.ref_base = base
        base += max_refs
        self.instruction_size = base
        self._state_to_id = {name: base + i for i, name in enumerate(STATE_TOKEN_NAMES)}
        for name, tok in self._state_to_id.items():
            setattr(self, name, tok)
        self.size = base + len(STATE_TOKEN_NAMES)

        self._names = [str(i) for i in range(N_INT_TOKENS)]
        self._names += list(self.prim_names)
        self._names += [f".{a}" for a in ATTRIBUTES]
        self._names += list(CONTROL_NAMES)
        self._names += [f"N{i}" for i in range(max_refs)]
        self._names += list(STATE_TOKEN_NAMES)

    @classmethod
    def from_catalog(cls, catalog: Catalog, max_refs: int = 10) -> "Vocabulary":
        return cls(
            catalog.names(),
            {p.name: p.arity for p in catalog.primitives},
            {p.name for p in catalog.primitives if p.ref_only_args},
            max_refs,
        )

    def prim_id(self, name: str) -> int:
        return self._prim_to_id[name]

    def attr_id(self, name: str) -> int:
        return self._attr_to_id[name]

    def ref_id(self, index: int) -> int:
        if not 0 <= index < self.max_refs:
            raise RefOverflow(f"reference N{index} outside budget of {self.max_refs}")
        return self.ref_base + index

    def is_int(self, tok: int) -> bool:
        return 0 <= tok < N_INT_TOKENS

    def is_prim(self, tok: int) -> bool:
        return self._prim_base <= tok < self._prim_base + len(self.prim_names)

    def is_attr(self, tok: int) -> bool:
        return self._attr_base <= tok < self._attr_base + len(ATTRIBUTES)

    def is_ref(self, tok: int) -> bool:
        return self.ref_base <= tok < self.ref_base + self.max_refs

    def prim_name(self, tok: int) -> str:
        return self.prim_names[tok - self._prim_base]

    def attr_name(self, tok: int) -> str:
        return ATTRIBUTES[tok - self._attr_base]

    def ref_index(self, tok: int) -> int:
        return tok - self.ref_base

    def token_name(self, tok: int) -> str:
        if 0 <= tok < self.size:
            return self._names[tok]
        return f"<bad:{tok}>"

    def prim_ids(self) -> list[int]:
        return list(range(self._prim_base, self._prim_base + len(self.prim_names)))

    def attr_ids(self) -> list[int]:
        return list(range(self._attr_base, self._attr_base + len(ATTRIBUTES)))

    # -- manifest ----------------------------------------------------------

    def manifest(self) -> str:
        lines = [
            MANIFEST_VERSION,
            "primitives: " + " ".join(f"{n}/{self.prim_arities[n]}" for n in self.prim_names),
            "ref_only: " + " ".join(sorted(self.ref_only)),
            "attributes: " + " ".join(ATTRIBUTES),
            "control: " + " ".join(CONTROL_NAMES),
            f"ref_base: {self.ref_base}",
            f"max_refs: {self.max_refs}",
            "state_tokens: " + " ".join(STATE_TOKEN_NAMES),
            f"size: {self.size}",
        ]
        return "\n".join(lines) + "\n"

    def manifest_hash(self) -> str:
        return hashlib.sha256(self.manifest().encode("utf-8")).hexdigest()

    @classmethod
    def from_manifest(cls, text: str) -> "Vocabulary":
        fields = {}
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != MANIFEST_VERSION:
            raise ManifestError(f"expected manifest header {MANIFEST_VERSION!r}")
        for line in lines[1:]:
            key, _, value = line.partition(":")
            fields[key.strip()] = value.strip()
        try:
            prim_names = []
            arities = {}
            for entry in fields["primitives"].split():
                name, _, arity = entry.partition("/")
                prim_names.append(name)
                arities[name] = int(arity)
            ref_only = set(fields.get("ref_only", "").split())
            max_refs = int(fields["max_refs"])
        except (KeyError, ValueError) as e:
            raise ManifestError(f"bad manifest field: {e}") from None
        vocab = cls(prim_names, arities, ref_only, max_refs)
        for key, expected in (
            ("attributes", " ".join(ATTRIBUTES)),
            ("control", " ".join(CONTROL_NAMES)),
            ("state_tokens", " ".join(STATE_TOKEN_NAMES)),
            ("ref_base", str(vocab.ref_base)),
            ("size", str(vocab.size)),
        ):
            if key in fields and fields[key] != expected:
                raise ManifestError(f"manifest field {key!r} does not match this layout")
        return vocab


# -- instruction encoding ---------------------------------------------------


def encode_instruction(step: InstructionStep, vocab: Vocabulary) -> list[int]:
    try:
        tokens = [vocab.prim_id(step.primitive)]
    except KeyError:
        raise ValueError(f"unknown primitive {step.primitive!r}") from None
    tokens.append(vocab.SEP)
    for i, arg in enumerate(step.args):
        if i:
            tokens.append(vocab.ARGSEP)
        if isinstance(arg, Const):
            if not 0 <= arg.value < N_INT_TOKENS:
                raise ValueError(f"constant {arg.value} outside the 0-9 token range")
            tokens.append(arg.value)
        elif isinstance(arg, Ref):
            tokens.append(vocab.ref_id(arg.index))
        else:
            tokens.append(vocab.ref_id(arg.index))
            tokens.append(vocab.attr_id(arg.attr))
    tokens.append(vocab.EOS)
    return tokens


_EXPECT_HEAD = 0
_EXPECT_SEP = 1
_EXPECT_ARG = 2
_AFTER_REF = 3
_AFTER_ARG = 4
_DONE = 5


class _GrammarWalk:
    """Incremental walk of the instruction grammar; shared by the decoder
    and by legal-next-token queries."""

    def __init__(self, vocab: Vocabulary, n_slots: int):
        self.vocab = vocab
        self.n_slots = n_slots
        self.state = _EXPECT_HEAD
        self.prim = None
        self.arity = 0
        self.ref_only = False
        self.args_done = 0

    def legal(self) -> list[int]:
        v = self.vocab
        if self.state == _EXPECT_HEAD:
            return v.prim_ids()
        if self.state == _EXPECT_SEP:
            return [v.SEP]
        if self.state == _EXPECT_ARG:
            refs = [v.ref_base + i for i in range(min(self.n_slots, v.max_refs))]
            if self.ref_only:
                return refs
            return list(range(N_INT_TOKENS)) + refs
        if self.state == _AFTER_REF:
            out = [] if self.ref_only else v.attr_ids()
            out.append(v.ARGSEP if self.args_done + 1 < self.arity else v.EOS)
            return out
        if self.state == _AFTER_ARG:
            return [v.ARGSEP if self.args_done < self.arity else v.EOS]
        return []

    def advance(self, tok: int, pos: int) -> None:
        v = self.vocab
        if tok not in self.legal():
            raise ParseError(f"unexpected token {v.token_name(tok)}", pos)
        if self.state == _EXPECT_HEAD:
            self.prim = v.prim_name(tok)
            self.arity = v.prim_arities[self.prim]
            self.ref_only = self.prim in v.ref_only
            self.state = _EXPECT_SEP
        elif self.state == _EXPECT_SEP:
            self.state = _EXPECT_ARG if self.arity else _AFTER_ARG
        elif self.state == _EXPECT_ARG:
            self.state = _AFTER_REF if v.is_ref(tok) else _AFTER_ARG
            if not v.is_ref(tok):
                self.args_done += 1
        elif self.state == _AFTER_REF:
            if v.is_attr(tok):
                self.args_done += 1
                self.state = _AFTER_ARG
            elif tok == v.ARGSEP:
                self.args_done += 1
                self.state = _EXPECT_ARG
            else:  # EOS closes the bare-ref argument
                self.args_done += 1
                self.state = _DONE
        elif self.state == _AFTER_ARG:
            self.state = _EXPECT_ARG if tok == v.ARGSEP else _DONE


def legal_next_tokens(prefix: list[int], vocab: Vocabulary, n_slots: int) -> list[int]:
    """Grammar-legal continuations of a (valid) instruction prefix."""
    walk = _GrammarWalk(vocab, n_slots)
    for pos, tok in enumerate(prefix):
        walk.advance(tok, pos)
    return walk.legal()


def decode_instruction(tokens: list[int], vocab: Vocabulary, n_slots: int | None = None) -> InstructionStep:
    """Parse one EOS-terminated instruction; ParseError carries the offset.

    When n_slots is given, references are additionally bounded by the live
    state size rather than only by the vocabulary budget.
    """
    bound = n_slots if n_slots is not None else vocab.max_refs
    walk = _GrammarWalk(vocab, bound)
    args: list = []
    pending_ref: int | None = None
    for pos, tok in enumerate(tokens):
        if walk.state == _DONE:
            raise ParseError("trailing tokens after EOS", pos)
        walk.advance(tok, pos)
        if vocab.is_int(tok) and walk.state == _AFTER_ARG:
            args.append(Const(tok))
        elif vocab.is_ref(tok):
            pending_ref = vocab.ref_index(tok)
        elif vocab.is_attr(tok):
            args.append(RefAttr(pending_ref, vocab.attr_name(tok)))
            pending_ref = None
        elif tok in (vocab.ARGSEP, vocab.EOS) and pending_ref is not None:
            args.append(Ref(pending_ref))
            pending_ref = None
    if walk.state != _DONE:
        raise ParseError("truncated instruction (missing EOS)", len(tokens))
    return InstructionStep(walk.prim, tuple(args))


def encode_program(program: Program, vocab: Vocabulary) -> list[int]:
    out: list[int] = []
    for step in program.steps:
        out.extend(encode_instruction(step, vocab))
    return out


def decode_program(tokens: list[int], vocab: Vocabulary) -> Program:
    steps = []
    start = 0
    for pos, tok in enumerate(tokens):
        if tok == vocab.EOS:
            steps.append(decode_instruction(tokens[start : pos + 1], vocab))
            start = pos + 1
    if start != len(tokens):
        raise ParseError("trailing tokens after last instruction", start)
    return Program(tuple(steps))


# -- state serialization ------------------------------------------------------


def _digits(n: int, out: list[int]) -> None:
    if n < 0:
        raise ValueError("digits of a negative number")
    if n < 10:
        out.append(n)
        return
    stack = []
    while n:
        stack.append(n % 10)
        n //= 10
    out.extend(reversed(stack))


def _encode_int(v: int, vocab: Vocabulary, out: list[int]) -> None:
    if v < 0:
        out.append(vocab.NEG)
        v = -v
    _digits(v, out)


def _encode_grid(g: Grid, vocab: Vocabulary, out: list[int]) -> None:
    out.append(vocab.GRID)
    _digits(g.width, out)
    out.append(vocab.VSEP)
    _digits(g.height, out)
    out.append(vocab.VSEP)
    _digits(g.ul_x, out)
    out.append(vocab.VSEP)
    _digits(g.ul_y, out)
    for y in range(g.height):
        out.append(vocab.ROWSEP)
        out.extend(g.cells[y * g.width : (y + 1) * g.width])


def _encode_value(v, vocab: Vocabulary, out: list[int]) -> None:
    if isinstance(v, Grid):
        _encode_grid(v, vocab, out)
    elif isinstance(v, bool):
        out.append(vocab.BOOL)
        out.append(1 if v else 0)
    elif isinstance(v, int):
        out.append(vocab.INT)
        _encode_int(v, vocab, out)
    elif isinstance(v, list):
        is_bool = bool(v) and isinstance(v[0], bool)
        out.append(vocab.BLIST if is_bool else vocab.ILIST)
        _digits(len(v), out)
        for item in v:
            out.append(vocab.VSEP)
            if is_bool:
                out.append(1 if item else 0)
            else:
                _encode_int(item, vocab, out)
    else:
        raise ValueError(f"cannot serialize value of type {type(v).__name__}")


def encode_state(state: ProgramState, targets: tuple[Grid, ...], vocab: Vocabulary) -> list[int]:
    """Canonical serialization fed to every guidance model.

    Per example: the input slot block, each intermediate slot block in
    order, then the target grid block. Deterministic by construction.
    """
    out: list[int] = []
    for i in range(state.n_examples):
        out.append(vocab.EXAMPLE)
        for slot in state.slots:
            out.append(vocab.SLOT)
            _encode_value(slot[i], vocab, out)
        out.append(vocab.TARGET)
        _encode_grid(targets[i], vocab, out)
    return out


@dataclass
class DecodedState:
    """Per-example slot values plus targets, recovered from state tokens."""

    slots: list[list]  # [example][slot]
    targets: list[Grid]

    @property
    def n_slots(self) -> int:
        return len(self.slots[0]) if self.slots else 0

    def inputs(self) -> tuple[Grid, ...]:
        return tuple(example[0] for example in self.slots)

    def to_program_state(self) -> ProgramState:
        n = self.n_slots
        return ProgramState(tuple(tuple(ex[j] for ex in self.slots) for j in range(n)))


class _StateReader:
    def __init__(self, tokens: list[int], vocab: Vocabulary):
        self.tokens = tokens
        self.vocab = vocab
        self.pos = 0

    def error(self, message: str):
        raise ParseError(message, self.pos)

    def peek(self) -> int | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> int:
        if self.pos >= len(self.tokens):
            self.error("unexpected end of state tokens")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, tok: int, what: str) -> None:
        if self.take() != tok:
            self.pos -= 1
            self.error(f"expected {what}")

    def number(self) -> int:
        digits = []
        while self.peek() is not None and self.vocab.is_int(self.peek()):
            digits.append(self.take())
        if not digits:
            self.error("expected digits")
        value = 0
        for d in digits:
            value = value * 10 + d
        return value

    def signed(self) -> int:
        if self.peek() == self.vocab.NEG:
            self.take()
            return -self.number()
        return self.number()

    def grid(self) -> Grid:
        v = self.vocab
        self.expect(v.GRID, "GRID")
        width = self.number()
        self.expect(v.VSEP, "VSEP")
        height = self.number()
        self.expect(v.VSEP, "VSEP")
        ul_x = self.number()
        self.expect(v.VSEP, "VSEP")
        ul_y = self.number()
        cells = []
        for _ in range(height):
            self.expect(v.ROWSEP, "ROWSEP")
            for _ in range(width):
                tok = self.take()
                if not v.is_int(tok):
                    self.pos -= 1
                    self.error("expected a cell color 0-9")
                cells.append(tok)
        return Grid(tuple(cells), width, height, ul_x, ul_y)

    def value(self):
        v = self.vocab
        head = self.peek()
        if head == v.GRID:
            return self.grid()
        if head == v.INT:
            self.take()
            return self.signed()
        if head == v.BOOL:
            self.take()
            bit = self.take()
            if bit not in (0, 1):
                self.pos -= 1
                self.error("expected a 0/1 boolean")
            return bool(bit)
        if head in (v.ILIST, v.BLIST):
            is_bool = head == v.BLIST
            self.take()
            length = self.number()
            items = []
            for _ in range(length):
                self.expect(v.VSEP, "VSEP")
                if is_bool:
                    bit = self.take()
                    if bit not in (0, 1):
                        self.pos -= 1
                        self.error("expected a 0/1 boolean")
                    items.append(bool(bit))
                else:
                    items.append(self.signed())
            return items
        self.error("expected a value block")


def decode_state(tokens: list[int], vocab: Vocabulary) -> DecodedState:
    reader = _StateReader(tokens, vocab)
    slots: list[list] = []
    targets: list[Grid] = []
    while reader.peek() is not None:
        reader.expect(vocab.EXAMPLE, "EXAMPLE")
        example: list = []
        while reader.peek() == vocab.SLOT:
            reader.take()
            example.append(reader.value())
        reader.expect(vocab.TARGET, "TARGET")
        targets.append(reader.grid())
        slots.append(example)
    if not slots:
        raise ParseError("empty state token sequence", 0)
    n = len(slots[0])
    if any(len(ex) != n for ex in slots):
        raise ParseError("examples disagree on slot count", len(tokens))
    return DecodedState(slots, targets)


def state_slot_count(tokens: list[int], vocab: Vocabulary) -> int:
    """Number of live slots, from the first example's block markers."""
    count = 0
    for tok in tokens:
        if tok == vocab.SLOT:
            count += 1
        elif tok == vocab.TARGET:
            break
    return count
