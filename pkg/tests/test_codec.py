import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridsynth.codec import (
    ManifestError,
    ParseError,
    RefOverflow,
    Vocabulary,
    decode_instruction,
    decode_program,
    decode_state,
    encode_instruction,
    encode_program,
    encode_state,
    legal_next_tokens,
    state_slot_count,
)
from gridsynth.dsl import InstructionStep, Ref, ProgramState, exec_step, parse_program
from gridsynth.grid import Grid

from conftest import random_grid_rows, random_structural_step


def toks(vocab, *names):
    """Readable token-sequence builder: ints stay ints, names resolve."""
    out = []
    for name in names:
        if isinstance(name, int):
            out.append(name)
        elif name in ("SEP", "ARGSEP", "EOS"):
            out.append(getattr(vocab, name))
        elif name.startswith("."):
            out.append(vocab.attr_id(name[1:]))
        elif name.startswith("N"):
            out.append(vocab.ref_id(int(name[1:])))
        else:
            out.append(vocab.prim_id(name))
    return out


class TestInstructionCodec:
    def test_encode_mask_step(self, catalog, vocab):
        step = parse_program("equal(N0.c, 0)", catalog).steps[0]
        assert encode_instruction(step, vocab) == toks(
            vocab, "equal", "SEP", "N0", ".c", "ARGSEP", 0, "EOS"
        )

    def test_encode_del_step(self, catalog, vocab):
        step = parse_program("del(N1)", catalog).steps[0]
        assert encode_instruction(step, vocab) == toks(vocab, "del", "SEP", "N1", "EOS")

    def test_decode_switch_step(self, catalog, vocab):
        seq = toks(vocab, "switch", "SEP", "N1", "ARGSEP", 0, "ARGSEP", 2, "EOS")
        assert decode_instruction(seq, vocab) == parse_program("switch(N1, 0, 2)", catalog).steps[0]

    def test_ref_overflow(self, vocab):
        with pytest.raises(RefOverflow):
            encode_instruction(InstructionStep("identity", (Ref(vocab.max_refs),)), vocab)

    @settings(max_examples=200)
    @given(seed=st.integers(0, 10**9))
    def test_round_trip_random_steps(self, vocab, catalog, seed):
        rng = random.Random(seed)
        step = random_structural_step(rng, catalog, n_slots=rng.randint(1, vocab.max_refs))
        assert decode_instruction(encode_instruction(step, vocab), vocab) == step

    def test_parse_error_positions(self, vocab):
        with pytest.raises(ParseError) as e:
            decode_instruction([vocab.SEP], vocab)
        assert e.value.position == 0
        with pytest.raises(ParseError):
            decode_instruction(toks(vocab, "equal", "SEP", ".c", "EOS"), vocab)
        with pytest.raises(ParseError):
            decode_instruction(toks(vocab, "equal", "SEP", 0, "ARGSEP", 1), vocab)
        with pytest.raises(ParseError):
            decode_instruction(toks(vocab, "equal", "SEP", 0, "ARGSEP", "EOS"), vocab)
        with pytest.raises(ParseError):
            decode_instruction(toks(vocab, "equal", "SEP", 0, "ARGSEP", 1, "EOS", "EOS"), vocab)
        with pytest.raises(ParseError):
            decode_instruction([], vocab)

    def test_del_only_accepts_bare_refs(self, vocab):
        with pytest.raises(ParseError):
            decode_instruction(toks(vocab, "del", "SEP", 3, "EOS"), vocab)
        with pytest.raises(ParseError):
            decode_instruction(toks(vocab, "del", "SEP", "N0", ".x", "EOS"), vocab)

    def test_state_length_bounds_references(self, vocab):
        seq = toks(vocab, "identity", "SEP", "N3", "EOS")
        assert decode_instruction(seq, vocab, n_slots=4).args[0] == Ref(3)
        with pytest.raises(ParseError):
            decode_instruction(seq, vocab, n_slots=2)

    @settings(max_examples=200)
    @given(seed=st.integers(0, 10**9))
    def test_no_silent_acceptance(self, vocab, catalog, seed):
        """A mutated sequence either fails to parse or re-encodes to itself."""
        rng = random.Random(seed)
        step = random_structural_step(rng, catalog, n_slots=vocab.max_refs)
        seq = encode_instruction(step, vocab)
        pos = rng.randrange(len(seq))
        seq[pos] = rng.randrange(vocab.size)
        try:
            decoded = decode_instruction(seq, vocab)
        except ParseError:
            return
        assert encode_instruction(decoded, vocab) == seq

    @settings(max_examples=150)
    @given(seed=st.integers(0, 10**9))
    def test_prefix_property(self, vocab, catalog, seed):
        """No valid sequence is a proper prefix of another valid sequence."""
        rng = random.Random(seed)
        a = encode_instruction(random_structural_step(rng, catalog, 4), vocab)
        b = encode_instruction(random_structural_step(rng, catalog, 4), vocab)
        if len(a) < len(b):
            assert b[: len(a)] != a
        elif len(b) < len(a):
            assert a[: len(b)] != b

    def test_program_codec_round_trip(self, catalog, vocab, recolor_to_2):
        tokens = encode_program(recolor_to_2, vocab)
        assert decode_program(tokens, vocab) == recolor_to_2
        with pytest.raises(ParseError):
            decode_program(tokens + [vocab.prim_id("identity")], vocab)


class TestLegalNextTokens:
    def test_start_allows_primitives_only(self, vocab):
        legal = legal_next_tokens([], vocab, n_slots=1)
        assert set(legal) == set(vocab.prim_ids())

    def test_after_primitive_only_sep(self, vocab):
        assert legal_next_tokens([vocab.prim_id("equal")], vocab, 1) == [vocab.SEP]

    def test_arg_position_respects_state_size(self, vocab):
        legal = legal_next_tokens(toks(vocab, "equal", "SEP"), vocab, n_slots=2)
        refs = [t for t in legal if vocab.is_ref(t)]
        assert len(refs) == 2
        assert all(vocab.ref_index(t) < 2 for t in refs)

    def test_after_bare_ref_attrs_or_argsep(self, vocab):
        legal = legal_next_tokens(toks(vocab, "equal", "SEP", "N0"), vocab, 1)
        assert set(legal) == set(vocab.attr_ids()) | {vocab.ARGSEP}

    def test_final_arg_closes_with_eos(self, vocab):
        legal = legal_next_tokens(toks(vocab, "equal", "SEP", 0, "ARGSEP", "N0"), vocab, 1)
        assert set(legal) == set(vocab.attr_ids()) | {vocab.EOS}

    def test_complete_instruction_has_no_continuations(self, vocab):
        assert legal_next_tokens(toks(vocab, "del", "SEP", "N0", "EOS"), vocab, 1) == []


class TestStateCodec:
    def test_smallest_grid_layout(self, vocab):
        state = ProgramState.initial((Grid.from_rows([[3]]),))
        target = Grid.from_rows([[5]])
        tokens = encode_state(state, (target,), vocab)
        assert tokens == [
            vocab.EXAMPLE,
            vocab.SLOT,
            vocab.GRID, 1, vocab.VSEP, 1, vocab.VSEP, 0, vocab.VSEP, 0, vocab.ROWSEP, 3,
            vocab.TARGET,
            vocab.GRID, 1, vocab.VSEP, 1, vocab.VSEP, 0, vocab.VSEP, 0, vocab.ROWSEP, 5,
        ]

    def test_determinism(self, vocab, catalog, recolor_to_2):
        g = Grid.from_rows([[0, 7], [1, 0]])
        state = ProgramState.initial((g,))
        target = Grid.from_rows([[0, 2], [2, 0]])
        a = encode_state(state, (target,), vocab)
        b = encode_state(state, (target,), vocab)
        assert a == b

    def test_del_removes_a_slot_block(self, vocab, catalog, recolor_to_2):
        g = Grid.from_rows([[0, 1], [3, 0]])
        target = Grid.from_rows([[0, 2], [2, 0]])
        state = ProgramState.initial((g,))
        counts = []
        for step in recolor_to_2.steps[:3]:
            state, _ = exec_step(state, step, catalog)
            counts.append(state_slot_count(encode_state(state, (target,), vocab), vocab))
        assert counts == [2, 3, 2]

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10**9))
    def test_state_round_trip(self, vocab, catalog, seed):
        rng = random.Random(seed)
        n_examples = rng.randint(1, 3)
        inputs = tuple(
            Grid.from_rows(random_grid_rows(rng, max_dim=5)) for _ in range(n_examples)
        )
        targets = tuple(
            Grid.from_rows(random_grid_rows(rng, max_dim=5)) for _ in range(n_examples)
        )
        state = ProgramState.initial(inputs)
        for _ in range(rng.randint(0, 4)):
            step = random_structural_step(rng, catalog, state.n_slots, allow_del=False)
            try:
                state, _ = exec_step(state, step, catalog)
            except Exception:
                continue
        tokens = encode_state(state, targets, vocab)
        decoded = decode_state(tokens, vocab)
        assert decoded.to_program_state() == state
        assert tuple(decoded.targets) == targets
        assert decoded.inputs() == inputs
        assert state_slot_count(tokens, vocab) == state.n_slots


class TestVocabulary:
    def test_layout_order(self, vocab):
        assert vocab.prim_id(vocab.prim_names[0]) == 10
        assert vocab.attr_id("x") == 10 + len(vocab.prim_names)
        assert vocab.SEP == vocab.attr_id("ul_y") + 1
        assert vocab.ref_base == vocab.EOS + 1
        assert vocab.instruction_size == vocab.ref_base + vocab.max_refs

    def test_density(self, vocab):
        names = {vocab.token_name(t) for t in range(vocab.size)}
        assert len(names) == vocab.size  # every id maps to a distinct name

    def test_manifest_round_trip(self, vocab):
        text = vocab.manifest()
        again = Vocabulary.from_manifest(text)
        assert again.manifest() == text
        assert again.manifest_hash() == vocab.manifest_hash()
        assert again.prim_arities == vocab.prim_arities

    def test_manifest_rejects_garbage(self):
        with pytest.raises(ManifestError):
            Vocabulary.from_manifest("not a manifest")
