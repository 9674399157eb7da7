import math
import random

import pytest

from gridsynth.codec import decode_instruction, encode_instruction, encode_state, legal_next_tokens
from gridsynth.dsl import ProgramState, exec_step, parse_program
from gridsynth.grid import Grid
from gridsynth.guidance import (
    GuidanceContext,
    NoisyOracleModel,
    OracleModel,
    UniformModel,
    build_oracle,
    enumerate_steps,
)
from gridsynth.tasks import ALL_TASKS, TASKS_BY_ID, oracle_suite, sample_instance


def root_ctx(instance, vocab):
    state = ProgramState.initial(instance.inputs())
    return GuidanceContext(tuple(encode_state(state, instance.targets(), vocab)))


@pytest.fixture(scope="module")
def flip_instance(catalog):
    return sample_instance(TASKS_BY_ID["Train1"], random.Random(0), n_demos=3)


@pytest.fixture()
def oracle(vocab, catalog):
    return build_oracle(oracle_suite(), vocab, catalog)


class TestUniformModel:
    def test_uniform_over_legal(self, vocab, flip_instance):
        model = UniformModel(vocab)
        ctx = root_ctx(flip_instance, vocab)
        dist = model.next_token_dist(ctx)
        legal = legal_next_tokens([], vocab, 1)
        assert set(dist) == set(legal)
        assert all(abs(p - 1 / len(legal)) < 1e-12 for p in dist.values())

    def test_distribution_sums_to_one(self, vocab, flip_instance):
        model = UniformModel(vocab)
        ctx = GuidanceContext(root_ctx(flip_instance, vocab).state_tokens, (vocab.prim_id("equal"),))
        assert abs(sum(model.next_token_dist(ctx).values()) - 1.0) < 1e-9


class TestOracle:
    def test_point_mass_on_ground_truth_path(self, vocab, catalog, oracle, flip_instance):
        ctx = root_ctx(flip_instance, vocab)
        gt = TASKS_BY_ID["Train1"].ground_truth
        expected = encode_instruction(gt.steps[0], vocab)
        for i, tok in enumerate(expected):
            dist = oracle.next_token_dist(
                GuidanceContext(ctx.state_tokens, tuple(expected[:i]))
            )
            assert dist == {tok: 1.0}

    def test_off_path_falls_back_to_uniform(self, vocab, catalog, oracle, flip_instance):
        state = ProgramState.initial(flip_instance.inputs())
        state, _ = exec_step(state, parse_program("identity(N0)", catalog).steps[0], catalog)
        tokens = tuple(encode_state(state, flip_instance.targets(), vocab))
        dist = oracle.next_token_dist(GuidanceContext(tokens))
        legal = legal_next_tokens([], vocab, 2)
        assert set(dist) == set(legal)
        assert all(abs(p - 1 / len(legal)) < 1e-12 for p in dist.values())

    def test_empty_suite_is_uniform_everywhere(self, vocab, catalog, flip_instance):
        model = OracleModel(vocab, catalog, [])
        ctx = root_ctx(flip_instance, vocab)
        legal = legal_next_tokens([], vocab, 1)
        assert set(model.next_token_dist(ctx)) == set(legal)

    def test_oracle_reconstructs_every_ground_truth_step_by_step(self, vocab, catalog, oracle):
        rng = random.Random(42)
        for spec in ALL_TASKS:
            instance = sample_instance(spec, rng, n_demos=3)
            targets = instance.targets()
            state = ProgramState.initial(instance.inputs())
            for step in spec.ground_truth.steps:
                tokens = tuple(encode_state(state, targets, vocab))
                enum = enumerate_steps(oracle, GuidanceContext(tokens), floor=0.0)
                assert len(enum.candidates) == 1, spec.id
                got = decode_instruction(list(enum.candidates[0].tokens), vocab)
                assert got == step, spec.id
                assert enum.candidates[0].log_prob == 0.0
                state, _ = exec_step(state, step, catalog)

    def test_ambiguity_mixes_mass_equally(self, vocab, catalog, flip_instance, caplog):
        # two ground truths that share the instance but diverge at step one
        p1 = parse_program("identity(N0)\nidentity(N1)", catalog)
        p2 = parse_program("colorOf(N0)\nidentity(N0)", catalog)
        targets = flip_instance.inputs()  # identity targets: both programs solve
        model = OracleModel(vocab, catalog, [("a", p1), ("b", p2)])
        state = ProgramState.initial(flip_instance.inputs())
        tokens = tuple(encode_state(state, targets, vocab))
        with caplog.at_level("WARNING"):
            dist = model.next_token_dist(GuidanceContext(tokens))
        assert dist == {
            vocab.prim_id("identity"): 0.5,
            vocab.prim_id("colorOf"): 0.5,
        }
        assert any("ambiguous" in m for m in caplog.messages)


class TestNoisyOracle:
    def test_clean_shape_spreads_noise_over_other_legal_tokens(self, vocab, catalog, flip_instance):
        oracle = build_oracle(oracle_suite(), vocab, catalog)
        noisy = NoisyOracleModel(oracle, 0.2, seed=0, corrupt_rate=0.0)
        ctx = root_ctx(flip_instance, vocab)
        dist = noisy.next_token_dist(ctx)
        gt_head = encode_instruction(TASKS_BY_ID["Train1"].ground_truth.steps[0], vocab)[0]
        legal = legal_next_tokens([], vocab, 1)
        assert abs(dist[gt_head] - 0.8) < 1e-12
        others = [t for t in legal if t != gt_head]
        assert all(abs(dist[t] - 0.2 / len(others)) < 1e-12 for t in others)
        assert abs(sum(dist.values()) - 1.0) < 1e-9

    def test_corrupted_step_promotes_a_decoy(self, vocab, catalog, flip_instance):
        oracle = build_oracle(oracle_suite(), vocab, catalog)
        noisy = NoisyOracleModel(oracle, 0.3, seed=0, corrupt_rate=1.0)
        ctx = root_ctx(flip_instance, vocab)
        enum = enumerate_steps(noisy, ctx, floor=0.08)
        assert len(enum.candidates) >= 2
        top, runner_up = enum.candidates[0], enum.candidates[1]
        gt_tokens = tuple(encode_instruction(TASKS_BY_ID["Train1"].ground_truth.steps[0], vocab))
        assert runner_up.tokens == gt_tokens  # truth demoted to second place
        assert top.tokens != gt_tokens
        # decoy differs from the truth in exactly one argument token
        assert len(top.tokens) == len(gt_tokens)
        assert sum(a != b for a, b in zip(top.tokens, gt_tokens)) == 1

    def test_determinism(self, vocab, catalog, flip_instance):
        def run():
            oracle = build_oracle(oracle_suite(), vocab, catalog)
            noisy = NoisyOracleModel(oracle, 0.3, seed=7)
            enum = enumerate_steps(noisy, root_ctx(flip_instance, vocab), floor=0.05)
            return [(c.tokens, c.log_prob) for c in enum.candidates]

        assert run() == run()


class TestEnumerateSteps:
    def test_oracle_yields_single_zero_logprob_candidate(self, vocab, catalog, oracle, flip_instance):
        enum = enumerate_steps(oracle, root_ctx(flip_instance, vocab), floor=0.0)
        assert len(enum.candidates) == 1
        assert enum.candidates[0].log_prob == 0.0
        assert not enum.truncated

    def test_high_floor_can_exclude_everything(self, vocab, catalog, oracle, flip_instance):
        enum = enumerate_steps(UniformModel(vocab), root_ctx(flip_instance, vocab), floor=0.999)
        assert enum.candidates == []
        # a point mass still clears any floor below one
        enum = enumerate_steps(oracle, root_ctx(flip_instance, vocab), floor=0.999)
        assert len(enum.candidates) == 1

    def test_candidates_sorted_and_decodable(self, vocab, catalog, flip_instance):
        model = UniformModel(vocab)
        enum = enumerate_steps(model, root_ctx(flip_instance, vocab), floor=0.0, cap=500)
        log_probs = [c.log_prob for c in enum.candidates]
        assert log_probs == sorted(log_probs, reverse=True)
        for cand in enum.candidates:
            step = decode_instruction(list(cand.tokens), vocab)
            assert step.primitive in {p.name for p in catalog.primitives}

    def test_total_mass_bounded_without_truncation(self, vocab, catalog, flip_instance):
        # restricted catalog keeps the full enumeration small
        from gridsynth.catalog import default_catalog
        from gridsynth.codec import Vocabulary

        small = default_catalog().restrict(["identity", "colorOf", "equal"])
        small_vocab = Vocabulary.from_catalog(small)
        model = UniformModel(small_vocab)
        state = ProgramState.initial(flip_instance.inputs())
        tokens = tuple(encode_state(state, flip_instance.targets(), small_vocab))
        enum = enumerate_steps(model, GuidanceContext(tokens), floor=0.0, cap=None)
        assert not enum.truncated
        total = sum(math.exp(c.log_prob) for c in enum.candidates)
        assert total <= 1.0 + 1e-6

    def test_cap_truncates_and_flags(self, vocab, catalog, flip_instance):
        model = UniformModel(vocab)
        enum = enumerate_steps(model, root_ctx(flip_instance, vocab), floor=0.0, cap=64)
        assert enum.truncated
        assert len(enum.candidates) == 64
