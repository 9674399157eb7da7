"""Guidance models and next-step enumeration.

A guidance model maps (serialized state, instruction prefix) to a
next-token probability distribution. The search never samples; it expands
every token whose conditional probability clears the floor, depth-first,
and collects EOS-terminated instruction candidates with their joint log
probabilities.

Concrete models:
  * UniformModel      - uniform over grammar-legal tokens (enumerative).
  * OracleModel       - point mass along ground-truth programs, built from
                        a task suite; off-path contexts fall back to the
                        uniform model.
  * NoisyOracleModel  - oracle with a noise mass spread over other legal
                        tokens, plus deterministic hash-seeded step
                        corruptions that promote a near-miss decoy step
                        above the true one (what makes greedy decoding
                        derail while search can recover).
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

from gridsynth.catalog import Catalog
from gridsynth.codec import (
    Vocabulary,
    decode_state,
    encode_instruction,
    encode_state,
    legal_next_tokens,
    state_slot_count,
)
from gridsynth.dsl import Program, ProgramState, exec_step, shift_index_after_del
from gridsynth.errors import DslError
from gridsynth.grid import Grid, grids_equal

logger = logging.getLogger(__name__)

EXPANSION_CAP_DEFAULT = 4096


class RemoteUnavailable(RuntimeError):
    """The remote guidance endpoint failed; fatal for the current task."""


@dataclass(frozen=True)
class GuidanceContext:
    state_tokens: tuple[int, ...]
    step_prefix: tuple[int, ...] = ()


@dataclass(frozen=True)
class StepCandidate:
    tokens: tuple[int, ...]
    log_prob: float


@dataclass
class Enumeration:
    candidates: list[StepCandidate]
    truncated: bool = False


@lru_cache(maxsize=65536)
def _cached_slot_count(state_tokens: tuple[int, ...], vocab: Vocabulary) -> int:
    return state_slot_count(list(state_tokens), vocab)


class GuidanceModel:
    """Base interface; subclasses fill in next_token_dist."""

    deterministic = True

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab

    def next_token_dist(self, ctx: GuidanceContext) -> dict[int, float]:
        raise NotImplementedError

    def _legal(self, ctx: GuidanceContext) -> list[int]:
        n_slots = _cached_slot_count(ctx.state_tokens, self.vocab)
        return legal_next_tokens(list(ctx.step_prefix), self.vocab, n_slots)


def uniform_over(tokens) -> dict[int, float]:
    tokens = list(tokens)
    if not tokens:
        return {}
    p = 1.0 / len(tokens)
    return {t: p for t in tokens}


class UniformModel(GuidanceModel):
    def next_token_dist(self, ctx: GuidanceContext) -> dict[int, float]:
        return uniform_over(self._legal(ctx))


def enumerate_steps(
    model: GuidanceModel,
    ctx: GuidanceContext,
    floor: float,
    cap: int | None = EXPANSION_CAP_DEFAULT,
) -> Enumeration:
    """Collect all EOS-terminated instruction candidates above the floor.

    Depth-first over the token tree, extending every token with conditional
    probability strictly above `floor`, higher-probability branches first.
    When `cap` candidates have been collected the walk stops and the result
    is flagged truncated. Candidates come back sorted by descending joint
    log probability (FIFO on ties).
    """
    vocab = model.vocab
    n_slots = _cached_slot_count(ctx.state_tokens, vocab)
    out: list[StepCandidate] = []
    result = Enumeration(out)

    def walk(prefix: tuple[int, ...], log_prob: float) -> bool:
        dist = model.next_token_dist(GuidanceContext(ctx.state_tokens, prefix))
        legal = legal_next_tokens(list(prefix), vocab, n_slots)
        scored = sorted(
            ((dist.get(t, 0.0), t) for t in legal), key=lambda pt: (-pt[0], pt[1])
        )
        for p, tok in scored:
            if p <= floor:
                break
            if cap is not None and len(out) >= cap:
                result.truncated = True
                return False
            branch_log = log_prob + math.log(p)
            if tok == vocab.EOS:
                out.append(StepCandidate(prefix + (tok,), branch_log))
            elif not walk(prefix + (tok,), branch_log):
                return False
        return True

    walk(tuple(ctx.step_prefix), 0.0)
    out.sort(key=lambda c: -c.log_prob)
    return result


def _solves(outputs, targets) -> bool:
    return all(
        isinstance(o, Grid) and grids_equal(o, t) for o, t in zip(outputs, targets)
    )


class OracleModel(GuidanceModel):
    """Ground-truth guidance built from (task id, program) pairs.

    Keyed purely on the serialized state: when the query's state tokens
    match some prefix state of a ground-truth program that maps these
    inputs to these targets, the next ground-truth token gets probability
    one. Anything else falls back to uniform-over-legal. Instances are
    recognized lazily from root states (single-slot serializations), which
    carry the inputs and targets verbatim.
    """

    def __init__(self, vocab: Vocabulary, catalog: Catalog, suite, max_refs: int | None = None):
        super().__init__(vocab)
        self.catalog = catalog
        self.suite = list(suite)
        self.max_refs = max_refs if max_refs is not None else vocab.max_refs
        # serialized state -> ordered unique full next-step token tuples
        self._known: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
        self._ambiguous_logged: set[tuple[int, ...]] = set()

    def _ingest_instance(self, root_key: tuple[int, ...]) -> None:
        decoded = decode_state(list(root_key), self.vocab)
        if decoded.n_slots != 1:
            return
        inputs = decoded.inputs()
        targets = tuple(decoded.targets)
        for _task_id, program in self.suite:
            states = []
            state = ProgramState.initial(inputs)
            out_slot = 0
            failed = False
            for step in program.steps:
                states.append(state)
                try:
                    state, produced = exec_step(state, step, self.catalog, self.max_refs)
                except DslError:
                    failed = True
                    break
                if produced is None:
                    out_slot = shift_index_after_del(out_slot, step.args[0].index)
                    if out_slot is None:
                        failed = True
                        break
                else:
                    out_slot = state.n_slots - 1
            if failed or not _solves(state.slots[out_slot], targets):
                continue
            for prefix_state, step in zip(states, program.steps):
                key = tuple(encode_state(prefix_state, targets, self.vocab))
                step_tokens = tuple(encode_instruction(step, self.vocab))
                bucket = self._known.setdefault(key, [])
                if step_tokens not in bucket:
                    bucket.append(step_tokens)
        self._known.setdefault(root_key, [])

    def continuations(self, state_tokens: tuple[int, ...]) -> list[tuple[int, ...]]:
        """Full ground-truth step token sequences expected at this state."""
        found = self._known.get(state_tokens)
        if found is None:
            if _cached_slot_count(state_tokens, self.vocab) == 1:
                self._ingest_instance(state_tokens)
                found = self._known.get(state_tokens)
            else:
                found = []
        return found or []

    def next_token_dist(self, ctx: GuidanceContext) -> dict[int, float]:
        prefix = tuple(ctx.step_prefix)
        nexts: list[int] = []
        for step_tokens in self.continuations(tuple(ctx.state_tokens)):
            if len(step_tokens) > len(prefix) and step_tokens[: len(prefix)] == prefix:
                tok = step_tokens[len(prefix)]
                if tok not in nexts:
                    nexts.append(tok)
        if not nexts:
            return uniform_over(self._legal(ctx))
        if len(nexts) > 1:
            key = tuple(ctx.state_tokens)
            if key not in self._ambiguous_logged:
                self._ambiguous_logged.add(key)
                logger.warning(
                    "ambiguous oracle state: %d ground-truth continuations diverge; "
                    "mixing mass equally",
                    len(nexts),
                )
        return uniform_over(nexts)


def build_oracle(suite, vocab: Vocabulary, catalog: Catalog, max_refs: int | None = None) -> OracleModel:
    """Oracle guidance from (task id, ground-truth program) pairs."""
    return OracleModel(vocab, catalog, suite, max_refs)


@dataclass
class _StepPlan:
    gt: tuple[int, ...]
    decoy: tuple[int, ...] | None  # gt with one argument token swapped


class NoisyOracleModel(GuidanceModel):
    """Oracle with spread noise and deterministic step corruptions.

    At a clean on-path query the ground-truth token gets 1-noise and the
    remaining noise mass is spread uniformly over the other grammar-legal
    tokens. A hash of (seed, state) marks a fraction `corrupt_rate` of
    steps corrupted: there the decoy step's token outranks the true one,
    which keeps 'noise' worth of mass, so argmax decoding walks off the
    ground-truth path while enumeration can still recover it.
    """

    def __init__(
        self,
        oracle: OracleModel,
        noise: float,
        seed: int = 0,
        corrupt_rate: float | None = None,
    ):
        if not 0 <= noise < 1:
            raise ValueError("noise must be in [0, 1)")
        super().__init__(oracle.vocab)
        self.oracle = oracle
        self.noise = noise
        self.seed = seed
        self.corrupt_rate = noise if corrupt_rate is None else corrupt_rate
        self._plans: dict[tuple[int, ...], _StepPlan | None] = {}

    def _hash(self, state_key: tuple[int, ...], salt: bytes) -> int:
        h = hashlib.blake2b(digest_size=8, key=salt)
        h.update(str(self.seed).encode())
        h.update(repr(state_key).encode())
        return int.from_bytes(h.digest(), "big")

    def _swap_token(self, tok: int, n_slots: int, pick: int) -> int | None:
        v = self.vocab
        if v.is_int(tok):
            alts = [t for t in range(10) if t != tok]
        elif v.is_ref(tok):
            bound = min(n_slots, v.max_refs)
            alts = [v.ref_base + i for i in range(bound) if v.ref_base + i != tok]
        elif v.is_attr(tok):
            alts = [t for t in v.attr_ids() if t != tok]
        else:
            return None
        if not alts:
            return None
        return alts[pick % len(alts)]

    def _plan(self, state_key: tuple[int, ...]) -> _StepPlan | None:
        if state_key in self._plans:
            return self._plans[state_key]
        conts = self.oracle.continuations(state_key)
        plan = None
        if len(conts) == 1:
            gt = conts[0]
            decoy = None
            u = self._hash(state_key, b"corrupt") / 2.0**64
            if u < self.corrupt_rate:
                n_slots = _cached_slot_count(state_key, self.vocab)
                arg_positions = [
                    i
                    for i, t in enumerate(gt)
                    if self.vocab.is_int(t) or self.vocab.is_ref(t) or self.vocab.is_attr(t)
                ]
                start = self._hash(state_key, b"position")
                for off in range(len(arg_positions)):
                    pos = arg_positions[(start + off) % len(arg_positions)]
                    swapped = self._swap_token(
                        gt[pos], n_slots, self._hash(state_key, b"swap") + off
                    )
                    if swapped is not None:
                        decoy = gt[:pos] + (swapped,) + gt[pos + 1 :]
                        break
            plan = _StepPlan(gt, decoy)
        self._plans[state_key] = plan
        return plan

    def _favour(self, ctx: GuidanceContext, tok: int) -> dict[int, float]:
        others = [t for t in self._legal(ctx) if t != tok]
        if not others or self.noise == 0:
            return {tok: 1.0}
        share = self.noise / len(others)
        dist = {t: share for t in others}
        dist[tok] = 1.0 - self.noise
        return dist

    def next_token_dist(self, ctx: GuidanceContext) -> dict[int, float]:
        state_key = tuple(ctx.state_tokens)
        plan = self._plan(state_key)
        if plan is None:
            # off-path or ambiguous state: defer to the oracle's behaviour
            return self.oracle.next_token_dist(ctx)
        prefix = tuple(ctx.step_prefix)
        i = len(prefix)
        on_gt = len(plan.gt) > i and plan.gt[:i] == prefix
        decoy = plan.decoy
        on_decoy = decoy is not None and len(decoy) > i and decoy[:i] == prefix
        if on_gt and on_decoy and plan.gt[i] != decoy[i]:
            # the swap position: the decoy outranks the truth
            return {decoy[i]: 1.0 - self.noise, plan.gt[i]: self.noise}
        if on_gt:
            return self._favour(ctx, plan.gt[i])
        if on_decoy:
            return self._favour(ctx, decoy[i])
        return uniform_over(self._legal(ctx))
