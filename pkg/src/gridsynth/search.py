"""Best-first program search over guidance-model enumerations.

One search is a single logical thread: execute the selected node, check
its output against the targets, enumerate next-step candidates, push them
onto one global queue keyed by joint log probability, dequeue the best,
repeat. Execution failures kill a branch without charging more than the
failed execution. An optional entropy mechanism re-launches an exhausted
search with a probability boost on randomly chosen root-expansion tokens
to open paths the model priced at zero.
"""

from __future__ import annotations

import heapq
import itertools
import random
import time
from dataclasses import dataclass, field

from gridsynth.catalog import Catalog
from gridsynth.codec import decode_instruction, encode_state
from gridsynth.dsl import InstructionStep, Program, ProgramState, exec_step, shift_index_after_del
from gridsynth.errors import DslError
from gridsynth.grid import Grid, grids_equal
from gridsynth.guidance import (
    EXPANSION_CAP_DEFAULT,
    GuidanceContext,
    GuidanceModel,
    StepCandidate,
    enumerate_steps,
)


@dataclass
class SearchConfig:
    budget_s: float | None = None  # wall-clock budget
    budget_nodes: int | None = None  # logical budget: node executions
    max_depth: int = 16
    floor: float = 1e-4
    expansion_cap: int | None = EXPANSION_CAP_DEFAULT
    entropy_enabled: bool = False
    entropy_boost: float = 0.05
    entropy_token_fraction: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.budget_s is None and self.budget_nodes is None:
            raise ValueError("need a time budget, a node budget, or both")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if not 0 <= self.entropy_boost < 1:
            raise ValueError("entropy_boost must be in [0, 1)")


@dataclass
class SearchResult:
    program: Program | None
    reason: str  # solution | timeout | node_budget | exhausted
    nodes: int = 0
    restarts: int = 0
    elapsed_s: float = 0.0
    truncated: bool = False
    root_tokens: set[int] = field(default_factory=set)
    solutions: list[Program] = field(default_factory=list)
    dequeued_log_probs: list[float] | None = None
    expanded: list[tuple[tuple[int, ...], ...]] | None = None

    @property
    def found(self) -> bool:
        return self.program is not None


def joint_log_prob(path: list[StepCandidate]) -> float:
    """Joint log probability of a candidate path (product in linear space)."""
    return sum(c.log_prob for c in path)


class _Node:
    __slots__ = ("step", "step_tokens", "parent", "depth", "state", "out_slot", "state_tokens", "log_prob")

    def __init__(self, step, step_tokens, parent, depth, state, out_slot, log_prob):
        self.step = step
        self.step_tokens = step_tokens
        self.parent = parent
        self.depth = depth
        self.state = state
        self.out_slot = out_slot
        self.state_tokens: tuple[int, ...] | None = None
        self.log_prob = log_prob

    def program(self) -> Program:
        steps = []
        node = self
        while node.step is not None:
            steps.append(node.step)
            node = node.parent
        return Program(tuple(reversed(steps)))

    def token_path(self) -> tuple[tuple[int, ...], ...]:
        path = []
        node = self
        while node.step is not None:
            path.append(node.step_tokens)
            node = node.parent
        return tuple(reversed(path))


def _is_solution(state: ProgramState, out_slot: int, targets) -> bool:
    values = state.slots[out_slot]
    return all(
        isinstance(v, Grid) and grids_equal(v, t) for v, t in zip(values, targets)
    )


class _Budget:
    def __init__(self, cfg: SearchConfig):
        self.start = time.monotonic()
        self.deadline = self.start + cfg.budget_s if cfg.budget_s is not None else None
        self.nodes_left = cfg.budget_nodes

    def elapsed(self) -> float:
        return time.monotonic() - self.start

    def exhausted_reason(self) -> str | None:
        if self.deadline is not None and time.monotonic() >= self.deadline:
            return "timeout"
        if self.nodes_left is not None and self.nodes_left <= 0:
            return "node_budget"
        return None

    def charge_node(self) -> None:
        if self.nodes_left is not None:
            self.nodes_left -= 1


class RootBoostModel(GuidanceModel):
    """Wraps a model; adds `boost` to chosen tokens at root-state queries.

    The root state is captured from the first query of the relaunched
    search (the search always queries its root first). `floor_scale` keeps
    the superset guarantee: a token above the base floor stays above
    floor*floor_scale after the boost renormalization, so enabling the
    boost can only add root branches, never remove them.
    """

    def __init__(self, base: GuidanceModel, boosted: frozenset[int], boost: float):
        super().__init__(base.vocab)
        self.base = base
        self.deterministic = base.deterministic
        self.boosted = boosted
        self.boost = boost
        self.floor_scale = 1.0 / (1.0 + boost * max(1, len(boosted)))
        self.root_key: tuple[int, ...] | None = None

    def next_token_dist(self, ctx: GuidanceContext) -> dict[int, float]:
        if self.root_key is None:
            self.root_key = tuple(ctx.state_tokens)
        dist = self.base.next_token_dist(ctx)
        if tuple(ctx.state_tokens) != self.root_key or not self.boost:
            return dist
        hits = self.boosted.intersection(self._legal(ctx))
        if not hits:
            return dist
        out = dict(dist)
        for tok in hits:
            out[tok] = out.get(tok, 0.0) + self.boost
        z = sum(out.values())
        if z > 1.0:
            out = {t: p / z for t, p in out.items()}
        return out


def entropy_restart(model: GuidanceModel, cfg: SearchConfig, rng: random.Random) -> GuidanceModel:
    """Model for one relaunch: a fresh random fraction of the instruction
    vocabulary gets +entropy_boost probability at root expansions."""
    size = model.vocab.instruction_size
    k = max(1, round(cfg.entropy_token_fraction * size))
    boosted = frozenset(rng.sample(range(size), k))
    return RootBoostModel(model, boosted, cfg.entropy_boost)


def _root_floor(cfg: SearchConfig, model: GuidanceModel) -> float:
    return cfg.floor * getattr(model, "floor_scale", 1.0)


def _one_pass(
    X,
    Y,
    model: GuidanceModel,
    cfg: SearchConfig,
    catalog: Catalog,
    budget: _Budget,
    result: SearchResult,
    find_all: bool,
    collect_debug: bool,
    trace,
) -> str:
    """Run one queue-lifetime of best-first search; returns the stop reason."""
    vocab = model.vocab
    queue: list = []
    tie = itertools.count()

    def push_children(node: _Node) -> None:
        if node.depth >= cfg.max_depth:
            return
        if node.state_tokens is None:
            node.state_tokens = tuple(encode_state(node.state, Y, vocab))
        floor = _root_floor(cfg, model) if node.depth == 0 else cfg.floor
        enum = enumerate_steps(
            model, GuidanceContext(node.state_tokens), floor, cfg.expansion_cap
        )
        if enum.truncated:
            result.truncated = True
        if node.depth == 0:
            for cand in enum.candidates:
                result.root_tokens.update(cand.tokens)
        for cand in enum.candidates:
            heapq.heappush(
                queue, (-(node.log_prob + cand.log_prob), next(tie), node, cand)
            )

    def on_node(node: _Node) -> bool:
        """Solution bookkeeping; True when the search should stop."""
        if not _is_solution(node.state, node.out_slot, Y):
            return False
        program = node.program()
        result.solutions.append(program)
        if trace:
            trace({"event": "solution", "depth": node.depth, "log_prob": node.log_prob})
        if result.program is None:
            result.program = program
        return not find_all

    root = _Node(None, None, None, 0, ProgramState.initial(tuple(X)), 0, 0.0)
    reason = budget.exhausted_reason()
    if reason:
        return reason
    budget.charge_node()
    result.nodes += 1
    if on_node(root):
        return "solution"
    push_children(root)

    while queue:
        reason = budget.exhausted_reason()
        if reason:
            return reason
        neg_log_prob, _, parent, cand = heapq.heappop(queue)
        budget.charge_node()
        result.nodes += 1
        if collect_debug:
            result.dequeued_log_probs.append(-neg_log_prob)
        try:
            step = decode_instruction(list(cand.tokens), vocab, parent.state.n_slots)
            new_state, produced = exec_step(parent.state, step, catalog, vocab.max_refs)
        except DslError:
            if trace:
                trace({"event": "dead", "depth": parent.depth + 1, "log_prob": -neg_log_prob})
            continue
        if produced is None:
            out_slot = shift_index_after_del(parent.out_slot, step.args[0].index)
            if out_slot is None:
                continue  # deleted its own result: nothing left to answer with
        else:
            out_slot = new_state.n_slots - 1
        child = _Node(step, cand.tokens, parent, parent.depth + 1, new_state, out_slot, -neg_log_prob)
        if trace:
            trace({"event": "dequeue", "depth": child.depth, "log_prob": child.log_prob})
        if collect_debug:
            result.expanded.append(child.token_path())
        if on_node(child):
            return "solution"
        push_children(child)
    return "exhausted"


def tree_search(
    X,
    Y,
    model: GuidanceModel,
    cfg: SearchConfig,
    catalog: Catalog,
    *,
    find_all: bool = False,
    collect_debug: bool = False,
    trace=None,
) -> SearchResult:
    """Best-first search for a program mapping the demo inputs X to targets Y.

    Returns the first program whose execution output equals Y on every
    example, or reason='timeout'/'node_budget'/'exhausted' without one.
    With entropy enabled, an exhausted queue relaunches the search on the
    remaining budget with a boosted root expansion (fresh draw each time).
    """
    if len(X) != len(Y) or not X:
        raise ValueError("need the same non-zero number of inputs and targets")
    budget = _Budget(cfg)
    result = SearchResult(program=None, reason="exhausted")
    if collect_debug:
        result.dequeued_log_probs = []
        result.expanded = []
    rng = random.Random(cfg.seed)
    active = model
    while True:
        reason = _one_pass(X, Y, active, cfg, catalog, budget, result, find_all, collect_debug, trace)
        if reason == "solution" or (reason == "exhausted" and find_all and result.solutions):
            result.reason = "solution"
            break
        result.reason = reason
        if reason != "exhausted" or not cfg.entropy_enabled:
            break
        if budget.exhausted_reason():
            result.reason = budget.exhausted_reason()
            break
        active = entropy_restart(model, cfg, rng)
        result.restarts += 1
        if trace:
            trace({"event": "restart", "pass": result.restarts})
    result.elapsed_s = budget.elapsed()
    if trace:
        trace({"event": "done", "reason": result.reason, "nodes": result.nodes})
    return result


def greedy_rollout(
    X,
    Y,
    model: GuidanceModel,
    cfg: SearchConfig,
    catalog: Catalog,
    *,
    trace=None,
) -> SearchResult:
    """Argmax-only ablation: follow the single best candidate at each step.

    No queue and no backtracking; stops at a solution, an execution error,
    an empty enumeration, the depth cap, or the budget.
    """
    if len(X) != len(Y) or not X:
        raise ValueError("need the same non-zero number of inputs and targets")
    vocab = model.vocab
    budget = _Budget(cfg)
    result = SearchResult(program=None, reason="exhausted")
    state = ProgramState.initial(tuple(X))
    out_slot = 0
    steps: list[InstructionStep] = []
    log_prob = 0.0
    while True:
        reason = budget.exhausted_reason()
        if reason:
            result.reason = reason
            break
        budget.charge_node()
        result.nodes += 1
        if _is_solution(state, out_slot, Y):
            result.program = Program(tuple(steps))
            result.solutions.append(result.program)
            result.reason = "solution"
            break
        if len(steps) >= cfg.max_depth:
            result.reason = "exhausted"
            break
        state_tokens = tuple(encode_state(state, Y, vocab))
        enum = enumerate_steps(model, GuidanceContext(state_tokens), cfg.floor, cfg.expansion_cap)
        if enum.truncated:
            result.truncated = True
        if not enum.candidates:
            result.reason = "exhausted"
            break
        best = enum.candidates[0]
        if not steps:
            result.root_tokens.update(best.tokens)
        try:
            step = decode_instruction(list(best.tokens), vocab, state.n_slots)
            state, produced = exec_step(state, step, catalog, vocab.max_refs)
        except DslError:
            result.reason = "exhausted"
            break
        if produced is None:
            shifted = shift_index_after_del(out_slot, step.args[0].index)
            if shifted is None:
                result.reason = "exhausted"
                break
            out_slot = shifted
        else:
            out_slot = state.n_slots - 1
        steps.append(step)
        log_prob += best.log_prob
        if trace:
            trace({"event": "greedy_step", "depth": len(steps), "log_prob": log_prob})
    result.elapsed_s = budget.elapsed()
    if trace:
        trace({"event": "done", "reason": result.reason, "nodes": result.nodes})
    return result
