"""Operator entry point: solve one task, run benchmark sweeps, emit data.

Exit codes: 0 success, 1 usage/IO/remote failure, 2 search returned no
program.
"""

from __future__ import annotations

import hashlib
import json
import random
import sys
import time
from pathlib import Path

import click

from gridsynth.catalog import default_catalog
from gridsynth.codec import Vocabulary
from gridsynth.dsl import format_program, run_program
from gridsynth.errors import DslError
from gridsynth.grid import grids_equal
from gridsynth.guidance import NoisyOracleModel, RemoteUnavailable, UniformModel, build_oracle
from gridsynth.remote import RemoteGuidanceModel
from gridsynth.search import SearchConfig, greedy_rollout, tree_search
from gridsynth.tasks import (
    ALL_TASKS,
    OOD_TASKS,
    TASKS_BY_ID,
    TRAIN_TASKS,
    FormatError,
    SamplerExhausted,
    SamplerParams,
    emit_dataset,
    load_arc_task,
    oracle_suite,
    sample_instance,
    write_dataset_line,
)

REPORT_VERSION = 1


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _cell_seed(seed: int, *parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(repr((seed,) + parts).encode())
    return int.from_bytes(h.digest(), "big")


def _build_guidance(spec: str, vocab: Vocabulary, catalog, seed: int, timeout_s: float):
    name, _, rest = spec.partition(":")
    if name == "oracle":
        return build_oracle(oracle_suite(), vocab, catalog)
    if name == "noisy":
        try:
            noise = float(rest)
        except ValueError:
            _fail(f"bad noise level {rest!r}; expected noisy:<float>")
        oracle = build_oracle(oracle_suite(), vocab, catalog)
        return NoisyOracleModel(oracle, noise, seed=seed)
    if name == "uniform":
        return UniformModel(vocab)
    if name == "remote":
        return RemoteGuidanceModel(vocab, rest, timeout_s=timeout_s)
    _fail(f"unknown guidance {spec!r}; expected oracle, noisy:<e>, uniform, or remote:<addr>")


def _search_config(budget, budget_nodes, max_depth, floor, entropy, entropy_boost, entropy_fraction, seed):
    return SearchConfig(
        budget_s=budget,
        budget_nodes=budget_nodes,
        max_depth=max_depth,
        floor=floor,
        entropy_enabled=entropy,
        entropy_boost=entropy_boost,
        entropy_token_fraction=entropy_fraction,
        seed=seed,
    )


def _run_solver(solver, instance, model, cfg, catalog, trace=None):
    X = instance.inputs()
    Y = instance.targets()
    if solver == "search":
        return tree_search(X, Y, model, cfg, catalog, trace=trace)
    return greedy_rollout(X, Y, model, cfg, catalog, trace=trace)


def _verify(program, instance, catalog) -> bool:
    """Independent re-execution over demos and held-out test pairs."""
    try:
        outs = run_program(program, instance.inputs(), catalog)
    except DslError:
        return False
    if not all(grids_equal(o, t) for o, t in zip(outs, instance.targets())):
        return False
    for test_in, test_out in instance.tests:
        try:
            got = run_program(program, (test_in,), catalog)
        except DslError:
            return False
        if not grids_equal(got[0], test_out):
            return False
    return True


def _instance_for(task: str, seed: int, n_demos: int, sampler: SamplerParams, catalog):
    if task in TASKS_BY_ID:
        rng = random.Random(_cell_seed(seed, task, "instance"))
        return sample_instance(TASKS_BY_ID[task], rng, n_demos=n_demos, params=sampler, catalog=catalog)
    path = Path(task)
    if path.exists():
        return load_arc_task(path)
    _fail(f"unknown task {task!r}: not a task id and not a file")


_shared_options = [
    click.option("--budget", type=float, default=None, help="Wall-clock budget in seconds."),
    click.option("--budget-nodes", type=int, default=None, help="Logical budget: node executions (deterministic)."),
    click.option("--max-depth", type=int, default=16, show_default=True),
    click.option("--floor", type=float, default=1e-4, show_default=True, help="Enumeration probability floor."),
    click.option("--entropy/--no-entropy", default=False, show_default=True, help="Relaunch exhausted searches with boosted root tokens."),
    click.option("--entropy-boost", type=float, default=0.05, show_default=True),
    click.option("--entropy-fraction", type=float, default=0.15, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--timeout", "remote_timeout", type=float, default=2.0, show_default=True, help="Per-request remote guidance timeout (s)."),
]


def _with_options(options):
    def wrap(f):
        for option in reversed(options):
            f = option(f)
        return f

    return wrap


@click.group()
def main():
    """Execution-guided program search over a grid-transformation DSL."""


@main.command()
@click.option("--task", required=True, help="Task id (Train1..Train14, OOD1..OOD7) or an ARC JSON file.")
@click.option("--solver", type=click.Choice(["search", "greedy"]), default="search", show_default=True)
@click.option("--guidance", default="oracle", show_default=True, help="oracle | noisy:<e> | uniform | remote:<addr>")
@click.option("--n-demos", type=int, default=3, show_default=True)
@click.option("--min-dim", type=int, default=3, show_default=True, help="Smallest sampled grid side.")
@click.option("--max-dim", type=int, default=30, show_default=True, help="Largest sampled grid side.")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None, help="Write JSONL search trace here.")
@_with_options(_shared_options)
def solve(task, solver, guidance, n_demos, min_dim, max_dim, trace_path, budget, budget_nodes,
          max_depth, floor, entropy, entropy_boost, entropy_fraction, seed, remote_timeout):
    """Solve one task instance and print the found program."""
    if budget is None and budget_nodes is None:
        budget = 180.0
    catalog = default_catalog()
    vocab = Vocabulary.from_catalog(catalog)
    try:
        instance = _instance_for(task, seed, n_demos, SamplerParams(min_dim=min_dim, max_dim=max_dim), catalog)
        model = _build_guidance(guidance, vocab, catalog, seed, remote_timeout)
    except (RemoteUnavailable, FormatError, SamplerExhausted) as e:
        _fail(str(e))
    cfg = _search_config(budget, budget_nodes, max_depth, floor, entropy, entropy_boost, entropy_fraction, seed)

    trace_file = open(trace_path, "w") if trace_path else None
    trace = None
    if trace_file:
        trace = lambda event: trace_file.write(json.dumps(event, sort_keys=True) + "\n")
    try:
        result = _run_solver(solver, instance, model, cfg, catalog, trace=trace)
    except RemoteUnavailable as e:
        _fail(str(e))
    finally:
        if trace_file:
            trace_file.close()

    click.echo(
        f"# {task}: {result.reason}, nodes={result.nodes}, "
        f"restarts={result.restarts}, elapsed={result.elapsed_s:.2f}s"
    )
    if result.program is None:
        click.echo("# no program found")
        sys.exit(2)
    click.echo(format_program(result.program))
    verified = _verify(result.program, instance, catalog)
    click.echo(f"# verified: {'yes' if verified else 'NO (fails re-execution)'}")
    sys.exit(0)


@main.command()
@click.option("--suite", default="ood", show_default=True, help="train | ood | all | directory of ARC JSON files")
@click.option("--solvers", default="search,greedy", show_default=True, help="Comma-separated: search, greedy.")
@click.option("--guidance", default="oracle", show_default=True)
@click.option("--n-samples", type=int, default=10, show_default=True)
@click.option("--n-demos", type=int, default=3, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Write the JSON report here.")
@_with_options(_shared_options)
def bench(suite, solvers, guidance, n_samples, n_demos, out_path, budget, budget_nodes, max_depth,
          floor, entropy, entropy_boost, entropy_fraction, seed, remote_timeout):
    """Success-rate sweep: tasks x solvers over fresh sampled instances."""
    if budget is None and budget_nodes is None:
        budget = 180.0
    logical = budget is None  # wall times are nondeterministic; drop them then
    catalog = default_catalog()
    vocab = Vocabulary.from_catalog(catalog)
    solver_list = [s.strip() for s in solvers.split(",") if s.strip()]
    for s in solver_list:
        if s not in ("search", "greedy"):
            _fail(f"unknown solver {s!r}")

    suites = {"train": TRAIN_TASKS, "ood": OOD_TASKS, "all": ALL_TASKS}
    arc_instances = {}
    if suite in suites:
        tasks = [spec.id for spec in suites[suite]]
    else:
        directory = Path(suite)
        if not directory.is_dir():
            _fail(f"unknown suite {suite!r}: not train/ood/all and not a directory")
        files = sorted(directory.glob("*.json"))
        if not files:
            _fail(f"no .json task files under {directory}")
        try:
            arc_instances = {p.stem: load_arc_task(p) for p in files}
        except FormatError as e:
            _fail(str(e))
        tasks = list(arc_instances)

    try:
        model = _build_guidance(guidance, vocab, catalog, seed, remote_timeout)
    except RemoteUnavailable as e:
        _fail(str(e))

    cells = []
    for task in tasks:
        for solver in solver_list:
            successes = 0
            errors = 0
            wall_ms = 0
            n_runs = n_samples if task not in arc_instances else 1
            for k in range(n_runs):
                if task in arc_instances:
                    instance = arc_instances[task]
                else:
                    rng = random.Random(_cell_seed(seed, task, k, "instance"))
                    try:
                        instance = sample_instance(
                            TASKS_BY_ID[task], rng, n_demos=n_demos, catalog=catalog
                        )
                    except SamplerExhausted:
                        errors += 1
                        continue
                cfg = _search_config(
                    budget, budget_nodes, max_depth, floor, entropy,
                    entropy_boost, entropy_fraction, _cell_seed(seed, task, k, "search"),
                )
                started = time.monotonic()
                try:
                    result = _run_solver(solver, instance, model, cfg, catalog)
                except RemoteUnavailable:
                    errors += 1
                    continue
                wall_ms += int((time.monotonic() - started) * 1000)
                if result.program is not None and _verify(result.program, instance, catalog):
                    successes += 1
            cells.append(
                {
                    "task": task,
                    "solver": solver,
                    "n": n_runs,
                    "successes": successes,
                    "success_rate": successes / n_runs if n_runs else 0.0,
                    "errors": errors,
                    "wall_ms": None if logical else wall_ms,
                }
            )

    totals = {}
    for solver in solver_list:
        solver_cells = [c for c in cells if c["solver"] == solver]
        n = sum(c["n"] for c in solver_cells)
        wins = sum(c["successes"] for c in solver_cells)
        totals[solver] = {"n": n, "successes": wins, "success_rate": wins / n if n else 0.0}

    report = {
        "version": REPORT_VERSION,
        "suite": suite,
        "guidance": guidance,
        "solvers": solver_list,
        "n_samples": n_samples,
        "budget": {"seconds": budget, "nodes": budget_nodes},
        "config": {
            "max_depth": max_depth,
            "floor": floor,
            "entropy": entropy,
            "entropy_boost": entropy_boost,
            "entropy_fraction": entropy_fraction,
            "seed": seed,
            "n_demos": n_demos,
        },
        "cells": cells,
        "totals": totals,
    }

    _print_bench_table(tasks, solver_list, cells, totals)
    payload = json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n"
    if out_path:
        Path(out_path).write_text(payload)
        click.echo(f"# report written to {out_path}")
    else:
        click.echo(payload, nl=False)


def _print_bench_table(tasks, solver_list, cells, totals):
    by_key = {(c["task"], c["solver"]): c for c in cells}
    width = max([len(t) for t in tasks] + [len("Total")]) + 2
    header = "Task".ljust(width) + "".join(s.rjust(12) for s in solver_list)
    click.echo(header)
    click.echo("-" * len(header))
    for task in tasks:
        row = task.ljust(width)
        for solver in solver_list:
            cell = by_key[(task, solver)]
            row += f"{100 * cell['success_rate']:10.0f}%".rjust(12)
        click.echo(row)
    row = "Total".ljust(width)
    for solver in solver_list:
        row += f"{100 * totals[solver]['success_rate']:10.1f}%".rjust(12)
    click.echo(row)


@main.command("gen-data")
@click.option("--n", "n_examples", type=int, default=20000, show_default=True, help="Sampled task instances.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--tasks", "task_filter", default="train", show_default=True, help="train | all | comma-separated task ids")
@click.option("--n-demos", type=int, default=1, show_default=True)
@click.option("--min-dim", type=int, default=3, show_default=True)
@click.option("--max-dim", type=int, default=30, show_default=True)
def gen_data(n_examples, seed, out_path, task_filter, n_demos, min_dim, max_dim):
    """Emit teacher-forcing training samples as JSON lines."""
    catalog = default_catalog()
    vocab = Vocabulary.from_catalog(catalog)
    if task_filter == "train":
        specs = TRAIN_TASKS
    elif task_filter == "all":
        specs = ALL_TASKS
    else:
        try:
            specs = tuple(TASKS_BY_ID[t.strip()] for t in task_filter.split(","))
        except KeyError as e:
            _fail(f"unknown task id {e.args[0]!r}")
    params = SamplerParams(min_dim=min_dim, max_dim=max_dim)
    rng = random.Random(seed)
    lines = 0
    with open(out_path, "w") as f:
        for sample in emit_dataset(specs, n_examples, rng, vocab, catalog, n_demos=n_demos, params=params):
            f.write(write_dataset_line(sample) + "\n")
            lines += 1
    click.echo(f"# wrote {lines} samples ({n_examples} instances) to {out_path}")
    click.echo(f"# vocabulary manifest sha256: {vocab.manifest_hash()}")


@main.command()
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def manifest(out_path):
    """Print (or write) the vocabulary manifest and its hash."""
    vocab = Vocabulary.from_catalog(default_catalog())
    text = vocab.manifest()
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"# manifest written to {out_path}")
    else:
        click.echo(text, nl=False)
    click.echo(f"# sha256: {vocab.manifest_hash()}")
    click.echo(f"# instruction tokens: {vocab.instruction_size}, total: {vocab.size}")


if __name__ == "__main__":
    main()
