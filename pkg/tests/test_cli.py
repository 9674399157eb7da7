import json

import pytest
from click.testing import CliRunner

from gridsynth.cli import main
from gridsynth.codec import Vocabulary, decode_instruction, decode_state
from gridsynth.dsl import parse_program, run_program
from gridsynth.grid import grids_equal


@pytest.fixture()
def runner():
    return CliRunner()


class TestSolve:
    def test_oracle_solve_prints_program_and_exits_zero(self, runner, catalog):
        result = runner.invoke(
            main, ["solve", "--task", "Train1", "--guidance", "oracle", "--budget-nodes", "1000"]
        )
        assert result.exit_code == 0, result.output
        lines = [l for l in result.output.splitlines() if l and not l.startswith("#")]
        program = parse_program("\n".join(lines), catalog)
        assert len(program.steps) == 3
        assert "verified: yes" in result.output

    def test_rotation_task_solves_as_two_mirrors(self, runner, catalog):
        result = runner.invoke(
            main, ["solve", "--task", "OOD4", "--guidance", "oracle", "--budget-nodes", "2000"]
        )
        assert result.exit_code == 0, result.output
        lines = [l for l in result.output.splitlines() if l and not l.startswith("#")]
        program = parse_program("\n".join(lines), catalog)
        heads = [s.primitive for s in program.steps]
        assert heads.count("sub") == 2  # one mirrored coordinate list per axis

    def test_exhausted_budget_exits_two(self, runner):
        result = runner.invoke(
            main, ["solve", "--task", "OOD5", "--guidance", "uniform", "--budget-nodes", "2"]
        )
        assert result.exit_code == 2
        assert "no program found" in result.output

    def test_remote_server_down_exits_one(self, runner):
        result = runner.invoke(
            main,
            ["solve", "--task", "Train1", "--guidance", "remote:tcp:127.0.0.1:1", "--budget-nodes", "10"],
        )
        assert result.exit_code == 1
        assert "error:" in result.output

    def test_unknown_task_exits_one(self, runner):
        result = runner.invoke(main, ["solve", "--task", "Nope99", "--budget-nodes", "10"])
        assert result.exit_code == 1

    def test_trace_file_is_json_lines(self, runner, tmp_path):
        trace = tmp_path / "trace.jsonl"
        result = runner.invoke(
            main,
            ["solve", "--task", "Train2", "--budget-nodes", "1000", "--trace", str(trace)],
        )
        assert result.exit_code == 0
        events = [json.loads(line) for line in trace.read_text().splitlines()]
        assert any(e["event"] == "dequeue" for e in events)
        assert events[-1]["event"] == "done"

    def test_arc_file_task(self, runner, tmp_path, catalog):
        # identity task given as a file: solvable by the empty program
        path = tmp_path / "t.json"
        path.write_text(
            json.dumps({"train": [{"input": [[1, 2]], "output": [[1, 2]]}], "test": []})
        )
        result = runner.invoke(
            main, ["solve", "--task", str(path), "--guidance", "uniform", "--budget-nodes", "50"]
        )
        assert result.exit_code == 0


class TestBench:
    def test_oracle_bench_is_deterministic_and_full_marks(self, runner, tmp_path):
        args = [
            "bench", "--suite", "ood", "--solvers", "search,greedy", "--guidance", "oracle",
            "--n-samples", "2", "--budget-nodes", "4000", "--seed", "9",
        ]
        first = runner.invoke(main, args + ["--out", str(tmp_path / "a.json")])
        second = runner.invoke(main, args + ["--out", str(tmp_path / "b.json")])
        assert first.exit_code == 0, first.output
        assert second.exit_code == 0
        a = (tmp_path / "a.json").read_bytes()
        assert a == (tmp_path / "b.json").read_bytes()
        report = json.loads(a)
        assert report["totals"]["search"]["success_rate"] == 1.0
        assert report["totals"]["greedy"]["success_rate"] == 1.0
        assert all(cell["wall_ms"] is None for cell in report["cells"])

    def test_zero_samples_gives_empty_report(self, runner):
        result = runner.invoke(
            main,
            ["bench", "--suite", "ood", "--solvers", "search", "--n-samples", "0", "--budget-nodes", "10"],
        )
        assert result.exit_code == 0
        report = json.loads(result.output.splitlines()[-1])
        assert all(cell["n"] == 0 for cell in report["cells"])

    def test_wall_clock_mode_reports_times(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["bench", "--suite", "train", "--solvers", "search", "--guidance", "oracle",
             "--n-samples", "1", "--budget", "10"],
        )
        assert result.exit_code == 0
        report = json.loads(result.output.splitlines()[-1])
        assert all(isinstance(cell["wall_ms"], int) for cell in report["cells"])

    def test_arc_directory_suite(self, runner, tmp_path):
        (tmp_path / "id1.json").write_text(
            json.dumps({"train": [{"input": [[1, 2]], "output": [[1, 2]]}]})
        )
        result = runner.invoke(
            main,
            ["bench", "--suite", str(tmp_path), "--solvers", "search", "--guidance", "uniform",
             "--budget-nodes", "50"],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(result.output.splitlines()[-1])
        assert report["cells"][0]["task"] == "id1"
        assert report["cells"][0]["successes"] == 1


class TestGenData:
    def test_same_seed_same_bytes_and_lines_decode(self, runner, tmp_path, catalog):
        vocab = Vocabulary.from_catalog(catalog)
        args = lambda name: [
            "gen-data", "--n", "3", "--seed", "5", "--tasks", "Train1,Train3",
            "--max-dim", "5", "--out", str(tmp_path / name),
        ]
        first = runner.invoke(main, args("a.jsonl"))
        second = runner.invoke(main, args("b.jsonl"))
        assert first.exit_code == 0, first.output
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert vocab.manifest_hash() in first.output
        for line in (tmp_path / "a.jsonl").read_text().splitlines():
            row = json.loads(line)
            decode_instruction(row["target_tokens"], vocab)
            decoded = decode_state(row["state_tokens"], vocab)
            assert decoded.targets

    def test_line_count_matches_ground_truth_decomposition(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["gen-data", "--n", "1", "--seed", "0", "--tasks", "Train3", "--out", str(tmp_path / "d.jsonl")],
        )
        assert result.exit_code == 0
        assert len((tmp_path / "d.jsonl").read_text().splitlines()) == 4


class TestManifest:
    def test_manifest_prints_hash_and_sizes(self, runner, catalog):
        vocab = Vocabulary.from_catalog(catalog)
        result = runner.invoke(main, ["manifest"])
        assert result.exit_code == 0
        assert vocab.manifest_hash() in result.output
        assert str(vocab.size) in result.output

    def test_manifest_file_round_trips(self, runner, tmp_path, catalog):
        path = tmp_path / "vocab.manifest"
        result = runner.invoke(main, ["manifest", "--out", str(path)])
        assert result.exit_code == 0
        vocab = Vocabulary.from_manifest(path.read_text())
        assert vocab.manifest_hash() == Vocabulary.from_catalog(catalog).manifest_hash()
