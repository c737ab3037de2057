"""Tests for the delaygames command line: output lines and exit codes."""

import json
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from delaygames.cli import (  # noqa: E402
    EXIT_BUDGET,
    EXIT_DEVIATION,
    EXIT_INCONCLUSIVE,
    EXIT_INVALID,
    EXIT_OK,
    EXIT_SYNTAX,
    main,
)
from delaygames.formats import load_game, read_thread_trace, read_trace  # noqa: E402

FIXTURES = ROOT / "docs" / "fixtures"
GAME = str(FIXTURES / "match.json")
AA = str(FIXTURES / "match_profile_aa.json")
AB = str(FIXTURES / "match_profile_ab.json")
GRIM = str(FIXTURES / "match_profile_grim.json")
SMALL = ["--horizon", "200", "--exhaustive-horizon", "2", "--schedulers", "16", "--random-schedulers", "2"]


class TestValidate:
    def test_ok(self, capsys):
        assert main(["validate", GAME]) == EXIT_OK
        assert "ok: 2 states, 8 transitions, instant monitoring" in capsys.readouterr().out

    def test_missing_transition(self, tmp_path, capsys):
        data = json.loads(Path(GAME).read_text())
        data["transitions"] = data["transitions"][1:]
        path = tmp_path / "broken.json"
        path.write_text(json.dumps(data))
        assert main(["validate", str(path)]) == EXIT_INVALID
        assert "missing-transition" in capsys.readouterr().out

    def test_syntax_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        assert main(["validate", str(path)]) == EXIT_SYNTAX

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "absent.json")]) == EXIT_SYNTAX


class TestTransform:
    def test_unravel(self, tmp_path):
        out = tmp_path / "match2.json"
        assert main(["transform", GAME, "--unravel", "2", "-o", str(out)]) == EXIT_OK
        g = load_game(out)
        assert len(g.states) == 4
        assert g.moduli == (2,)

    def test_lift_then_project(self, tmp_path, capsys):
        lifted = tmp_path / "lifted.json"
        assert main(["transform", GAME, "--lift", "0,1", "-o", str(lifted)]) == EXIT_OK
        assert main(["transform", str(lifted), "--project"]) == EXIT_OK
        assert capsys.readouterr().out == Path(GAME).read_text()

    def test_project_an_instant_game(self):
        assert main(["transform", GAME, "--project"]) == EXIT_INVALID


class TestSimulate:
    def test_cooperation(self, capsys):
        assert main(["simulate", GAME, "--profile", AA, "--horizon", "50"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "payoffs: 1/1 exact, 1/1 exact" in out
        assert "lasso: prefix 1, cycle 1" in out

    def test_delayed_game_with_trace(self, tmp_path, capsys):
        lifted = tmp_path / "lifted.json"
        main(["transform", GAME, "--lift", "0,1", "-o", str(lifted)])
        trace = tmp_path / "trace.jsonl"
        code = main(
            ["simulate", str(lifted), "--profile", GRIM, "--scheduler", "rr", "--horizon", "30", "--trace", str(trace)]
        )
        assert code == EXIT_OK
        assert "payoffs: 1/1 exact, 1/1 exact" in capsys.readouterr().out
        assert read_trace(trace)[0].t == 1

    def test_seeded_runs_are_byte_identical(self, tmp_path, capsys):
        lifted = tmp_path / "lifted.json"
        main(["transform", GAME, "--lift", "0,1", "-o", str(lifted)])
        outputs = []
        for name in ("first.jsonl", "second.jsonl"):
            trace = tmp_path / name
            args = ["simulate", str(lifted), "--profile", GRIM, "--scheduler", "seed:42", "--horizon", "60"]
            assert main(args + ["--trace", str(trace)]) == EXIT_OK
            outputs.append((capsys.readouterr().out, trace.read_bytes()))
        assert outputs[0] == outputs[1]
        assert outputs[0][1].count(b"\n") == 60

    def test_delayed_game_needs_a_scheduler(self, tmp_path):
        lifted = tmp_path / "lifted.json"
        main(["transform", GAME, "--lift", "0,1", "-o", str(lifted)])
        assert main(["simulate", str(lifted), "--profile", AA]) == EXIT_INVALID

    def test_bad_horizon_is_a_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", GAME, "--profile", AA, "--horizon", "0"])
        assert exc.value.code == EXIT_SYNTAX


class TestTransfer:
    def test_ok(self, tmp_path, capsys):
        report = tmp_path / "report.json"
        code = main(["transfer", GAME, "--profile", GRIM, "--delays", "0,1", "--report", str(report)] + SMALL)
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "modulus: 2" in out
        assert "verdict: ok" in out
        data = json.loads(report.read_text())
        assert data["verdict"] == "ok"
        assert data["delayed_payoffs"] == ["1/1 exact", "1/1 exact"]

    def test_writes_the_delayed_game(self, tmp_path):
        out_game = tmp_path / "delayed.json"
        out_profile = tmp_path / "wrapped.json"
        args = ["transfer", GAME, "--profile", AA, "--delays", "0,1"]
        args += ["--out-game", str(out_game), "--out-profile", str(out_profile)]
        assert main(args + SMALL) == EXIT_OK
        g = load_game(out_game)
        assert g.is_delayed
        assert len(g.states) == 4
        wrapped = json.loads(out_profile.read_text())
        assert [p["kind"] for p in wrapped["players"]] == ["frankenstein", "frankenstein"]

    def test_payoff_table_fits_a_narrow_terminal(self, monkeypatch, capsys):
        monkeypatch.setenv("COLUMNS", "30")
        assert main(["transfer", GAME, "--profile", AA, "--delays", "0,1"] + SMALL) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "Player | Insta… | Delay… | Equal"
        assert lines[1] == "-+-".join(["-" * 6, "-" * 6, "-" * 6, "-" * 5])
        assert lines[2] == "p1     | 1/1 e… | 1/1 e… | ok   "

    def test_thread_trace(self, tmp_path):
        trace = tmp_path / "threads.jsonl"
        args = ["transfer", GAME, "--profile", GRIM, "--delays", "0,1", "--trace", str(trace)]
        assert main(args + SMALL) == EXIT_OK
        records = read_thread_trace(trace)
        assert {r.player for r in records} == {1, 2}
        first = [r for r in records if r.player == 1]
        assert [r.t for r in first] == list(range(1, len(first) + 1))
        assert {r.h for r in first} <= {"ε", "P_0", "P_1", "Q_0", "Q_1"}
        assert all(r.h not in r.pending for r in first)
        assert all(set(r.pending) <= {"ε", "P_0", "P_1", "Q_0", "Q_1"} for r in first)

    def test_trace_run_outside_the_battery(self, tmp_path):
        args = ["transfer", GAME, "--profile", GRIM, "--delays", "0,1", "--trace", str(tmp_path / "t.jsonl")]
        assert main(args + ["--trace-run", "99"] + SMALL) == EXIT_INVALID

    def test_short_cycle(self):
        args = ["transfer", GAME, "--profile", AA, "--delays", "0,1", "--modulus", "1"]
        assert main(args + SMALL) == EXIT_INVALID

    def test_too_short_to_decide(self, capsys):
        args = ["transfer", GAME, "--profile", AA, "--delays", "0,1", "--horizon", "3"]
        args += ["--exhaustive-horizon", "2", "--schedulers", "16", "--random-schedulers", "0"]
        assert main(args) == EXIT_INCONCLUSIVE
        assert "verdict: inconclusive" in capsys.readouterr().out


class TestCheck:
    def test_equilibrium(self, capsys):
        assert main(["check", GAME, "--profile", AA, "--horizon", "60", "--search-depth", "2"]) == EXIT_OK
        assert "verdict: no-profitable-deviation-found" in capsys.readouterr().out

    def test_deviation(self, tmp_path, capsys):
        report = tmp_path / "check.json"
        args = ["check", GAME, "--profile", AB, "--horizon", "60", "--search-depth", "2", "--report", str(report)]
        assert main(args) == EXIT_DEVIATION
        assert "verdict: deviation-found" in capsys.readouterr().out
        assert json.loads(report.read_text())["deviations"][0]["verified"]

    def test_budget(self):
        args = ["check", GAME, "--profile", AA, "--horizon", "60", "--max-deviators", "5"]
        assert main(args) == EXIT_BUDGET
