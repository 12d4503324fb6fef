import csv
import subprocess
import sys

import pytest

from sbstlab.cli import build_parser, main
from sbstlab.sut_lang import parse, validate

SUBCOMMANDS = ("gen", "run-ga", "run-random", "experiment", "report")


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_exits_zero_and_lists_flags(cmd, capsys):
    assert main([cmd, "--help"]) == 0
    text = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[cmd]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["gen", "--target", "statements=5", "--bogus"]) == 1
    assert "unrecognized arguments: --bogus" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["gen", "--target", "loops=3"],
    ["gen", "--target", "statements=5", "--count", "0"],
    ["run-ga", "x.sut", "--domain", "5:1"],
    ["experiment", "--programs-per-cell", "1"],
    ["experiment", "--criterion", "path"],
])
def test_bad_values_are_usage_errors(argv):
    assert main(argv) == 1


def test_missing_file_is_runtime_error(capsys):
    assert main(["run-ga", "missing.sut"]) == 2
    assert "file not found" in capsys.readouterr().err


def test_malformed_plan_is_runtime_error(tmp_path, capsys):
    plan = tmp_path / "plan.txt"
    plan.write_text("colour = red\n")
    assert main(["experiment", "--plan", str(plan)]) == 2
    assert "malformed plan" in capsys.readouterr().err


def test_bad_sut_is_runtime_error(tmp_path, capsys):
    bad = tmp_path / "bad.sut"
    bad.write_text("program p(x0)\nv0 = x0 / 2;\n")
    assert main(["run-random", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_gen_writes_programs_and_manifest(tmp_path, capsys):
    out = tmp_path / "gen"
    assert main(["gen", "--target", "statements=75", "--count", "10", "--seed", "7",
                 "--out", str(out)]) == 0
    assert "seed=7" in capsys.readouterr().out
    files = sorted(out.glob("*.sut"))
    assert len(files) == 10
    for f in files:
        p = parse(f.read_text())
        assert validate(p) == []
        assert 70 <= p.metrics.statements <= 80
    rows = list(csv.reader((out / "manifest.csv").open()))
    assert rows[0][:6] == ["file", "targetKind", "targetValue", "achievedValue", "geFitness",
                           "seed"]
    assert len(rows) == 11


def test_run_ga_and_random_print_coverage(tmp_path, capsys):
    sut = tmp_path / "p.sut"
    sut.write_text("program p(x0, x1)\nif (x0 > x1) {\n  v0 = 1;\n} else {\n  v0 = 2;\n}\n")
    assert main(["run-ga", str(sut), "--seed", "3", "--out", str(tmp_path / "ga")]) == 0
    out = capsys.readouterr().out
    assert "seed=3" in out and "branch_coverage=100.00" in out
    assert (tmp_path / "ga" / "trace.csv").is_file()
    assert main(["run-random", str(sut), "--criterion", "statement"]) == 0
    out = capsys.readouterr().out
    assert "seed=42" in out and "statement_coverage=100.00" in out


def test_out_defaults_to_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SBSTLAB_OUT", str(tmp_path / "env"))
    assert main(["gen", "--target", "branches=3", "--seed", "1"]) == 0
    assert (tmp_path / "env" / "prog_01.sut").is_file()


def test_experiment_small_plan_and_report(tmp_path, capsys):
    plan = tmp_path / "plan.txt"
    plan.write_text("criteria = statement\nlevels = low\nstatement_targets = 10,20,30\n"
                    "programs_per_cell = 2\nge_generations = 20\nga_generations = 5\n"
                    "random_trials = 100\n")
    run = tmp_path / "run"
    assert main(["experiment", "--plan", str(plan), "--seed", "5", "--out", str(run),
                 "--jobs", "1"]) == 0
    out = capsys.readouterr().out
    assert "seed=5" in out
    assert len(list(csv.reader((run / "summary.csv").open()))) == 2
    assert main(["report", str(run)]) == 0


def test_experiment_desk_scale_example(tmp_path):
    run = tmp_path / "desk"
    proc = subprocess.run(
        [sys.executable, "-m", "sbstlab", "experiment", "--seed", "42", "--programs-per-cell",
         "2", "--desk-scale", "--out", str(run)],
        capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    assert "seed=42" in proc.stdout
    assert len(list(csv.reader((run / "summary.csv").open()))) == 7
    assert len(list(csv.reader((run / "per_program.csv").open()))) == 13
