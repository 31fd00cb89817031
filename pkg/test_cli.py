#!/usr/bin/env python3
"""
Tests for the chr-confluence command-line interface
"""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

import main
from main import EXIT_CONFLUENT, EXIT_NOT_CONFLUENT, EXIT_USAGE, cli

SAMPLES = Path(__file__).parent / "samples"


def _sample(name: str) -> str:
    return str(SAMPLES / name)


@pytest.fixture
def runner():
    return CliRunner()


def test_check_without_program_is_usage_error(runner):
    result = runner.invoke(cli, ["check"])
    assert result.exit_code == EXIT_USAGE


def test_missing_program_file(runner):
    result = runner.invoke(cli, ["check", _sample("missing.chr")])
    assert result.exit_code == EXIT_USAGE


def test_conflicting_mode_flags(runner):
    args = ["check", _sample("set.chr"), "--spec", _sample("set.cspec"), "--modulo-equivalence", "--invariant-only"]
    result = runner.invoke(cli, args)
    assert result.exit_code == EXIT_USAGE


def test_check_zigzag_under_invariant(runner):
    args = [
        "check",
        _sample("zigzag.chr"),
        "--spec",
        _sample("zigzag.cspec"),
        "--modulo-equivalence",
        "--assume-observable-termination",
    ]
    result = runner.invoke(cli, args)
    assert result.exit_code == EXIT_CONFLUENT
    assert "CONFLUENT" in result.stdout


def test_check_empty_program_with_builtins(runner):
    result = runner.invoke(cli, ["check", _sample("empty.chr"), "--builtins", "is,="])
    assert result.exit_code == EXIT_NOT_CONFLUENT
    assert "NOT-CONFLUENT" in result.stdout


def test_structured_output_is_deterministic(runner):
    """Two runs of the same check print the same document"""
    args = [
        "check",
        _sample("set.chr"),
        "--spec",
        _sample("set.cspec"),
        "--modulo-equivalence",
        "--assume-observable-termination",
        "--format",
        "structured",
    ]
    first = runner.invoke(cli, args)
    second = runner.invoke(cli, args)
    assert first.exit_code == EXIT_CONFLUENT
    assert first.stdout == second.stdout
    document = json.loads(first.stdout)
    assert document["summary"] == "CONFLUENT"
    assert document["mode"] == "confluence-modulo-equivalence"
    assert [c["index"] for c in document["corners"]] == list(range(1, len(document["corners"]) + 1))


def test_parallel_jobs_give_same_document(runner):
    base = ["check", _sample("gcd.chr"), "--spec", _sample("gcd.cspec"), "--format", "structured"]
    serial = runner.invoke(cli, base)
    parallel = runner.invoke(cli, base + ["--jobs", "3"])
    assert serial.stdout == parallel.stdout


def test_corners_lists_without_search(runner):
    result = runner.invoke(cli, ["corners", _sample("zigzag.chr"), "--format", "structured"])
    assert result.exit_code == 0
    corners = json.loads(result.stdout)["corners"]
    assert any(c["kind"] == "alpha1" for c in corners)


def test_oracle_agrees_on_zigzag(runner):
    args = ["oracle", _sample("zigzag.chr"), "--spec", _sample("zigzag.cspec"), "--modulo-equivalence"]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0


def test_run_set_query(runner):
    result = runner.invoke(cli, ["run", _sample("set.chr"), "set([]), item(a), item(b)"])
    assert result.exit_code == 0
    lines = [line for line in result.stdout.splitlines() if line]
    assert lines == ["{set([a,b])}", "{set([b,a])}"]


def test_run_gcd_query(runner):
    result = runner.invoke(cli, ["run", _sample("gcd.chr"), "gcd(49), gcd(63)"])
    assert result.exit_code == 0
    assert result.stdout.strip() == "{gcd(7)}"


def test_run_rejects_bad_fuel(runner):
    result = runner.invoke(cli, ["run", _sample("gcd.chr"), "gcd(1)", "--fuel", "0"])
    assert result.exit_code == EXIT_USAGE


@pytest.mark.parametrize(
    "command, target",
    [("check", "check"), ("corners", "generate"), ("oracle", "run_oracle")],
)
def test_unexpected_failures_exit_with_usage_status(runner, monkeypatch, command, target):
    def broken(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(main, target, broken)
    result = runner.invoke(cli, [command, _sample("zigzag.chr")])
    assert result.exit_code == EXIT_USAGE
