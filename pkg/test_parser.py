#!/usr/bin/env python3
"""
Tests for the CHR program, query and analysis-spec parser
"""

from pathlib import Path

import pytest

from core.errors import ArityClashError, ChrSyntaxError, SpecError
from core.metaterms import Perm, TypeOf
from core.parser import parse_analysis_spec, parse_program, parse_query, parse_term
from core.program import format_program
from core.terms import Atom, Compound, Int, ListCell, Var
from core.types import MultisetOf

SAMPLES = Path(__file__).parent / "samples"


def _sample(name: str) -> str:
    return (SAMPLES / name).read_text(encoding="utf-8")


def test_parse_gcd_rules():
    """Simpagation rule with a two-goal guard"""
    program = parse_program(_sample("gcd.chr"))
    r1, r2 = program.rules
    assert r1.name == "r1" and r1.kind == "simpagation"
    assert r1.body == ()
    assert r2.kept == (parse_term("gcd(N)"),)
    assert r2.removed == (parse_term("gcd(M)"),)
    assert [g.functor for g in r2.guard] == ["<", "is"]
    assert r2.body == (parse_term("gcd(L)"),)
    assert ("gcd", 1) in program.constraints


def test_parse_set_rule_and_list_syntax():
    program = parse_program(_sample("set.chr"))
    (rule,) = program.rules
    assert rule.kind == "simplification"
    body = rule.body[0]
    assert isinstance(body, Compound) and isinstance(body.args[0], ListCell)
    assert body.args[0].head == Var("X")


def test_empty_program_and_query():
    assert parse_program(_sample("empty.chr")).rules == []
    assert parse_query("") == ()
    assert parse_query("true") == ()


def test_operator_priorities():
    term = parse_term("X is M - N + 1")
    assert term.functor == "is"
    assert term.args[1] == Compound("+", (Compound("-", (Var("M"), Var("N"))), Int(1)))
    assert parse_term("-3") == Int(-3) or parse_term("-3") == Compound("-", (Int(3),))


def test_propagation_rule():
    program = parse_program("a(X) ==> b(X).")
    assert program.rules[0].kind == "propagation"


def test_arity_clash_with_declaration():
    with pytest.raises(ArityClashError):
        parse_program(":- chr_constraint p/1.\np(X, Y) <=> true.")


def test_syntax_error_has_position():
    with pytest.raises(ChrSyntaxError) as info:
        parse_program("p(X) <=> \n q(X")
    assert info.value.line is not None


def test_guard_must_be_builtin():
    with pytest.raises(ChrSyntaxError):
        parse_program("p(X) <=> q(X) | r(X).")


def test_round_trip_through_printer():
    """Printed programs parse back to the same rules"""
    for name in ("set.chr", "gcd.chr", "zigzag.chr"):
        program = parse_program(_sample(name))
        again = parse_program(format_program(program))
        assert again.rules == program.rules


def test_parse_set_spec():
    spec = parse_analysis_spec(_sample("set.cspec"))
    (pattern,) = spec.invariant.patterns
    assert pattern.items == (parse_term("set(L)"),)
    assert pattern.rest == Var("S")
    assert all(isinstance(c, TypeOf) for c in pattern.conditions)
    assert isinstance(spec.types.resolve(spec.types.lookup("constItems")), MultisetOf)
    (pair,) = spec.equiv.pairs
    assert pair.conditions == (Perm(Var("L1"), Var("L2")),)
    assert len(spec.equiv.oriented()) == 2


def test_parse_zigzag_spec_has_three_patterns():
    spec = parse_analysis_spec(_sample("zigzag.cspec"))
    assert [p.items[0].functor for p in spec.invariant.patterns] == ["p", "q", "r"]
    assert all(p.rest is None for p in spec.invariant.patterns)
    assert spec.equiv.is_identity


def test_empty_spec_is_trivial():
    spec = parse_analysis_spec("")
    assert spec.invariant.trivial and spec.equiv.is_identity


def test_spec_errors():
    with pytest.raises(SpecError):
        parse_analysis_spec("invariant {p(N)} where type(nosuchtype, N).")
    with pytest.raises(SpecError):
        parse_analysis_spec("invariant {p(N)} where type(num, M).")
    with pytest.raises(SpecError):
        parse_analysis_spec("invariant {p(N)} where succeeds(q(N)).")
