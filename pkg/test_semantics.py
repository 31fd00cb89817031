#!/usr/bin/env python3
"""
Tests for the object-level transition system and the joinability oracle
"""

from pathlib import Path

import pytest

from core.parser import parse_analysis_spec, parse_program, parse_query
from core.semantics import (
    JOINABLE,
    NOT_JOINABLE,
    ERROR_STATE,
    explore,
    inv_member,
    normal_forms,
    obj_joinable,
    render_trace,
    sim_equiv,
    successors,
)
from core.solver import Solver
from core.terms import make_state

SAMPLES = Path(__file__).parent / "samples"


def _program(name: str):
    return parse_program((SAMPLES / name).read_text(encoding="utf-8"))


def _state(text: str):
    return make_state(parse_query(text))


@pytest.fixture
def set_program():
    return _program("set.chr")


@pytest.fixture
def gcd_program():
    return _program("gcd.chr")


@pytest.fixture
def zigzag_program():
    return _program("zigzag.chr")


def test_set_program_has_two_normal_forms(set_program):
    """The order in which items are collected shows in the final list"""
    forms, exhausted = normal_forms(set_program, _state("set([]), item(a), item(b)"), fuel=10)
    assert not exhausted
    assert forms == {_state("set([a,b])"), _state("set([b,a])")}


def test_gcd_program_computes_gcd(gcd_program):
    forms, exhausted = normal_forms(gcd_program, _state("gcd(49), gcd(63)"), fuel=50)
    assert not exhausted
    assert forms == {_state("gcd(7)")}


def test_empty_query_is_a_normal_form(gcd_program):
    forms, _ = normal_forms(gcd_program, _state(""))
    assert forms == {_state("")}


def test_builtin_steps_in_the_store():
    """Built-ins in the store execute on their own and bind the rest"""
    program = parse_program("")
    labelled = successors(program, _state("X = 1, p(X)"))
    assert [target for _, target in labelled] == [_state("p(1)")]
    labelled = successors(program, _state("X is Y + 1, p(Y)"))
    assert [target for _, target in labelled] == [ERROR_STATE]


def test_guard_may_not_bind_head_variables():
    """A guard that would instantiate a matched variable does not apply"""
    program = parse_program("p(X) <=> X = a | q.")
    assert successors(program, _state("p(Y)")) == []
    assert [t for _, t in successors(program, _state("p(a)"))] == [_state("q")]


def test_gcd_loops_on_zero(gcd_program):
    """gcd(0), gcd(1) reaches itself again"""
    derivation = explore(gcd_program, _state("gcd(0), gcd(1)"), fuel=20)
    assert derivation.cyclic
    assert derivation.exhausted


def test_runtime_error_in_guard(gcd_program):
    """A guard error blocks the rule instead of producing the error state"""
    assert successors(gcd_program, _state("gcd(1), gcd(a)")) == []


def test_trace_rendering(set_program):
    derivation = explore(set_program, _state("set([]), item(a)"))
    text = render_trace(derivation)
    assert "s0" in text and "set([a])" in text


def test_zigzag_corner_not_joinable_without_invariant(zigzag_program):
    """q(X) and r(X) are stuck for a variable argument"""
    assert obj_joinable(zigzag_program, _state("q(X)"), _state("r(X)")) == NOT_JOINABLE
    assert obj_joinable(zigzag_program, _state("q(1)"), _state("r(1)")) == JOINABLE
    assert obj_joinable(zigzag_program, _state("q(-1)"), _state("r(-1)")) == JOINABLE


def test_set_states_joinable_only_modulo_permutation(set_program):
    spec = parse_analysis_spec((SAMPLES / "set.cspec").read_text(encoding="utf-8"))
    solver = Solver(spec.types, invariant=spec.invariant, equiv=spec.equiv)
    left, right = _state("set([a,b])"), _state("set([b,a])")
    assert obj_joinable(set_program, left, right) == NOT_JOINABLE
    assert sim_equiv(left, right, solver)
    assert obj_joinable(set_program, left, right, solver) == JOINABLE


def test_invariant_membership():
    spec = parse_analysis_spec((SAMPLES / "zigzag.cspec").read_text(encoding="utf-8"))
    solver = Solver(spec.types, invariant=spec.invariant)
    assert inv_member(_state("p(3)"), solver)
    assert inv_member(_state("r(-1)"), solver)
    assert not inv_member(_state("p(X)"), solver)
    assert not inv_member(_state("p(1), q(1)"), solver)
