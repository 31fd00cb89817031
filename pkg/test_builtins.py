#!/usr/bin/env python3
"""
Tests for built-in execution
"""

import random

import pytest

from core.builtins import default_table, exe, exe_seq
from core.errors import UnknownBuiltinError
from core.parser import parse_query, parse_term
from core.terms import ERROR, FAILURE, Int, Proper, Var

X, Y = Var("X"), Var("Y")


def test_order_of_arithmetic_matters():
    """Evaluating an unbound variable is an error; binding it first makes it succeed"""
    assert exe_seq(parse_query("X is Y + 1, Y = 2")) == ERROR
    assert exe_seq(parse_query("Y = 2, X is Y + 1")) == Proper({Y: Int(2), X: Int(3)})


def test_comparisons():
    assert exe(parse_term("1 < 2")).is_proper
    assert exe(parse_term("2 < 1")) == FAILURE
    assert exe(parse_term("X < 1")) == ERROR
    assert exe(parse_term("a =< 1")) == ERROR
    assert exe(parse_term("3 =:= 1 + 2")).is_proper


def test_unification_and_type_tests():
    assert exe(parse_term("f(X) = f(a)")) == Proper({X: parse_term("a")})
    assert exe(parse_term("a = b")) == FAILURE
    assert exe(parse_term("var(X)")).is_proper
    assert exe(parse_term("nonvar(X)")) == FAILURE
    assert exe(parse_term("X == X")).is_proper
    assert exe(parse_term("X == Y")) == FAILURE


def test_is_with_bound_left_side():
    assert exe(parse_term("3 is 1 + 2")).is_proper
    assert exe(parse_term("4 is 1 + 2")) == FAILURE
    assert exe(parse_term("X is a")) == ERROR


def test_overflowing_arithmetic_is_an_error():
    huge = "1" + "0" * 400
    assert exe(parse_term(f"X is {huge} / 3")) == ERROR
    assert exe(parse_term(f"X is {huge} * 1.5")) == ERROR
    assert exe(parse_term(f"1 < {huge} + 0.5")) == ERROR
    assert exe(parse_term(f"X is {huge} // {huge}")) == Proper({X: Int(1)})


def test_select_rejects_unknown_names():
    table = default_table()
    assert [b.name for b in table.select(["is", "="])] == ["is", "="]
    with pytest.raises(UnknownBuiltinError):
        table.select(["frobnicate"])


_GOALS = [
    "X = 1",
    "Y = 2",
    "X = a",
    "X is Y + 1",
    "Y is 2 * 3",
    "X < 2",
    "Y >= 1",
    "var(X)",
    "nonvar(Y)",
    "X == Y",
    "1 =< 0",
]


def test_absorption_property():
    """Once a sequence fails or errors, appending built-ins never changes the outcome"""
    rng = random.Random(7)
    goals = [parse_term(g) for g in _GOALS]
    special = 0
    for _ in range(500):
        prefix = [rng.choice(goals) for _ in range(rng.randint(1, 4))]
        outcome = exe_seq(prefix)
        if outcome.is_proper:
            continue
        special += 1
        suffix = [rng.choice(goals) for _ in range(rng.randint(1, 3))]
        assert exe_seq(prefix + suffix) == outcome
    assert special > 0
