#!/usr/bin/env python3
"""
Tests for terms, substitutions, unification and canonical renaming
"""

import random

from core.parser import parse_term
from core.terms import (
    ERROR_STATE,
    FAILURE,
    FAILURE_STATE,
    Atom,
    Bag,
    Compound,
    Int,
    Proper,
    Var,
    apply,
    canonical_rename,
    canonical_store,
    make_list,
    make_state,
    match,
    unify,
    variants,
)

X, Y, Z = Var("X"), Var("Y"), Var("Z")


def test_unify_binds_both_sides():
    """Unifier makes both terms identical"""
    s = unify(parse_term("f(X, b)"), parse_term("f(a, Y)"))
    assert s.is_proper
    assert dict(s.bindings) == {X: Atom("a"), Y: Atom("b")}


def test_unify_occurs_check():
    """X and f(X) do not unify"""
    assert unify(X, Compound("f", (X,))) == FAILURE


def test_unify_clash():
    assert unify(parse_term("f(a)"), parse_term("g(a)")) == FAILURE
    assert unify(parse_term("[a|T]"), parse_term("[]")) == FAILURE


def test_match_is_one_way():
    """Matching never instantiates the target"""
    assert match(parse_term("p(X)"), parse_term("p(a)")) == {X: Atom("a")}
    assert match(parse_term("p(a)"), parse_term("p(X)")) is None
    assert match(parse_term("p(X, X)"), parse_term("p(a, b)")) is None


def test_apply_special_substitutions_to_states():
    """Failure absorbs a state; special states are unchanged"""
    state = make_state([parse_term("p(X)")])
    assert apply(FAILURE, state) == FAILURE_STATE
    assert apply(Proper({X: Int(1)}), state) == make_state([parse_term("p(1)")])
    assert apply(Proper({}), ERROR_STATE) == ERROR_STATE


def test_bag_substitution_merges_residual():
    """A residual bound to a bag is flattened into the enclosing bag"""
    s = Var("S")
    bag = Bag((parse_term("p(a)"),), s)
    merged = bag.substitute({s: Bag((parse_term("q(b)"),), Var("T"))})
    assert merged.items == (parse_term("p(a)"), parse_term("q(b)"))
    assert merged.rest == Var("T")


def test_variants_and_canonical_store():
    """Stores equal up to order and renaming have the same canonical form"""
    a = [parse_term("p(X, Y)"), parse_term("q(Y)")]
    b = [parse_term("q(B)"), parse_term("p(A, B)")]
    assert canonical_store(a) == canonical_store(b)
    assert variants(parse_term("f(X, Y)"), parse_term("f(U, V)"))
    assert not variants(parse_term("f(X, X)"), parse_term("f(U, V)"))


def test_long_chains_are_variants_of_their_reversal():
    """Order and renaming do not matter however many items share a shape"""
    chain = [Compound("p", (Var(f"V{i}"), Var(f"V{i + 1}"))) for i in range(8)]
    renamed = [Compound("p", (Var(f"W{i}"), Var(f"W{i + 1}"))) for i in range(8)]
    assert variants(chain, list(reversed(renamed)))
    assert canonical_store(chain) == canonical_store(reversed(chain))
    loose = [Compound("p", (Var(f"V{i}"),)) for i in range(12)]
    assert canonical_store(loose) == tuple(Compound("p", (Var(f"_{i}"),)) for i in range(12))
    broken = chain[:3] + [Compound("p", (Var("V4"), Var("V3")))] + chain[4:]
    assert not variants(chain, broken)


def test_make_state_identifies_renamings():
    assert make_state([parse_term("p(X)"), parse_term("p(Y)")]) == make_state(
        [parse_term("p(B)"), parse_term("p(A)")]
    )


def _random_term(rng: random.Random, depth: int = 3):
    choice = rng.random()
    if depth == 0 or choice < 0.3:
        return rng.choice([X, Y, Z, Var("W")])
    if choice < 0.5:
        return rng.choice([Atom("a"), Atom("b"), Int(rng.randint(0, 2))])
    if choice < 0.6:
        return make_list([_random_term(rng, depth - 1) for _ in range(rng.randint(0, 2))])
    functor = rng.choice(["f", "g"])
    return Compound(functor, tuple(_random_term(rng, depth - 1) for _ in range(rng.randint(1, 2))))


def test_unification_soundness_property():
    """Whenever a unifier is returned it equates the two terms"""
    rng = random.Random(1234)
    proper = 0
    for _ in range(1000):
        t1, t2 = _random_term(rng), _random_term(rng)
        s = unify(t1, t2)
        if s.is_proper:
            proper += 1
            assert t1.substitute(s.bindings) == t2.substitute(s.bindings)
            # idempotent
            for image in s.bindings.values():
                assert not set(image.variables()) & set(s.bindings)
    assert proper > 0


def test_canonical_rename_idempotence_property():
    rng = random.Random(99)
    for _ in range(300):
        term = _random_term(rng)
        once = canonical_rename(term)
        assert canonical_rename(once) == once
        store = [_random_term(rng) for _ in range(3)]
        assert canonical_rename(canonical_rename(store)) == canonical_rename(store)
