"""
Meta-Level States Module
Lifting object entities to constrained meta-terms, denotation of ground meta-terms,
covering samples, symbolic reduction of pending built-ins and meta-level transitions
"""

import itertools
import logging
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from core.builtins import BuiltinTable, default_table
from core.errors import ContractError
from core.metaterms import (
    ERROR,
    ERROR_META,
    FAILED,
    FAILED_META,
    MIXED,
    PROPER,
    UNKNOWN,
    FreshVars,
    MetaConstraint,
    MetaState,
    Succeeds,
    TypeOf,
    constraint_vars,
    meta_state,
)
from core.program import Program, Rule, fresh_variant, local_vars
from core.solver import ERRORS, FAILS, PROVED, SUCCEEDS, Solver, Universe, denote_term
from core.terms import (
    ERROR_STATE,
    FAILURE_STATE,
    Atom,
    Bag,
    Compound,
    State,
    Term,
    Var,
    apply,
    canonical_store,
    make_state,
    match,
    signature,
    term_vars,
)

logger = logging.getLogger(__name__)

_lift_counter = itertools.count(1)


def lift(e: Union[Term, Rule, Sequence[Term]]) -> Tuple[object, Dict[Var, Var]]:
    """
    Replace object variables consistently by fresh metavariables

    Returns:
        The lifted entity and the mapping from object variables to metavariables
    """
    if isinstance(e, Rule):
        variables = term_vars(e.heads + e.guard + e.body)
    elif isinstance(e, Term):
        variables = term_vars(e)
    else:
        variables = term_vars(list(e))
    suffix = next(_lift_counter)
    mapping = {v: Var(f"{v.name.lower()}^{suffix}") for v in variables}
    if isinstance(e, (Rule, Term)):
        return e.substitute(mapping), mapping
    return tuple(t.substitute(mapping) for t in e), mapping


def lift_state(goals: Sequence[Term]) -> MetaState:
    lifted, mapping = lift(goals)
    where = (FreshVars(tuple(mapping.values()), ()),) if mapping else ()
    return meta_state(lifted, where=where)


def denote(g: Union[Term, MetaState], builtins: Optional[BuiltinTable] = None):
    """
    Object entity named by a ground meta-term

    A ground meta-state denotes its store with the execution of its pending
    built-ins applied, which may be the failure or the error state.
    """
    if isinstance(g, MetaState):
        if g.status == FAILED:
            return FAILURE_STATE
        if g.status == ERROR:
            return ERROR_STATE
        if g.store.rest is not None or not all(t.is_ground for t in g.items + g.pending):
            raise ContractError(f"cannot denote the non-ground meta-state {g}")
        items = [denote_term(t) for t in g.items]
        pending = [denote_term(t) for t in g.pending]
        outcome = (builtins or default_table()).exe_seq(pending)
        result = apply(outcome, items)
        return make_state(result) if outcome.is_proper else result
    if not g.is_ground:
        raise ContractError(f"cannot denote the non-ground meta-term {g}")
    return denote_term(g)


def cover_sample(
    ms: MetaState,
    solver: Solver,
    universe: Universe,
    limit: int = 4000,
) -> Set[State]:
    """Denotations of every grounding of the meta-state drawn from the universe"""
    metavars = [v for v in constraint_vars(ms.where) if v != ms.rest]
    for v in term_vars(list(ms.items) + list(ms.pending)):
        if v not in metavars:
            metavars.append(v)
    bag_vars = [ms.rest] if ms.rest is not None else []
    found: Set[State] = set()
    for grounding in solver.groundings(ms.where, universe, metavars + bag_vars, bag_vars, limit):
        found.add(denote(ms.substitute(grounding), solver.builtins))
    return found


def reduce(ms: MetaState, solver: Solver) -> MetaState:
    """
    Discharge pending built-ins whose outcome is decided under the constraints

    Succeeding built-ins with a computable binding are threaded into the store;
    a certain failure or error yields the special meta-state; anything else stops
    with the remaining built-ins pending and the status mixed or unknown.
    """
    if not ms.is_proper:
        return ms
    ctx = solver.context(ms.where)
    store = ms.store
    pending = list(ms.pending)
    while pending:
        goal = pending[0]
        outcomes, bindings = solver.modal_eval(goal, ctx)
        if outcomes == frozenset({SUCCEEDS}) and bindings is not None:
            store = store.substitute(bindings)
            pending = [g.substitute(bindings) for g in pending[1:]]
            continue
        if outcomes == frozenset({FAILS}):
            return FAILED_META
        if outcomes == frozenset({ERRORS}):
            return ERROR_META
        status = MIXED if SUCCEEDS in outcomes and len(outcomes) > 1 else UNKNOWN
        return MetaState(store, tuple(pending), ms.where, status)
    return MetaState(store, (), ms.where, PROPER)


def strengthen(
    where: Sequence[MetaConstraint], fresh: Sequence[Var], scope: Sequence[Term]
) -> Tuple[MetaConstraint, ...]:
    """Record that metavariables introduced by a transition denote fresh variables"""
    if not fresh:
        return tuple(where)
    extra = FreshVars(tuple(fresh), tuple(scope))
    return tuple(where) if extra in where else tuple(where) + (extra,)


def meta_successors(
    ms: MetaState, program: Program, solver: Solver, builtins: Optional[BuiltinTable] = None
) -> List[Tuple[str, MetaState]]:
    """
    Meta-level transitions of a reduced proper meta-state

    A rule applies when its heads match distinct store items and the guard provably
    succeeds without binding the matched heads; the successor carries the guard as
    pending built-ins and is reduced. Every built-in in the store steps on its own.
    """
    if not ms.is_proper or not ms.is_reduced:
        return []
    table = builtins or solver.builtins
    store = ms.items
    result: List[Tuple[str, MetaState]] = []
    for rule in program.rules:
        variant = fresh_variant(rule, "m")
        heads = variant.heads
        if len(heads) > len(store):
            continue
        rule_vars = set(term_vars(heads + variant.guard + variant.body))
        locals_ = local_vars(variant)
        seen_keys = set()
        for positions in itertools.permutations(range(len(store)), len(heads)):
            matcher: Optional[Dict[Var, Term]] = {}
            for head, index in zip(heads, positions):
                matcher = match(head, store[index], matcher, rule_vars)
                if matcher is None:
                    break
            if matcher is None:
                continue
            key = tuple(store[i] for i in positions)
            if key in seen_keys:
                continue
            seen_keys.add(key)
            matched = [store[i] for i in positions]
            scope = list(store) + ([ms.rest] if ms.rest is not None else [])
            where = strengthen(ms.where, locals_, scope)
            guard = tuple(g.substitute(matcher) for g in variant.guard)
            if guard and solver.entails(where, Succeeds(guard, tuple(matched))) != PROVED:
                continue
            kept = tuple(matched[: len(variant.kept)])
            body = tuple(t.substitute(matcher) for t in variant.body)
            rest = tuple(t for i, t in enumerate(store) if i not in positions)
            successor = MetaState(Bag(kept + body + rest, ms.rest), guard, where)
            result.append((rule.label, reduce(successor, solver)))
    for index, item in enumerate(store):
        if not table.is_builtin(item):
            continue
        rest = store[:index] + store[index + 1 :]
        successor = MetaState(Bag(rest, ms.rest), (item,), ms.where)
        name, arity = signature(item)
        result.append((f"{name}/{arity}", reduce(successor, solver)))
    return result


def variant_key(ms: MetaState, fixed: Iterable[Var] = ()) -> Tuple:
    """
    Canonical key of a meta-state up to renaming of non-fixed metavariables

    Constraints on metavariables that no longer occur in the state are dropped;
    type and freshness constraints on renamable ones are kept as marker items.
    """
    if ms.status in (FAILED, ERROR):
        return (ms.status,)
    keep = set(fixed)
    used = set(ms.store_vars())
    markers: List[Term] = []
    for c in ms.where:
        if isinstance(c, TypeOf) and isinstance(c.term, Var) and c.term in used and c.term not in keep:
            markers.append(Compound("$type", (Atom(str(c.type)), c.term)))
        elif isinstance(c, FreshVars):
            for v in c.vars:
                if isinstance(v, Var) and v in used and v not in keep:
                    markers.append(Compound("$fresh", (v,)))
    items = list(ms.items) + markers
    if ms.rest is not None:
        items.append(Compound("$rest", (ms.rest,)))
    pending = tuple(ms.pending)
    if pending:
        items.append(Compound("$pending", pending))
    return (ms.status, canonical_store(list(dict.fromkeys(items)), keep))


def variants(ms1: MetaState, ms2: MetaState, fixed: Iterable[Var] = ()) -> bool:
    """Sound syntactic test that two meta-states cover the same object states"""
    keep = tuple(fixed)
    return variant_key(ms1, keep) == variant_key(ms2, keep)


def undecided_guards(ms: MetaState, program: Program, solver: Solver) -> List[Term]:
    """
    Comparisons whose outcome blocks progress from a meta-state

    These come from the pending built-ins of a mixed state and from the guards of
    rules whose heads match but whose guard success is not provable.
    """
    found: List[Term] = []
    ctx = solver.context(ms.where)
    if ms.pending:
        candidate = solver.modal_seq(ms.pending, ctx).undecided
        if candidate is not None:
            found.append(candidate)
        return found
    if not ms.is_proper:
        return found
    store = ms.items
    for rule in program.rules:
        variant = fresh_variant(rule, "u")
        if not variant.guard or len(variant.heads) > len(store):
            continue
        rule_vars = set(term_vars(variant.heads + variant.guard + variant.body))
        scope = list(store) + ([ms.rest] if ms.rest is not None else [])
        local_ctx = solver.context(strengthen(ms.where, local_vars(variant), scope))
        for positions in itertools.permutations(range(len(store)), len(variant.heads)):
            matcher: Optional[Dict[Var, Term]] = {}
            for head, index in zip(variant.heads, positions):
                matcher = match(head, store[index], matcher, rule_vars)
                if matcher is None:
                    break
            if matcher is None:
                continue
            guard = tuple(g.substitute(matcher) for g in variant.guard)
            candidate = solver.modal_seq(guard, local_ctx).undecided
            if candidate is not None and candidate not in found:
                found.append(candidate)
    return found
