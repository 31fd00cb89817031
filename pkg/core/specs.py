"""
Analysis Spec Model
State patterns with typed residual slots, invariant and equivalence specs, and
pattern matching of stores against them
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Set, Tuple

from core.errors import SpecError
from core.metaterms import MetaConstraint, TypeOf, constraint_vars
from core.terms import Bag, Term, Var, format_term, match, term_vars
from core.types import MultisetOf, TypeExpr, TypeTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StatePattern:
    """{items} ++ rest where conditions"""

    items: Tuple[Term, ...]
    rest: Optional[Var] = None
    conditions: Tuple[MetaConstraint, ...] = ()

    @property
    def bag(self) -> Bag:
        return Bag(self.items, self.rest)

    def pattern_vars(self) -> List[Var]:
        found = term_vars(self.items)
        if self.rest is not None and self.rest not in found:
            found.append(self.rest)
        return found

    def substitute(self, bindings) -> "StatePattern":
        bag = self.bag.substitute(bindings)
        return StatePattern(
            bag.items, bag.rest, tuple(c.substitute(bindings) for c in self.conditions)
        )

    def __str__(self):
        conditions = ", ".join(str(c) for c in self.conditions)
        return f"{self.bag}" + (f" where {conditions}" if conditions else "")


@dataclass(frozen=True)
class EquivPair:
    left: StatePattern
    right: StatePattern
    conditions: Tuple[MetaConstraint, ...] = ()

    def pattern_vars(self) -> List[Var]:
        found = self.left.pattern_vars()
        found.extend(v for v in self.right.pattern_vars() if v not in found)
        return found

    def flipped(self) -> "EquivPair":
        return EquivPair(self.right, self.left, self.conditions)

    def __str__(self):
        conditions = ", ".join(str(c) for c in self.conditions)
        return f"{self.left.bag} ~ {self.right.bag}" + (f" where {conditions}" if conditions else "")


@dataclass(frozen=True)
class InvariantSpec:
    """Disjunction of state patterns; no patterns means every state"""

    patterns: Tuple[StatePattern, ...] = ()

    @property
    def trivial(self) -> bool:
        return not self.patterns


@dataclass(frozen=True)
class EquivSpec:
    """Generating pairs of the equivalence; no pairs means variance"""

    pairs: Tuple[EquivPair, ...] = ()

    @property
    def is_identity(self) -> bool:
        return not self.pairs

    def oriented(self) -> List[EquivPair]:
        """Pairs closed under symmetry, each orientation once"""
        result = []
        for pair in self.pairs:
            for candidate in (pair, pair.flipped()):
                if candidate not in result:
                    result.append(candidate)
        return result


IDENTITY = EquivSpec()
ALL_STATES = InvariantSpec()


@dataclass
class AnalysisSpec:
    types: TypeTable = field(default_factory=TypeTable)
    invariant: InvariantSpec = ALL_STATES
    equiv: EquivSpec = IDENTITY
    source: Optional[str] = None

    def without_equivalence(self) -> "AnalysisSpec":
        return AnalysisSpec(self.types, self.invariant, IDENTITY, self.source)


def check_pattern_vars(pattern_vars: List[Var], conditions: Tuple[MetaConstraint, ...], where: str):
    """Every metavariable of a condition must occur in the pattern"""
    known: Set[Var] = set(pattern_vars)
    for var in constraint_vars(conditions):
        if var not in known:
            raise SpecError(f"metavariable {var.name} in {where} does not occur in the pattern")


def residual_type(conditions: Tuple[MetaConstraint, ...], rest: Optional[Var], types: TypeTable) -> Optional[TypeExpr]:
    """Element type of the residual slot, if a multiset type is declared for it"""
    if rest is None:
        return None
    for c in conditions:
        if isinstance(c, TypeOf) and c.term == rest:
            resolved = types.resolve(c.type)
            if isinstance(resolved, MultisetOf):
                return resolved.item
    return None


def match_pattern(
    items: Tuple[Term, ...],
    rest: Optional[Var],
    store: Bag,
    bindings: Optional[Dict[Var, Term]] = None,
) -> Iterator[Dict[Var, Term]]:
    """
    Injective one-way matches of pattern items into the store

    Store items not used by the match are bound to the residual slot as a Bag
    (together with the store's own residual). Without a residual slot the match
    must use every store item. A residual slot that is already bound must receive
    the same multiset.
    """
    pattern_vars = set(term_vars(items))
    if rest is not None:
        pattern_vars.add(rest)
    yield from _match_items(list(items), rest, store, list(range(len(store.items))), dict(bindings or {}), pattern_vars)


def _match_items(pending, rest, store: Bag, free: List[int], bindings, pattern_vars) -> Iterator[Dict[Var, Term]]:
    if not pending:
        leftover = Bag(tuple(store.items[i] for i in free), store.rest)
        if rest is None:
            if not leftover.items and leftover.rest is None:
                yield bindings
            return
        bound = bindings.get(rest)
        if bound is None:
            result = dict(bindings)
            result[rest] = leftover
            yield result
        elif same_bag(bound, leftover):
            yield bindings
        return
    head, tail = pending[0], pending[1:]
    tried = []
    for position, index in enumerate(free):
        candidate = store.items[index]
        if candidate in tried:
            continue
        tried.append(candidate)
        extended = match(head, candidate, bindings, pattern_vars)
        if extended is None:
            continue
        remaining = free[:position] + free[position + 1 :]
        yield from _match_items(tail, rest, store, remaining, extended, pattern_vars)


def same_bag(a: Term, b: Term) -> bool:
    if not (isinstance(a, Bag) and isinstance(b, Bag)):
        return a == b
    if a.rest != b.rest:
        return False
    return sorted(format_term(t) for t in a.items) == sorted(format_term(t) for t in b.items)
