"""
Meta-Level Terms Module
Meta-constraints of the theory used to describe sets of object states, and
meta-level states <S, B> where M
"""

import logging
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Mapping, Optional, Tuple

from core.terms import Bag, Term, Var, format_term, term_vars
from core.types import TypeExpr

logger = logging.getLogger(__name__)


class MetaConstraint:
    """Base class of meta-level constraints"""

    def variables(self) -> Iterator[Var]:
        return iter(())

    def substitute(self, bindings: Mapping[Var, Term]) -> "MetaConstraint":
        return self


def _goals_text(goals: Tuple[Term, ...]) -> str:
    return ", ".join(format_term(g) for g in goals) if goals else "true"


@dataclass(frozen=True)
class Eq(MetaConstraint):
    left: Term
    right: Term

    def variables(self):
        yield from self.left.variables()
        yield from self.right.variables()

    def substitute(self, bindings):
        return Eq(self.left.substitute(bindings), self.right.substitute(bindings))

    def __str__(self):
        return f"{format_term(self.left)} == {format_term(self.right)}"


@dataclass(frozen=True)
class TypeOf(MetaConstraint):
    type: TypeExpr
    term: Term

    def variables(self):
        yield from self.term.variables()

    def substitute(self, bindings):
        return TypeOf(self.type, self.term.substitute(bindings))

    def __str__(self):
        return f"type({self.type}, {format_term(self.term)})"


@dataclass(frozen=True)
class Succeeds(MetaConstraint):
    """Executing goals succeeds without binding the protected variables"""

    goals: Tuple[Term, ...]
    protected: Tuple[Term, ...] = ()

    def variables(self):
        for goal in self.goals:
            yield from goal.variables()
        for term in self.protected:
            yield from term.variables()

    def substitute(self, bindings):
        return Succeeds(
            tuple(g.substitute(bindings) for g in self.goals),
            tuple(t.substitute(bindings) for t in self.protected),
        )

    def __str__(self):
        if self.protected:
            guarded = ",".join(format_term(t) for t in self.protected)
            return f"succeeds[{guarded}]({_goals_text(self.goals)})"
        return f"succeeds({_goals_text(self.goals)})"


@dataclass(frozen=True)
class Fails(MetaConstraint):
    goals: Tuple[Term, ...]

    def variables(self):
        for goal in self.goals:
            yield from goal.variables()

    def substitute(self, bindings):
        return Fails(tuple(g.substitute(bindings) for g in self.goals))

    def __str__(self):
        return f"fails({_goals_text(self.goals)})"


@dataclass(frozen=True)
class Errors(MetaConstraint):
    goals: Tuple[Term, ...]

    def variables(self):
        for goal in self.goals:
            yield from goal.variables()

    def substitute(self, bindings):
        return Errors(tuple(g.substitute(bindings) for g in self.goals))

    def __str__(self):
        return f"errors({_goals_text(self.goals)})"


@dataclass(frozen=True)
class FreshVars(MetaConstraint):
    """vars denote pairwise different variable names none of which occurs in scope"""

    vars: Tuple[Var, ...]
    scope: Tuple[Term, ...] = ()

    def variables(self):
        yield from self.vars
        for term in self.scope:
            yield from term.variables()

    def substitute(self, bindings):
        return FreshVars(
            tuple(v.substitute(bindings) for v in self.vars),
            tuple(t.substitute(bindings) for t in self.scope),
        )

    def __str__(self):
        names = ",".join(format_term(v) for v in self.vars)
        scope = ",".join(format_term(t) for t in self.scope)
        return f"freshVars([{names}], [{scope}])"


@dataclass(frozen=True)
class Perm(MetaConstraint):
    """Both terms are lists and one is a permutation of the other"""

    left: Term
    right: Term

    def variables(self):
        yield from self.left.variables()
        yield from self.right.variables()

    def substitute(self, bindings):
        return Perm(self.left.substitute(bindings), self.right.substitute(bindings))

    def __str__(self):
        return f"perm({format_term(self.left)}, {format_term(self.right)})"


@dataclass(frozen=True)
class Inv(MetaConstraint):
    """The store denotes a state of the invariant"""

    store: Bag

    def variables(self):
        yield from self.store.variables()

    def substitute(self, bindings):
        return Inv(self.store.substitute(bindings))

    def __str__(self):
        return f"inv({self.store})"


@dataclass(frozen=True)
class Equiv(MetaConstraint):
    left: Bag
    right: Bag

    def variables(self):
        yield from self.left.variables()
        yield from self.right.variables()

    def substitute(self, bindings):
        return Equiv(self.left.substitute(bindings), self.right.substitute(bindings))

    def __str__(self):
        return f"equiv({self.left}, {self.right})"


MODAL_KINDS = (Succeeds, Fails, Errors)


def constraint_vars(constraints: Iterable[MetaConstraint]):
    seen = {}
    for c in constraints:
        for v in c.variables():
            seen.setdefault(v, None)
    return list(seen)


def format_where(constraints: Iterable[MetaConstraint]) -> str:
    rendered = [str(c) for c in constraints]
    return " /\\ ".join(rendered) if rendered else "true"


# Classification of a meta-level state
PROPER = "proper"
FAILED = "failed"
ERROR = "error"
MIXED = "mixed"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class MetaState:
    """<S, B> where M; S is a multiset of constraints with an optional residual metavariable"""

    store: Bag
    pending: Tuple[Term, ...] = ()
    where: Tuple[MetaConstraint, ...] = ()
    status: str = PROPER

    @property
    def items(self) -> Tuple[Term, ...]:
        return self.store.items

    @property
    def rest(self) -> Optional[Var]:
        return self.store.rest

    @property
    def is_reduced(self) -> bool:
        return not self.pending

    @property
    def is_proper(self) -> bool:
        return self.status == PROPER

    def variables(self):
        yield from self.store.variables()
        for goal in self.pending:
            yield from goal.variables()
        for c in self.where:
            yield from c.variables()

    def store_vars(self):
        return term_vars([self.store] + list(self.pending))

    def substitute(self, bindings: Mapping[Var, Term]) -> "MetaState":
        return replace(
            self,
            store=self.store.substitute(bindings),
            pending=tuple(g.substitute(bindings) for g in self.pending),
            where=tuple(c.substitute(bindings) for c in self.where),
        )

    def constrain(self, *constraints: MetaConstraint) -> "MetaState":
        added = tuple(c for c in constraints if c not in self.where)
        return replace(self, where=self.where + added)

    def __str__(self):
        if self.status in (FAILED, ERROR):
            return self.status
        pending = _goals_text(self.pending)
        text = f"<{self.store} | {pending}> where {format_where(self.where)}"
        return text if self.status == PROPER else f"{text} [{self.status}]"


def meta_state(items: Iterable[Term], rest: Optional[Var] = None, pending=(), where=()) -> MetaState:
    return MetaState(Bag(tuple(items), rest), tuple(pending), tuple(where))


FAILED_META = MetaState(Bag(()), status=FAILED)
ERROR_META = MetaState(Bag(()), status=ERROR)
