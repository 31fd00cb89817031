"""
Type Descriptors Module
Regular tree types used by type/2 meta-constraints: base types, lists, multisets of
constraint patterns and unions of ground-term patterns
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple, Union

from core.errors import SpecError
from core.terms import EMPTY_LIST, Atom, Bag, Compound, Float, Int, ListCell, Term, VarName, list_items

logger = logging.getLogger(__name__)

# child -> parent; siblings under the same parent are disjoint
BASE_PARENTS: Dict[str, Optional[str]] = {
    "any": None,
    "var": "any",
    "nonvar": "any",
    "const": "nonvar",
    "num": "nonvar",
    "int": "num",
    "natural": "int",
    "positive_int": "natural",
}

NUMERIC_TYPES = ("num", "int", "natural", "positive_int")


class TypeExpr:
    """Base class of type descriptors"""


@dataclass(frozen=True)
class BaseType(TypeExpr):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Named(TypeExpr):
    """Reference to a user type defined with `type Name = ...`"""

    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class ListOf(TypeExpr):
    elem: TypeExpr

    def __str__(self):
        return f"list({self.elem})"


@dataclass(frozen=True)
class Shape(TypeExpr):
    """Compound pattern whose arguments are types or literal terms"""

    functor: str
    args: Tuple[Union[TypeExpr, Term], ...]

    def __str__(self):
        return f"{self.functor}({','.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class Literal(TypeExpr):
    """A single ground term"""

    term: Term

    def __str__(self):
        return str(self.term)


@dataclass(frozen=True)
class MultisetOf(TypeExpr):
    item: TypeExpr

    def __str__(self):
        return f"multiset({self.item})"


@dataclass(frozen=True)
class UnionOf(TypeExpr):
    alternatives: Tuple[TypeExpr, ...]

    def __str__(self):
        return " ; ".join(str(a) for a in self.alternatives)


ANY = BaseType("any")
VAR = BaseType("var")


def _base_ancestors(name: str) -> Iterable[str]:
    current: Optional[str] = name
    while current is not None:
        yield current
        current = BASE_PARENTS[current]


def base_subtype(a: str, b: str) -> bool:
    return b in _base_ancestors(a)


def literal_base(term: Term) -> str:
    """Most specific base type of a ground literal"""
    if isinstance(term, VarName):
        return "var"
    if isinstance(term, Int):
        if term.value >= 1:
            return "positive_int"
        return "natural" if term.value == 0 else "int"
    if isinstance(term, Float):
        return "num"
    if isinstance(term, Atom) and term != EMPTY_LIST:
        return "const"
    return "nonvar"


class TypeTable:
    """User type definitions plus the subtype/disjointness lattice"""

    def __init__(self, defs: Optional[Dict[str, TypeExpr]] = None):
        self.defs: Dict[str, TypeExpr] = dict(defs or {})

    def define(self, name: str, expr: TypeExpr):
        if name in BASE_PARENTS:
            raise SpecError(f"cannot redefine base type {name}")
        self.defs[name] = expr

    def knows(self, name: str) -> bool:
        return name in BASE_PARENTS or name in self.defs

    def lookup(self, name: str) -> TypeExpr:
        if name in BASE_PARENTS:
            return BaseType(name)
        if name in self.defs:
            return self.defs[name]
        raise SpecError(f"unknown type {name}")

    def resolve(self, expr: TypeExpr) -> TypeExpr:
        seen = set()
        while isinstance(expr, Named):
            if expr.name in seen:
                raise SpecError(f"type {expr.name} is defined in terms of itself")
            seen.add(expr.name)
            expr = self.lookup(expr.name)
        return expr

    def validate(self, expr: TypeExpr):
        """Raise SpecError for references to unknown types"""
        expr = self.resolve(expr)
        if isinstance(expr, ListOf):
            self.validate(expr.elem)
        elif isinstance(expr, MultisetOf):
            self.validate(expr.item)
        elif isinstance(expr, Shape):
            for arg in expr.args:
                if isinstance(arg, TypeExpr):
                    self.validate(arg)
        elif isinstance(expr, UnionOf):
            for alt in expr.alternatives:
                self.validate(alt)

    # -- lattice ---------------------------------------------------------

    def _top(self, expr: TypeExpr) -> str:
        """Base type every member of expr belongs to"""
        expr = self.resolve(expr)
        if isinstance(expr, BaseType):
            return expr.name
        if isinstance(expr, Literal):
            return literal_base(expr.term)
        if isinstance(expr, (ListOf, Shape)):
            return "nonvar"
        if isinstance(expr, UnionOf):
            tops = {self._top(alt) for alt in expr.alternatives}
            return tops.pop() if len(tops) == 1 else "any"
        return "any"

    def subtype(self, a: TypeExpr, b: TypeExpr) -> bool:
        """True only when every member of a is a member of b"""
        a = self.resolve(a)
        b = self.resolve(b)
        if a == b or b == ANY:
            return True
        if isinstance(a, UnionOf):
            return all(self.subtype(alt, b) for alt in a.alternatives)
        if isinstance(b, UnionOf):
            return any(self.subtype(a, alt) for alt in b.alternatives)
        if isinstance(b, BaseType):
            if isinstance(a, MultisetOf):
                return False
            return base_subtype(self._top(a), b.name)
        if isinstance(a, ListOf) and isinstance(b, ListOf):
            return self.subtype(a.elem, b.elem)
        if isinstance(a, MultisetOf) and isinstance(b, MultisetOf):
            return self.subtype(a.item, b.item)
        if isinstance(a, Shape) and isinstance(b, Shape):
            if a.functor != b.functor or len(a.args) != len(b.args):
                return False
            return all(self._arg_subtype(x, y) for x, y in zip(a.args, b.args))
        if isinstance(a, Literal):
            return self.member(a.term, b) is True
        return False

    def _arg_subtype(self, x, y) -> bool:
        x = x if isinstance(x, TypeExpr) else Literal(x)
        y = y if isinstance(y, TypeExpr) else Literal(y)
        return self.subtype(x, y)

    def disjoint(self, a: TypeExpr, b: TypeExpr) -> bool:
        """True only when no term belongs to both types"""
        a = self.resolve(a)
        b = self.resolve(b)
        if a == ANY or b == ANY:
            return False
        if isinstance(a, UnionOf):
            return all(self.disjoint(alt, b) for alt in a.alternatives)
        if isinstance(b, UnionOf):
            return all(self.disjoint(a, alt) for alt in b.alternatives)
        if isinstance(a, MultisetOf) or isinstance(b, MultisetOf):
            return not (isinstance(a, MultisetOf) and isinstance(b, MultisetOf))
        if isinstance(a, Literal) and isinstance(b, Literal):
            return a.term != b.term
        if isinstance(a, Literal):
            return self.member(a.term, b) is False
        if isinstance(b, Literal):
            return self.member(b.term, a) is False
        if isinstance(a, BaseType) and isinstance(b, BaseType):
            return not (base_subtype(a.name, b.name) or base_subtype(b.name, a.name))
        if isinstance(a, BaseType) or isinstance(b, BaseType):
            base, other = (a, b) if isinstance(a, BaseType) else (b, a)
            # lists and shapes are nonvar terms that are neither constants nor numbers
            return base.name in ("var", "const") or base.name in NUMERIC_TYPES
        if isinstance(a, ListOf) and isinstance(b, ListOf):
            return False
        if isinstance(a, Shape) and isinstance(b, Shape):
            if a.functor != b.functor or len(a.args) != len(b.args):
                return True
            return any(self._arg_disjoint(x, y) for x, y in zip(a.args, b.args))
        return isinstance(a, ListOf) != isinstance(b, ListOf)

    def _arg_disjoint(self, x, y) -> bool:
        x = x if isinstance(x, TypeExpr) else Literal(x)
        y = y if isinstance(y, TypeExpr) else Literal(y)
        return self.disjoint(x, y)

    # -- ground membership -------------------------------------------------

    def member(self, term: Term, expr: TypeExpr) -> Optional[bool]:
        """
        Membership of a ground meta-level term (variables named by VarName)

        Returns None if the term still contains metavariables at a position
        that decides membership.
        """
        expr = self.resolve(expr)
        if isinstance(expr, UnionOf):
            results = [self.member(term, alt) for alt in expr.alternatives]
            if any(r is True for r in results):
                return True
            return False if all(r is False for r in results) else None
        if isinstance(expr, Literal):
            if term.is_ground:
                return term == expr.term
            return None
        if isinstance(expr, BaseType):
            if expr.name == "any":
                return True
            if not term.is_ground and not _decided_by_functor(term):
                return None
            return base_subtype(literal_base(term), expr.name)
        if isinstance(expr, ListOf):
            items, tail = list_items(term)
            results = [self.member(item, expr.elem) for item in items]
            if tail != EMPTY_LIST:
                if tail.is_ground:
                    results.append(False)
                else:
                    results.append(None)
            return _all3(results)
        if isinstance(expr, Shape):
            if not isinstance(term, Compound):
                return None if not term.is_ground and not _decided_by_functor(term) else False
            if term.functor != expr.functor or len(term.args) != len(expr.args):
                return False
            results = []
            for arg, slot in zip(term.args, expr.args):
                slot_type = slot if isinstance(slot, TypeExpr) else Literal(slot)
                results.append(self.member(arg, slot_type))
            return _all3(results)
        if isinstance(expr, MultisetOf):
            if not isinstance(term, Bag):
                return False
            results = [self.member(item, expr.item) for item in term.items]
            if term.rest is not None:
                results.append(None)
            return _all3(results)
        return None


def _decided_by_functor(term: Term) -> bool:
    """Non-ground terms whose principal symbol already fixes their base type"""
    return isinstance(term, (Compound, ListCell))


def _all3(results) -> Optional[bool]:
    if any(r is False for r in results):
        return False
    if all(r is True for r in results):
        return True
    return None
