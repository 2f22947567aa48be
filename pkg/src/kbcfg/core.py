"""Vocabularies, three-valued partial structures and their semantics.

A partial structure stores, for every predicate and function symbol, a dense
three-valued table over the cross product of the declared domains. Function
symbols use graph tables: the key is the argument tuple extended with a
candidate result value. Structures are immutable by convention; every
operation that "changes" one returns a fresh value.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from . import fol
from .errors import (
    ConflictingAssignment,
    IncomparableStructures,
    KbcfgError,
    RangeExceeded,
    StructureNotTotal,
    UnknownTerm,
)

Element = Union[str, int]

INT = "int"


class Truth(enum.Enum):
    TRUE = "T"
    FALSE = "F"
    UNKNOWN = "U"

    def negate(self) -> "Truth":
        if self is Truth.TRUE:
            return Truth.FALSE
        if self is Truth.FALSE:
            return Truth.TRUE
        return Truth.UNKNOWN

    def __repr__(self):
        return self.value


T, F, U = Truth.TRUE, Truth.FALSE, Truth.UNKNOWN


def truth_leq(a: Truth, b: Truth) -> bool:
    """Precision order on truth values: U below both, T and F incomparable."""
    return a is U or a is b


def truth_and(a: Truth, b: Truth) -> Truth:
    if a is F or b is F:
        return F
    if a is T and b is T:
        return T
    return U


def truth_or(a: Truth, b: Truth) -> Truth:
    if a is T or b is T:
        return T
    if a is F and b is F:
        return F
    return U


class Undefined:
    """Result of min/max over a set that is determined to be empty."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"


UNDEFINED = Undefined()


# ------------------------------------------------------------ vocabulary


@dataclass(frozen=True)
class PredDecl:
    name: str
    arg_types: Tuple[str, ...]


@dataclass(frozen=True)
class FuncDecl:
    name: str
    arg_types: Tuple[str, ...]
    result: str


class Vocabulary:
    """Type, predicate and function symbols with typed signatures.

    The integer type is built in; using it in a signature requires a declared
    finite range. All symbol names share one namespace so that concrete syntax
    stays unambiguous.
    """

    def __init__(
        self,
        types: Sequence[str],
        predicates: Sequence[PredDecl],
        functions: Sequence[FuncDecl],
        int_range: Optional[Tuple[int, int]] = None,
    ):
        self.types = tuple(types)
        self.predicates = tuple(predicates)
        self.functions = tuple(functions)
        self.int_range = int_range

        seen = set()
        for name in self.types + (INT,):
            if name in seen and name != INT:
                raise KbcfgError(f"duplicate type {name}")
            seen.add(name)
        for decl in self.predicates + self.functions:
            if decl.name in seen:
                raise KbcfgError(f"duplicate symbol {decl.name}")
            seen.add(decl.name)

        known_types = set(self.types) | {INT}
        for decl in self.predicates:
            for t in decl.arg_types:
                if t not in known_types:
                    raise KbcfgError(f"unknown type {t} in predicate {decl.name}")
        for decl in self.functions:
            for t in decl.arg_types + (decl.result,):
                if t not in known_types:
                    raise KbcfgError(f"unknown type {t} in function {decl.name}")
        if int_range is not None and int_range[0] > int_range[1]:
            raise KbcfgError("empty integer range")

        self._preds = {d.name: d for d in self.predicates}
        self._funcs = {d.name: d for d in self.functions}

    def is_pred(self, name: str) -> bool:
        return name in self._preds

    def is_func(self, name: str) -> bool:
        return name in self._funcs

    def pred(self, name: str) -> PredDecl:
        return self._preds[name]

    def func(self, name: str) -> FuncDecl:
        return self._funcs[name]

    def symbols(self) -> Tuple[str, ...]:
        return tuple(d.name for d in self.predicates) + tuple(d.name for d in self.functions)

    def uses_int(self) -> bool:
        for d in self.predicates:
            if INT in d.arg_types:
                return True
        for d in self.functions:
            if INT in d.arg_types or d.result == INT:
                return True
        return False

    def __eq__(self, other):
        return (
            isinstance(other, Vocabulary)
            and self.types == other.types
            and self.predicates == other.predicates
            and self.functions == other.functions
            and self.int_range == other.int_range
        )


# ------------------------------------------------------------- structure


@dataclass(frozen=True)
class DomainTerm:
    """A symbol applied to concrete domain elements (a configuration parameter)."""

    symbol: str
    args: Tuple[Element, ...] = ()

    def __str__(self):
        if not self.args:
            return self.symbol
        return f"{self.symbol}({','.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class Assignment:
    """Choice of a value for a domain term; predicate atoms take True/False."""

    term: DomainTerm
    value: Union[Element, bool]

    def __str__(self):
        if self.value is True:
            return str(self.term)
        if self.value is False:
            return f"~{self.term}"
        return f"{self.term}={self.value}"


ParameterSet = Tuple[DomainTerm, ...]


class PartialStructure:
    """Finite domains per type plus a three-valued table per symbol."""

    def __init__(
        self,
        vocab: Vocabulary,
        domains: Dict[str, Sequence[Element]],
        tables: Optional[Dict[str, Dict[tuple, Truth]]] = None,
        _validated: bool = False,
    ):
        self.vocab = vocab
        self.domains = {ty: tuple(elems) for ty, elems in domains.items()}
        if vocab.int_range is not None and INT not in self.domains:
            lo, hi = vocab.int_range
            self.domains[INT] = tuple(range(lo, hi + 1))

        for ty, elems in self.domains.items():
            if not elems:
                raise KbcfgError(f"empty domain for type {ty}")

        if _validated and tables is not None:
            self.tables = tables
            return

        self.tables = {}
        given = tables or {}
        for sym in vocab.symbols():
            table = {}
            overlay = given.get(sym, {})
            for key in self._keys(sym):
                table[key] = overlay.get(key, U)
            self.tables[sym] = table
        self._check_functional_consistency()

    # --- table shape helpers

    def _domains_of(self, types: Iterable[str]) -> List[Tuple[Element, ...]]:
        out = []
        for ty in types:
            if ty not in self.domains:
                raise KbcfgError(f"no domain declared for type {ty}")
            out.append(self.domains[ty])
        return out

    def _keys(self, sym: str):
        if self.vocab.is_pred(sym):
            decl = self.vocab.pred(sym)
            return itertools.product(*self._domains_of(decl.arg_types))
        decl = self.vocab.func(sym)
        return itertools.product(*self._domains_of(decl.arg_types + (decl.result,)))

    def func_rows(self, sym: str):
        """Yield (args, [(value, truth), ...]) for every row of a function table."""
        decl = self.vocab.func(sym)
        table = self.tables[sym]
        results = self.domains[decl.result]
        for args in itertools.product(*self._domains_of(decl.arg_types)):
            yield args, [(v, table[args + (v,)]) for v in results]

    def _check_functional_consistency(self):
        for decl in self.vocab.functions:
            for args, row in self.func_rows(decl.name):
                trues = [v for v, tv in row if tv is T]
                if len(trues) > 1:
                    raise ConflictingAssignment(f"{decl.name}{args} maps to {trues}")
                if all(tv is F for _, tv in row):
                    raise ConflictingAssignment(f"{decl.name}{args} has no possible value")

    # --- lookups

    def pred_value(self, sym: str, args: Tuple[Element, ...]) -> Truth:
        try:
            return self.tables[sym][args]
        except KeyError:
            raise UnknownTerm(f"{sym}{args}") from None

    def graph_value(self, sym: str, args: Tuple[Element, ...], value: Element) -> Truth:
        try:
            return self.tables[sym][args + (value,)]
        except KeyError:
            raise UnknownTerm(f"{sym}{args}={value}") from None

    def term_kind(self, term: DomainTerm) -> str:
        if self.vocab.is_pred(term.symbol):
            return "pred"
        if self.vocab.is_func(term.symbol):
            return "func"
        raise UnknownTerm(term.symbol)

    def result_values(self, term: DomainTerm) -> Tuple[Union[Element, bool], ...]:
        """The candidate values of a domain term: True/False or the result domain."""
        if self.term_kind(term) == "pred":
            return (True, False)
        return self.domains[self.vocab.func(term.symbol).result]

    def assignment_value(self, a: Assignment) -> Truth:
        """Truth of (a.term = a.value) in this structure."""
        if self.term_kind(a.term) == "pred":
            tv = self.pred_value(a.term.symbol, a.term.args)
            return tv if a.value is True else tv.negate()
        return self.graph_value(a.term.symbol, a.term.args, a.value)

    def forced_value(self, term: DomainTerm):
        """The unique value this structure forces for `term`, or None."""
        if self.term_kind(term) == "pred":
            tv = self.pred_value(term.symbol, term.args)
            if tv is U:
                return None
            return tv is T
        table = self.tables[term.symbol]
        decl = self.vocab.func(term.symbol)
        possible = []
        for v in self.domains[decl.result]:
            tv = table.get(term.args + (v,))
            if tv is None:
                raise UnknownTerm(str(term))
            if tv is T:
                return v
            if tv is U:
                possible.append(v)
        if len(possible) == 1:
            return possible[0]
        return None

    def is_uninterpreted(self, term: DomainTerm) -> bool:
        """True when some result value of `term` is still unknown."""
        if self.term_kind(term) == "pred":
            return self.pred_value(term.symbol, term.args) is U
        table = self.tables[term.symbol]
        decl = self.vocab.func(term.symbol)
        return any(table[term.args + (v,)] is U for v in self.domains[decl.result])

    def decided_entries(self):
        """Yield (symbol, key, truth) for every non-unknown table entry."""
        for sym in self.vocab.symbols():
            for key, tv in self.tables[sym].items():
                if tv is not U:
                    yield sym, key, tv

    def is_total(self) -> bool:
        return all(
            tv is not U for table in self.tables.values() for tv in table.values()
        )

    # --- functional updates

    def with_updates(self, updates: Dict[Tuple[str, tuple], Truth]) -> "PartialStructure":
        by_sym: Dict[str, Dict[tuple, Truth]] = {}
        for (sym, key), tv in updates.items():
            by_sym.setdefault(sym, {})[key] = tv
        tables = {}
        for sym, table in self.tables.items():
            if sym in by_sym:
                table = dict(table)
                for key, tv in by_sym[sym].items():
                    if key not in table:
                        raise UnknownTerm(f"{sym}{key}")
                    table[key] = tv
                tables[sym] = table
            else:
                tables[sym] = table
        out = PartialStructure(self.vocab, self.domains, tables, _validated=True)
        out._check_functional_consistency()
        return out

    def __eq__(self, other):
        return (
            isinstance(other, PartialStructure)
            and self.vocab == other.vocab
            and self.domains == other.domains
            and self.tables == other.tables
        )


def empty_structure(vocab: Vocabulary, domains: Dict[str, Sequence[Element]]) -> PartialStructure:
    return PartialStructure(vocab, domains)


# ----------------------------------------------------- theories, problems


@dataclass(frozen=True)
class Sentence:
    label: str
    formula: fol.Formula
    loc: fol.Loc = fol.NOLOC


@dataclass(frozen=True)
class Theory:
    vocab: Vocabulary
    sentences: Tuple[Sentence, ...]

    def labels(self) -> Tuple[str, ...]:
        return tuple(s.label for s in self.sentences)

    def sentence(self, label: str) -> Sentence:
        for s in self.sentences:
            if s.label == label:
                return s
        raise KeyError(label)


@dataclass(frozen=True)
class Problem:
    vocab: Vocabulary
    theory: Theory
    structure: PartialStructure


# ------------------------------------------------------------ operations


def precision_leq(a: PartialStructure, b: PartialStructure) -> bool:
    """True iff every entry of `a` is unknown or agrees with `b`."""
    if a.vocab != b.vocab or a.domains != b.domains:
        raise IncomparableStructures("different vocabulary or domains")
    for sym, table in a.tables.items():
        other = b.tables[sym]
        for key, tv in table.items():
            if not truth_leq(tv, other[key]):
                return False
    return True


def extend(s: PartialStructure, a: Assignment) -> PartialStructure:
    """Refine `s` with one assignment; functions force the row complement."""
    kind = s.term_kind(a.term)
    if kind == "pred":
        if a.value not in (True, False):
            raise UnknownTerm(f"{a.term} is a predicate atom; value must be true/false")
        new = T if a.value else F
        cur = s.pred_value(a.term.symbol, a.term.args)
        if cur is new:
            return s
        if cur is not U:
            raise ConflictingAssignment(f"{a.term} is already {cur.value}")
        return s.with_updates({(a.term.symbol, a.term.args): new})

    decl = s.vocab.func(a.term.symbol)
    if a.value not in s.domains[decl.result]:
        raise UnknownTerm(f"{a.value} is not in the domain of {decl.result}")
    cur = s.graph_value(a.term.symbol, a.term.args, a.value)
    if cur is F:
        raise ConflictingAssignment(f"{a.term}={a.value} is already excluded")
    updates = {}
    for v in s.domains[decl.result]:
        key = a.term.args + (v,)
        tv = s.tables[a.term.symbol][key]
        if v == a.value:
            updates[(a.term.symbol, key)] = T
        else:
            if tv is T:
                raise ConflictingAssignment(f"{a.term} is already {v}")
            updates[(a.term.symbol, key)] = F
    new = s.with_updates(updates)
    return s if new == s else new


def erase(s: PartialStructure, term: DomainTerm) -> PartialStructure:
    """Reset every result entry of `term` to unknown."""
    kind = s.term_kind(term)
    if kind == "pred":
        if s.pred_value(term.symbol, term.args) is U:
            return s
        return s.with_updates({(term.symbol, term.args): U})
    decl = s.vocab.func(term.symbol)
    if term.args + (s.domains[decl.result][0],) not in s.tables[term.symbol]:
        raise UnknownTerm(str(term))
    updates = {
        (term.symbol, term.args + (v,)): U for v in s.domains[decl.result]
    }
    new = s.with_updates(updates)
    return s if new == s else new


# --------------------------------------------------------- term evaluation


def _check_arg(s: PartialStructure, ty: str, value: Element, where: str):
    if value not in s.domains.get(ty, ()):
        if ty == INT:
            raise RangeExceeded(f"{value} outside declared integer range in {where}")
        raise UnknownTerm(f"{value} not in domain of {ty} (in {where})")


def eval_term(s: PartialStructure, t: fol.Term, env: Optional[dict] = None):
    """Three-valued term value: an element, None (unknown) or UNDEFINED.

    A function term is determined as soon as the structure forces a single
    result value. Aggregates are strict: any unknown condition or relevant
    weight makes the whole term unknown.
    """
    env = env or {}
    if isinstance(t, fol.Var):
        if t.name not in env:
            raise KbcfgError(f"unbound variable {t.name}")
        return env[t.name]
    if isinstance(t, fol.Const):
        return t.value
    if isinstance(t, fol.IntLit):
        return t.value
    if isinstance(t, fol.FuncApp):
        decl = s.vocab.func(t.func)
        vals = []
        for arg, ty in zip(t.args, decl.arg_types):
            v = eval_term(s, arg, env)
            if v is None or v is UNDEFINED:
                return v
            _check_arg(s, ty, v, t.func)
            vals.append(v)
        return s.forced_value(DomainTerm(t.func, tuple(vals)))
    if isinstance(t, fol.Arith):
        lv = eval_term(s, t.left, env)
        rv = eval_term(s, t.right, env)
        for v in (lv, rv):
            if v is None or v is UNDEFINED:
                return v
        if t.op == "+":
            return lv + rv
        if t.op == "-":
            return lv - rv
        if t.op == "*":
            return lv * rv
        raise KbcfgError(f"unknown operator {t.op}")
    if isinstance(t, fol.Aggregate):
        return _eval_aggregate(s, t, env)
    raise KbcfgError(f"cannot evaluate {t!r}")


def _eval_aggregate(s: PartialStructure, t: fol.Aggregate, env: dict):
    domains = [s.domains[b.type] for b in t.binders]
    collected = []
    for binding in itertools.product(*domains):
        inner = dict(env)
        inner.update({b.name: v for b, v in zip(t.binders, binding)})
        cond = eval_formula(s, t.condition, inner)
        if cond is U:
            return None
        if cond is F:
            continue
        if t.kind == "card":
            collected.append(1)
            continue
        w = eval_term(s, t.weight, inner)
        if w is None or w is UNDEFINED:
            return w
        collected.append(w)
    if t.kind in ("sum", "card"):
        return sum(collected)
    if t.kind == "prod":
        out = 1
        for w in collected:
            out *= w
        return out
    if not collected:
        return UNDEFINED
    return min(collected) if t.kind == "min" else max(collected)


_CMP = {
    "=": lambda a, b: a == b,
    "~=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "=<": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
}


def eval_formula(s: PartialStructure, f: fol.Formula, env: Optional[dict] = None) -> Truth:
    """Three-valued satisfaction; coincides with classical truth on total input."""
    env = env or {}
    if isinstance(f, fol.BoolConst):
        return T if f.value else F
    if isinstance(f, fol.Atom):
        decl = s.vocab.pred(f.pred)
        vals = []
        for arg, ty in zip(f.args, decl.arg_types):
            v = eval_term(s, arg, env)
            if v is None:
                return U
            if v is UNDEFINED:
                return F
            _check_arg(s, ty, v, f.pred)
            vals.append(v)
        return s.pred_value(f.pred, tuple(vals))
    if isinstance(f, fol.Compare):
        lv = eval_term(s, f.left, env)
        rv = eval_term(s, f.right, env)
        if lv is None or rv is None:
            return U
        if lv is UNDEFINED or rv is UNDEFINED:
            return F
        return T if _CMP[f.op](lv, rv) else F
    if isinstance(f, fol.Not):
        return eval_formula(s, f.body, env).negate()
    if isinstance(f, fol.And):
        return truth_and(eval_formula(s, f.left, env), eval_formula(s, f.right, env))
    if isinstance(f, fol.Or):
        return truth_or(eval_formula(s, f.left, env), eval_formula(s, f.right, env))
    if isinstance(f, fol.Implies):
        return truth_or(
            eval_formula(s, f.left, env).negate(), eval_formula(s, f.right, env)
        )
    if isinstance(f, fol.Iff):
        lv = eval_formula(s, f.left, env)
        rv = eval_formula(s, f.right, env)
        if lv is U or rv is U:
            return U
        return T if lv is rv else F
    if isinstance(f, (fol.ForAll, fol.Exists)):
        domains = [s.domains[b.type] for b in f.binders]
        universal = isinstance(f, fol.ForAll)
        acc = T if universal else F
        for binding in itertools.product(*domains):
            inner = dict(env)
            inner.update({b.name: v for b, v in zip(f.binders, binding)})
            tv = eval_formula(s, f.body, inner)
            if universal:
                if tv is F:
                    return F
                acc = truth_and(acc, tv)
            else:
                if tv is T:
                    return T
                acc = truth_or(acc, tv)
        return acc
    raise KbcfgError(f"cannot evaluate {f!r}")


def query(s: PartialStructure, e: fol.SetExpr):
    """The tuples on which the set expression's condition is certainly true."""
    domains = [s.domains[b.type] for b in e.binders]
    out = set()
    for binding in itertools.product(*domains):
        env = {b.name: v for b, v in zip(e.binders, binding)}
        if eval_formula(s, e.condition, env) is T:
            out.add(binding)
    return out


# ------------------------------------------------- structure as a theory


def entry_label(vocab: Vocabulary, sym: str, key: tuple, tv: Truth) -> str:
    """Canonical literal text for one decided table entry."""
    if vocab.is_pred(sym):
        atom = str(DomainTerm(sym, key))
        return atom if tv is T else f"~{atom}"
    args, value = key[:-1], key[-1]
    term = str(DomainTerm(sym, args))
    return f"{term}={value}" if tv is T else f"{term}~={value}"


def entry_formula(vocab: Vocabulary, sym: str, key: tuple, tv: Truth) -> fol.Formula:
    if vocab.is_pred(sym):
        decl = vocab.pred(sym)
        atom = fol.Atom(sym, tuple(fol.Const(v, ty) for v, ty in zip(key, decl.arg_types)))
        return atom if tv is T else fol.Not(atom)
    decl = vocab.func(sym)
    args = tuple(fol.Const(v, ty) for v, ty in zip(key[:-1], decl.arg_types))
    eq = fol.Compare("=", fol.FuncApp(sym, args), fol.Const(key[-1], decl.result))
    return eq if tv is T else fol.Compare("~=", fol.FuncApp(sym, args), fol.Const(key[-1], decl.result))


def associated_theory(s: PartialStructure) -> Theory:
    """One literal sentence per decided entry; models = two-valued extensions of s."""
    sentences = []
    for sym, key, tv in s.decided_entries():
        sentences.append(
            Sentence(entry_label(s.vocab, sym, key, tv), entry_formula(s.vocab, sym, key, tv))
        )
    return Theory(s.vocab, tuple(sentences))


def open_terms_universe(s: PartialStructure) -> ParameterSet:
    """All domain terms with at least one unknown result entry, in declaration order."""
    out = []
    for decl in s.vocab.predicates:
        for args in itertools.product(*s._domains_of(decl.arg_types)):
            if s.tables[decl.name][args] is U:
                out.append(DomainTerm(decl.name, args))
    for decl in s.vocab.functions:
        for args, row in s.func_rows(decl.name):
            if any(tv is U for _, tv in row):
                out.append(DomainTerm(decl.name, args))
    return tuple(out)


def check_total(s: PartialStructure):
    if not s.is_total():
        raise StructureNotTotal()
