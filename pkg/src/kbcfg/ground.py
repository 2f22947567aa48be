"""Reduction of (theory, partial structure) to a propositional clause set.

The encoding maps every predicate domain atom P(d) to one variable and every
function value pair F(d)=e to one variable. Function rows carry exactly-one
constraints (at-least-one plus at-most-one; pairwise for short rows, a
sequential ladder otherwise). Quantifiers are expanded over the finite
domains, nested function terms are expanded by case over their value atoms,
and complex sentences are clausified through one-sided definition variables.
Sum and card aggregates become a running-total chain of auxiliary value
atoms; min/max use the same chain over running extrema; prod is rejected.

Every clause carries a provenance identifier:

    <label> / <label>[d1,d2]   clauses of a sentence (instance, for outer !)
    data:<symbol>              unit clauses for entries decided in the input
    frame:<symbol>             functional-consistency constraints

Two modes: by default interpreted entries are folded into the sentence
encodings (smaller, faster). With fold_data=False the sentence encodings
mention the data atoms themselves, so explanation code can retract data
units individually; the model set is the same in both modes as long as the
data units hold.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from . import fol
from .core import (
    Assignment,
    DomainTerm,
    Element,
    F,
    PartialStructure,
    Sentence,
    T,
    Theory,
    Truth,
    U,
    eval_term,
    UNDEFINED,
)
from .errors import KbcfgError, RangeExceeded, UnsupportedAggregate


class _Sentinel:
    """Running extremum of an empty min/max chain; any comparison is false."""

    def __repr__(self):
        return "<empty>"


EMPTY = _Sentinel()


# ----------------------------------------------------------------- varmap


class VarMap:
    """Bijection between solver variables and ground value atoms.

    Predicate atoms P(d) get one variable; the positive literal means the
    atom is true. Function value atoms F(d)=e get one variable each.
    """

    def __init__(self, structure: PartialStructure):
        self.structure = structure
        self.vocab = structure.vocab
        self._by_atom: Dict[tuple, int] = {}
        self._by_var: List[Optional[tuple]] = [None]
        vocab = self.vocab
        for decl in vocab.predicates:
            for args in itertools.product(*(structure.domains[t] for t in decl.arg_types)):
                self._add(("p", decl.name, args))
        for decl in vocab.functions:
            for args in itertools.product(*(structure.domains[t] for t in decl.arg_types)):
                for res in structure.domains[decl.result]:
                    self._add(("f", decl.name, args, res))
        self.num_atoms = len(self._by_var) - 1

    def _add(self, atom: tuple):
        self._by_atom[atom] = len(self._by_var)
        self._by_var.append(atom)

    def pred_var(self, sym: str, args: tuple) -> int:
        return self._by_atom[("p", sym, args)]

    def func_var(self, sym: str, args: tuple, res: Element) -> int:
        return self._by_atom[("f", sym, args, res)]

    def atom(self, var: int) -> tuple:
        if var <= 0 or var > self.num_atoms:
            raise KbcfgError(f"variable {var} is not a value atom")
        return self._by_var[var]

    def is_value_atom(self, var: int) -> bool:
        return 1 <= var <= self.num_atoms

    def row_literals(self, term: DomainTerm) -> List[Tuple[Union[Element, bool], int]]:
        """(value, variable) pairs covering every candidate value of a term."""
        if self.vocab.is_pred(term.symbol):
            v = self.pred_var(term.symbol, term.args)
            return [(True, v), (False, -v)]
        decl = self.vocab.func(term.symbol)
        return [
            (res, self.func_var(term.symbol, term.args, res))
            for res in self.structure.domains[decl.result]
        ]

    def assignment_literal(self, a: Assignment) -> int:
        """The literal asserting (a.term = a.value)."""
        if self.vocab.is_pred(a.term.symbol):
            v = self.pred_var(a.term.symbol, a.term.args)
            return v if a.value is True else -v
        return self.func_var(a.term.symbol, a.term.args, a.value)


def encode_assignment(vm: VarMap, a: Assignment) -> int:
    return vm.assignment_literal(a)


def decode_model(vm: VarMap, model: Sequence[bool]) -> PartialStructure:
    """Read a total two-valued structure off a satisfying valuation."""
    s = vm.structure
    tables: Dict[str, Dict[tuple, Truth]] = {}
    for decl in s.vocab.predicates:
        table = {}
        for args in itertools.product(*(s.domains[t] for t in decl.arg_types)):
            table[args] = T if model[vm.pred_var(decl.name, args)] else F
        tables[decl.name] = table
    for decl in s.vocab.functions:
        table = {}
        for args in itertools.product(*(s.domains[t] for t in decl.arg_types)):
            trues = [
                res
                for res in s.domains[decl.result]
                if model[vm.func_var(decl.name, args, res)]
            ]
            if len(trues) != 1:
                raise KbcfgError(
                    f"exactly-one violation for {decl.name}{args}: encoding bug"
                )
            for res in s.domains[decl.result]:
                table[args + (res,)] = T if res == trues[0] else F
        tables[decl.name] = table
    return PartialStructure(s.vocab, s.domains, tables, _validated=True)


# ---------------------------------------------------------------- gformula

# A ground formula is True, False, an int literal, ('and', [...]) or ('or', [...]).


def _gand(children) -> object:
    out = []
    lits = set()
    for c in children:
        if c is True:
            continue
        if c is False:
            return False
        if isinstance(c, tuple) and c[0] == "and":
            for cc in c[1]:
                if isinstance(cc, int):
                    if -cc in lits:
                        return False
                    if cc not in lits:
                        lits.add(cc)
                        out.append(cc)
                else:
                    out.append(cc)
            continue
        if isinstance(c, int):
            if -c in lits:
                return False
            if c in lits:
                continue
            lits.add(c)
            out.append(c)
        else:
            out.append(c)
    if not out:
        return True
    if len(out) == 1:
        return out[0]
    return ("and", out)


def _gor(children) -> object:
    out = []
    lits = set()
    for c in children:
        if c is False:
            continue
        if c is True:
            return True
        if isinstance(c, tuple) and c[0] == "or":
            for cc in c[1]:
                if isinstance(cc, int):
                    if -cc in lits:
                        return True
                    if cc not in lits:
                        lits.add(cc)
                        out.append(cc)
                else:
                    out.append(cc)
            continue
        if isinstance(c, int):
            if -c in lits:
                return True
            if c in lits:
                continue
            lits.add(c)
            out.append(c)
        else:
            out.append(c)
    if not out:
        return False
    if len(out) == 1:
        return out[0]
    return ("or", out)


_CMPF = {
    "=": lambda a, b: a == b,
    "~=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "=<": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
}


# -------------------------------------------------------------- grounding


@dataclass
class GroundInstance:
    label: str
    env: Dict[str, Element]
    formula: fol.Formula

    def render(self) -> str:
        return fol.render_formula(fol.substitute(self.formula, self.env))


@dataclass
class GroundProblem:
    varmap: VarMap
    num_vars: int
    clauses: List[Tuple[int, ...]]
    provenance: List[str]
    instances: Dict[str, GroundInstance]
    theory: Theory
    structure: PartialStructure
    folded: bool

    def value_literals(self, term: DomainTerm) -> List[Tuple[Union[Element, bool], int]]:
        """Observable value table for an integer or any other ground term."""
        return self.varmap.row_literals(term)

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        last = None
        for clause, prov in zip(self.clauses, self.provenance):
            if prov != last:
                lines.append(f"c sentence {prov}")
                last = prov
            lines.append(" ".join(str(l) for l in clause) + " 0")
        return "\n".join(lines) + "\n"


class _Grounder:
    def __init__(self, theory: Theory, structure: PartialStructure, fold_data: bool):
        self.theory = theory
        self.s = structure
        self.fold = fold_data
        self.vm = VarMap(structure)
        self.num_vars = self.vm.num_atoms
        self.clauses: List[Tuple[int, ...]] = []
        self.provenance: List[str] = []
        self.instances: Dict[str, GroundInstance] = {}
        self._prov = ""
        self._chain_cache: Dict[tuple, List[Tuple[tuple, object]]] = {}

    # plumbing

    def new_var(self) -> int:
        self.num_vars += 1
        return self.num_vars

    def emit(self, clause: Iterable[int]):
        self.clauses.append(tuple(clause))
        self.provenance.append(self._prov)

    # top level

    def run(self) -> GroundProblem:
        self._emit_frames()
        self._emit_data_units()
        for sent in self.theory.sentences:
            for label, env, body in self._sentence_instances(sent):
                self._prov = label
                self.instances[label] = GroundInstance(label, env, body)
                g = self._formula(body, env, True)
                self._assert(g)
        return GroundProblem(
            varmap=self.vm,
            num_vars=self.num_vars,
            clauses=self.clauses,
            provenance=self.provenance,
            instances=self.instances,
            theory=self.theory,
            structure=self.s,
            folded=self.fold,
        )

    def _sentence_instances(self, sent: Sentence):
        binders: List[fol.Var] = []
        body = sent.formula
        while isinstance(body, fol.ForAll):
            binders.extend(body.binders)
            body = body.body
        if not binders:
            yield sent.label, {}, body
            return
        domains = [self.s.domains[b.type] for b in binders]
        for binding in itertools.product(*domains):
            env = {b.name: v for b, v in zip(binders, binding)}
            label = f"{sent.label}[{','.join(str(v) for v in binding)}]"
            yield label, env, body

    def _emit_frames(self):
        for decl in self.s.vocab.functions:
            self._prov = f"frame:{decl.name}"
            for args in itertools.product(*(self.s.domains[t] for t in decl.arg_types)):
                row = [
                    self.vm.func_var(decl.name, args, res)
                    for res in self.s.domains[decl.result]
                ]
                self.emit(row)
                self._at_most_one(row)

    def _at_most_one(self, row: List[int]):
        if len(row) <= 1:
            return
        if len(row) <= 8:
            for i in range(len(row)):
                for j in range(i + 1, len(row)):
                    self.emit((-row[i], -row[j]))
            return
        # sequential ladder: s_i holds once some x_j with j <= i is true
        prev = None
        for i, x in enumerate(row[:-1]):
            s_i = self.new_var()
            self.emit((-x, s_i))
            if prev is not None:
                self.emit((-prev, s_i))
                self.emit((-x, -prev))
            prev = s_i
        self.emit((-row[-1], -prev))

    def _emit_data_units(self):
        for decl in self.s.vocab.predicates:
            self._prov = f"data:{decl.name}"
            table = self.s.tables[decl.name]
            for args in itertools.product(*(self.s.domains[t] for t in decl.arg_types)):
                tv = table[args]
                if tv is U:
                    continue
                v = self.vm.pred_var(decl.name, args)
                self.emit((v,) if tv is T else (-v,))
        for decl in self.s.vocab.functions:
            self._prov = f"data:{decl.name}"
            table = self.s.tables[decl.name]
            for args in itertools.product(*(self.s.domains[t] for t in decl.arg_types)):
                for res in self.s.domains[decl.result]:
                    tv = table[args + (res,)]
                    if tv is U:
                        continue
                    v = self.vm.func_var(decl.name, args, res)
                    self.emit((v,) if tv is T else (-v,))

    # ---- terms to value cases: list of (condition literal tuple, value)

    def _term_cases(self, t: fol.Term, env) -> List[Tuple[tuple, object]]:
        if isinstance(t, fol.Var):
            return [((), env[t.name])]
        if isinstance(t, fol.Const):
            return [((), t.value)]
        if isinstance(t, fol.IntLit):
            return [((), t.value)]
        if isinstance(t, fol.FuncApp):
            decl = self.s.vocab.func(t.func)
            arg_cases = [self._term_cases(a, env) for a in t.args]
            out = []
            for combo in itertools.product(*arg_cases):
                conds = tuple(l for c, _ in combo for l in c)
                argvals = tuple(v for _, v in combo)
                for ty, v in zip(decl.arg_types, argvals):
                    if v not in self.s.domains[ty]:
                        raise RangeExceeded(f"{v} outside the domain of {ty} in {t.func}")
                if self.fold:
                    forced = self.s.forced_value(DomainTerm(t.func, argvals))
                    if forced is not None:
                        out.append((conds, forced))
                        continue
                    table = self.s.tables[t.func]
                    for res in self.s.domains[decl.result]:
                        if table[argvals + (res,)] is F:
                            continue
                        var = self.vm.func_var(t.func, argvals, res)
                        out.append((conds + (var,), res))
                else:
                    for res in self.s.domains[decl.result]:
                        var = self.vm.func_var(t.func, argvals, res)
                        out.append((conds + (var,), res))
            return out
        if isinstance(t, fol.Arith):
            lcases = self._term_cases(t.left, env)
            rcases = self._term_cases(t.right, env)
            out = []
            for (lc, lv), (rc, rv) in itertools.product(lcases, rcases):
                if lv is EMPTY or rv is EMPTY:
                    out.append((lc + rc, EMPTY))
                    continue
                if t.op == "+":
                    v = lv + rv
                elif t.op == "-":
                    v = lv - rv
                else:
                    v = lv * rv
                out.append((lc + rc, v))
            return out
        if isinstance(t, fol.Aggregate):
            return self._aggregate_cases(t, env)
        raise KbcfgError(f"cannot ground term {t!r}")

    # ---- aggregates

    def _aggregate_cases(self, agg: fol.Aggregate, env) -> List[Tuple[tuple, object]]:
        binder_names = {b.name for b in agg.binders}
        free_env = tuple(
            sorted((k, v) for k, v in env.items() if k not in binder_names)
        )
        key = (id(agg), free_env)
        cached = self._chain_cache.get(key)
        if cached is not None:
            return list(cached)
        if agg.kind == "prod":
            raise UnsupportedAggregate("prod aggregates are not supported in grounding")
        items = []
        domains = [self.s.domains[b.type] for b in agg.binders]
        for binding in itertools.product(*domains):
            inner = dict(env)
            inner.update({b.name: v for b, v in zip(agg.binders, binding)})
            cond = self._formula(agg.condition, inner, True)
            if cond is False:
                continue
            if agg.kind == "card":
                weight = 1
            else:
                weight = eval_term(self.s, agg.weight, inner)
                if weight is None or weight is UNDEFINED:
                    raise UnsupportedAggregate(
                        f"aggregate weight {fol.render_term(agg.weight)} is not "
                        "interpreted by the input structure"
                    )
            if cond is not True and not isinstance(cond, int):
                cond = self._define_both(agg.condition, inner)
            items.append((cond, weight))

        base = 0 if agg.kind in ("sum", "card") else EMPTY
        layer: Dict[object, Optional[int]] = {base: None}

        def combine(value, w):
            if agg.kind in ("sum", "card"):
                return value + w
            if value is EMPTY:
                return w
            return min(value, w) if agg.kind == "min" else max(value, w)

        for cond, w in items:
            if cond is True:
                layer = {combine(v, w): var for v, var in layer.items()}
                continue
            values = set()
            for v in layer:
                values.add(combine(v, w))
                values.add(v)
            if len(values) > 100000:
                raise RangeExceeded("aggregate value table too large")
            new_layer: Dict[object, int] = {
                v: self.new_var() for v in sorted(values, key=_value_key)
            }
            for v, var in layer.items():
                prefix = () if var is None else (-var,)
                self.emit(prefix + (-cond, new_layer[combine(v, w)]))
                self.emit(prefix + (cond, new_layer[v]))
            self._at_most_one(list(new_layer.values()))
            layer = dict(new_layer)

        cases = []
        for v, var in layer.items():
            cases.append(((() if var is None else (var,)), v))
        self._chain_cache[key] = cases
        return list(cases)

    def _define_both(self, formula: fol.Formula, env) -> int:
        """Two-sided definition variable for an aggregate condition."""
        a = self.new_var()
        pos = self._formula(formula, env, True)
        neg = self._formula(formula, env, False)
        self._assert(_gor([neg, a]))  # formula -> a
        self._assert(_gor([-a, pos]))  # a -> formula
        return a

    # ---- formulas to ground form (negation normal, via `positive` flag)

    def _formula(self, f: fol.Formula, env, positive: bool):
        if isinstance(f, fol.BoolConst):
            return f.value if positive else not f.value
        if isinstance(f, fol.Not):
            return self._formula(f.body, env, not positive)
        if isinstance(f, fol.And):
            l = self._formula(f.left, env, positive)
            r = self._formula(f.right, env, positive)
            return _gand([l, r]) if positive else _gor([l, r])
        if isinstance(f, fol.Or):
            l = self._formula(f.left, env, positive)
            r = self._formula(f.right, env, positive)
            return _gor([l, r]) if positive else _gand([l, r])
        if isinstance(f, fol.Implies):
            l = self._formula(f.left, env, not positive)
            r = self._formula(f.right, env, positive)
            return _gor([l, r]) if positive else _gand([l, r])
        if isinstance(f, fol.Iff):
            lp = self._formula(f.left, env, True)
            ln = self._formula(f.left, env, False)
            rp = self._formula(f.right, env, True)
            rn = self._formula(f.right, env, False)
            if positive:
                return _gand([_gor([ln, rp]), _gor([rn, lp])])
            return _gand([_gor([lp, rp]), _gor([ln, rn])])
        if isinstance(f, (fol.ForAll, fol.Exists)):
            conj = isinstance(f, fol.ForAll) == positive
            domains = [self.s.domains[b.type] for b in f.binders]
            parts = []
            for binding in itertools.product(*domains):
                inner = dict(env)
                inner.update({b.name: v for b, v in zip(f.binders, binding)})
                parts.append(self._formula(f.body, inner, positive))
                if conj and parts[-1] is False:
                    return False
                if not conj and parts[-1] is True:
                    return True
            return _gand(parts) if conj else _gor(parts)
        if isinstance(f, fol.Atom):
            arg_cases = [self._term_cases(a, env) for a in f.args]
            branches = []
            for combo in itertools.product(*arg_cases):
                conds = tuple(l for c, _ in combo for l in c)
                argvals = tuple(v for _, v in combo)
                if any(v is EMPTY for v in argvals):
                    # undefined argument: the atom never holds
                    branches.append(_gand(list(conds) + [not positive]))
                    continue
                decl = self.s.vocab.pred(f.pred)
                for ty, v in zip(decl.arg_types, argvals):
                    if v not in self.s.domains[ty]:
                        raise RangeExceeded(f"{v} outside the domain of {ty} in {f.pred}")
                if self.fold:
                    tv = self.s.pred_value(f.pred, argvals)
                    if tv is not U:
                        leaf = (tv is T) == positive
                        branches.append(_gand(list(conds) + [leaf]))
                        continue
                var = self.vm.pred_var(f.pred, argvals)
                leaf = var if positive else -var
                branches.append(_gand(list(conds) + [leaf]))
            return _gor(branches)
        if isinstance(f, fol.Compare):
            op = _CMPF[f.op]
            lcases = self._term_cases(f.left, env)
            rcases = self._term_cases(f.right, env)
            branches = []
            for (lc, lv), (rc, rv) in itertools.product(lcases, rcases):
                if lv is EMPTY or rv is EMPTY:
                    holds = False  # comparisons with an empty extremum fail
                else:
                    holds = bool(op(lv, rv))
                if holds == positive:
                    branches.append(_gand(list(lc) + list(rc)))
            return _gor(branches)
        raise KbcfgError(f"cannot ground formula {f!r}")

    # ---- clausification

    def _assert(self, g):
        if g is True:
            return
        if g is False:
            # representable contradiction: a fresh pair of conflicting units
            a = self.new_var()
            self.emit((a,))
            self.emit((-a,))
            return
        if isinstance(g, int):
            self.emit((g,))
            return
        kind, children = g
        if kind == "and":
            for c in children:
                self._assert(c)
            return
        lits = []
        for c in children:
            if isinstance(c, int):
                lits.append(c)
            else:
                lits.append(self._define(c))
        self.emit(lits)

    def _define(self, g) -> int:
        """One-sided definition literal d with d -> g (g occurs positively)."""
        if isinstance(g, int):
            return g
        kind, children = g
        d = self.new_var()
        if kind == "and":
            for c in children:
                self.emit((-d, self._define(c)))
        else:
            lits = [-d]
            for c in children:
                lits.append(self._define(c))
            self.emit(lits)
        return d


def _value_key(v):
    return (1, 0) if v is EMPTY else (0, v)


def ground(theory: Theory, structure: PartialStructure, *, fold_data: bool = True) -> GroundProblem:
    """Ground the theory over the structure into clauses plus a variable map.

    The satisfying assignments of the result, decoded through the variable
    map, are exactly the two-valued functionally consistent extensions of
    the structure that satisfy every sentence.
    """
    return _Grounder(theory, structure, fold_data).run()
