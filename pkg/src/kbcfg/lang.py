"""Concrete syntax for specifications: parser, typechecker, serializer.

A specification is three blocks:

    vocabulary { type software; Install(software). Cost:int. ... }
    theory     { label: formula. ... }
    structure  { software = {Windows; Linux}  Install = {Windows->T} ... }

Formulas use ASCII connectives (&, |, ~, =>, <=>), typed quantifiers
(!x[t]: ..., ?x[t]: ...), comparisons (=, ~=, <, >, =<, >=) and aggregate
terms (sum{(x, w) | phi}, card{x | phi}, plus min/max/prod in the parser).
Structure tables are written either in two-valued shorthand (listed tuples
are true, everything else false) or with explicit ->T / ->F marks (unlisted
entries stay unknown). The element names T and F are reserved in mark
position.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from . import fol
from .core import (
    INT,
    Element,
    F,
    FuncDecl,
    PartialStructure,
    PredDecl,
    Problem,
    Sentence,
    T,
    Theory,
    Truth,
    U,
    DomainTerm,
    Vocabulary,
)
from .errors import KbcfgError, SpecSyntaxError, TypecheckFailure

# --------------------------------------------------------------- lexing

_MULTI = ("<=>", "=>", "=<", ">=", "<=", "~=", "->", "..")
_SINGLE = "(){}[];:,.=<>~&|!?+-*"


@dataclass(frozen=True)
class Token:
    kind: str  # 'name' | 'int' | 'op' | 'eof'
    text: str
    line: int
    col: int


def tokenize(src: str) -> List[Token]:
    toks = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("int", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(Token("name", src[i:j], line, col))
            col += j - i
            i = j
            continue
        matched = False
        for op in _MULTI:
            if src.startswith(op, i):
                toks.append(Token("op", op, line, col))
                i += len(op)
                col += len(op)
                matched = True
                break
        if matched:
            continue
        if c in _SINGLE:
            toks.append(Token("op", c, line, col))
            i += 1
            col += 1
            continue
        raise SpecSyntaxError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# -------------------------------------------------------------- parsing

_AGG_KINDS = ("sum", "card", "min", "max", "prod")
_CMP_OPS = ("=", "~=", "<", ">", "=<", ">=", "<=")


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.pos = 0

    # token plumbing

    def peek(self, ahead=0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str, ahead=0) -> bool:
        return self.peek(ahead).text == text and self.peek(ahead).kind in ("op", "name")

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise SpecSyntaxError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def expect_name(self, what="name") -> Token:
        tok = self.next()
        if tok.kind != "name":
            raise SpecSyntaxError(f"expected {what}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def loc(self) -> fol.Loc:
        tok = self.peek()
        return fol.Loc(tok.line, tok.col)

    def err(self, msg: str) -> SpecSyntaxError:
        tok = self.peek()
        return SpecSyntaxError(msg, tok.line, tok.col)

    # specification blocks

    def parse_spec(self):
        vocab_block = theory_block = structure_block = None
        while self.peek().kind != "eof":
            tok = self.expect_name("block keyword")
            if tok.text == "vocabulary":
                if vocab_block is not None:
                    raise SpecSyntaxError("duplicate vocabulary block", tok.line, tok.col)
                vocab_block = self.parse_vocabulary()
            elif tok.text == "theory":
                if theory_block is not None:
                    raise SpecSyntaxError("duplicate theory block", tok.line, tok.col)
                theory_block = self.parse_theory_block()
            elif tok.text == "structure":
                if structure_block is not None:
                    raise SpecSyntaxError("duplicate structure block", tok.line, tok.col)
                structure_block = self.parse_structure_block()
            else:
                raise SpecSyntaxError(
                    f"expected vocabulary/theory/structure, found {tok.text!r}",
                    tok.line,
                    tok.col,
                )
        if vocab_block is None:
            raise SpecSyntaxError("missing vocabulary block", 1, 1)
        return vocab_block, theory_block or [], structure_block or []

    def parse_vocabulary(self):
        self.expect("{")
        types: List[str] = []
        preds: List[PredDecl] = []
        funcs: List[FuncDecl] = []
        int_range: Optional[Tuple[int, int]] = None
        seen = set()
        while not self.at("}"):
            tok = self.expect_name("declaration")
            if tok.text == "type":
                name = self.expect_name("type name")
                if name.text == INT:
                    self.expect("[")
                    lo = self._parse_signed_int()
                    self.expect("..")
                    hi = self._parse_signed_int()
                    self.expect("]")
                    if int_range is not None:
                        raise SpecSyntaxError("duplicate int range", name.line, name.col)
                    int_range = (lo, hi)
                else:
                    if name.text in seen:
                        raise SpecSyntaxError(f"duplicate symbol {name.text}", name.line, name.col)
                    seen.add(name.text)
                    types.append(name.text)
                self._decl_end()
                continue
            name = tok
            if name.text in seen:
                raise SpecSyntaxError(f"duplicate symbol {name.text}", name.line, name.col)
            seen.add(name.text)
            arg_types: Tuple[str, ...] = ()
            if self.at("("):
                self.next()
                names = [self.expect_name("type name").text]
                while self.at(","):
                    self.next()
                    names.append(self.expect_name("type name").text)
                self.expect(")")
                arg_types = tuple(names)
            if self.at(":"):
                self.next()
                result = self.expect_name("result type").text
                funcs.append(FuncDecl(name.text, arg_types, result))
            else:
                preds.append(PredDecl(name.text, arg_types))
            self._decl_end()
        self.expect("}")
        return types, preds, funcs, int_range

    def _decl_end(self):
        tok = self.next()
        if tok.text not in (".", ";"):
            raise SpecSyntaxError(f"expected '.' or ';', found {tok.text!r}", tok.line, tok.col)

    def _parse_signed_int(self) -> int:
        neg = False
        if self.at("-"):
            self.next()
            neg = True
        tok = self.next()
        if tok.kind != "int":
            raise SpecSyntaxError(f"expected integer, found {tok.text!r}", tok.line, tok.col)
        return -int(tok.text) if neg else int(tok.text)

    # theory

    def parse_theory_block(self):
        self.expect("{")
        sentences = []
        while not self.at("}"):
            label = None
            if self.peek().kind == "name" and self.at(":", 1):
                label = self.next().text
                self.next()
            loc = self.loc()
            formula = self.parse_formula()
            self.expect(".")
            sentences.append((label, formula, loc))
        self.expect("}")
        return sentences

    def parse_formula(self) -> fol.Formula:
        return self._parse_iff()

    def _parse_iff(self) -> fol.Formula:
        left = self._parse_implies()
        while self.at("<=>"):
            loc = self.loc()
            self.next()
            left = fol.Iff(left, self._parse_implies(), loc)
        return left

    def _parse_implies(self) -> fol.Formula:
        left = self._parse_or()
        if self.at("=>"):
            loc = self.loc()
            self.next()
            return fol.Implies(left, self._parse_implies(), loc)
        return left

    def _parse_or(self) -> fol.Formula:
        left = self._parse_and()
        while self.at("|"):
            loc = self.loc()
            self.next()
            left = fol.Or(left, self._parse_and(), loc)
        return left

    def _parse_and(self) -> fol.Formula:
        left = self._parse_unary()
        while self.at("&"):
            loc = self.loc()
            self.next()
            left = fol.And(left, self._parse_unary(), loc)
        return left

    def _parse_unary(self) -> fol.Formula:
        loc = self.loc()
        if self.at("~"):
            self.next()
            return fol.Not(self._parse_unary(), loc)
        if self.at("!") or self.at("?"):
            universal = self.at("!")
            self.next()
            binders = self._parse_quant_binders()
            self.expect(":")
            body = self.parse_formula()
            return (fol.ForAll if universal else fol.Exists)(binders, body, loc)
        if self.peek().kind == "name" and self.peek().text in ("true", "false"):
            tok = self.next()
            return fol.BoolConst(tok.text == "true", loc)
        if self.at("("):
            # Either a parenthesised formula or a parenthesised term that
            # starts a comparison; try the formula reading first.
            save = self.pos
            try:
                self.next()
                inner = self.parse_formula()
                self.expect(")")
                if self.peek().text in _CMP_OPS or self.peek().text in ("+", "-", "*"):
                    raise self.err("parenthesised term")
                return inner
            except SpecSyntaxError:
                self.pos = save
        term = self.parse_term()
        if self.peek().text in _CMP_OPS:
            op = self.next().text
            if op == "<=":
                op = "=<"
            right = self.parse_term()
            return fol.Compare(op, term, right, loc)
        if isinstance(term, fol.Ident):
            return fol.Atom(term.name, (), term.loc)
        if isinstance(term, fol.FuncApp):
            return fol.Atom(term.func, term.args, term.loc)
        raise SpecSyntaxError("expected a formula", loc.line, loc.col)

    def _parse_quant_binders(self) -> Tuple[fol.Var, ...]:
        binders = []
        while True:
            name = self.expect_name("variable")
            self.expect("[")
            ty = self.expect_name("type name")
            self.expect("]")
            binders.append(fol.Var(name.text, ty.text, fol.Loc(name.line, name.col)))
            if self.at(","):
                self.next()
                continue
            if self.peek().kind == "name" and self.at("[", 1):
                continue
            return tuple(binders)

    # terms

    def parse_term(self) -> fol.Term:
        left = self._parse_mul()
        while self.at("+") or self.at("-"):
            loc = self.loc()
            op = self.next().text
            left = fol.Arith(op, left, self._parse_mul(), loc)
        return left

    def _parse_mul(self) -> fol.Term:
        left = self._parse_primary_term()
        while self.at("*"):
            loc = self.loc()
            self.next()
            left = fol.Arith("*", left, self._parse_primary_term(), loc)
        return left

    def _parse_primary_term(self) -> fol.Term:
        tok = self.peek()
        loc = fol.Loc(tok.line, tok.col)
        if tok.kind == "int":
            self.next()
            return fol.IntLit(int(tok.text), loc)
        if self.at("-"):
            self.next()
            inner = self._parse_primary_term()
            return fol.Arith("-", fol.IntLit(0, loc), inner, loc)
        if self.at("("):
            self.next()
            inner = self.parse_term()
            self.expect(")")
            return inner
        if tok.kind == "name":
            if tok.text in _AGG_KINDS and self.at("{", 1):
                return self._parse_aggregate()
            self.next()
            if self.at("("):
                self.next()
                args = [self.parse_term()]
                while self.at(","):
                    self.next()
                    args.append(self.parse_term())
                self.expect(")")
                return fol.FuncApp(tok.text, tuple(args), loc)
            return fol.Ident(tok.text, loc)
        raise SpecSyntaxError(f"expected a term, found {tok.text!r}", tok.line, tok.col)

    def _parse_aggregate(self) -> fol.Aggregate:
        kind_tok = self.next()
        loc = fol.Loc(kind_tok.line, kind_tok.col)
        kind = kind_tok.text
        self.expect("{")
        parenthesised = self.at("(")
        if parenthesised:
            self.next()
        items: List[object] = []
        while True:
            items.append(self._parse_agg_item())
            if self.at(","):
                self.next()
                continue
            break
        if parenthesised:
            self.expect(")")
        self.expect("|")
        condition = self.parse_formula()
        self.expect("}")

        weight: Optional[fol.Term] = None
        if kind != "card":
            if len(items) < 2:
                raise SpecSyntaxError(
                    f"{kind} aggregate needs (variables..., weight)", loc.line, loc.col
                )
            weight = items[-1]
            items = items[:-1]
        binders = []
        for item in items:
            if isinstance(item, fol.Var):
                binders.append(item)
            elif isinstance(item, fol.Ident):
                binders.append(fol.Var(item.name, "", item.loc))
            else:
                raise SpecSyntaxError(
                    "aggregate binder must be a variable", loc.line, loc.col
                )
        return fol.Aggregate(kind, tuple(binders), weight, condition, loc)

    def _parse_agg_item(self):
        if self.peek().kind == "name" and self.at("[", 1):
            name = self.next()
            self.next()
            ty = self.expect_name("type name")
            self.expect("]")
            return fol.Var(name.text, ty.text, fol.Loc(name.line, name.col))
        return self.parse_term()

    # structure

    def parse_structure_block(self):
        self.expect("{")
        entries = []
        while not self.at("}"):
            name = self.expect_name("symbol or type name")
            self.expect("=")
            if self.at("{"):
                self.next()
                items = []
                if not self.at("}"):
                    items.append(self._parse_struct_item())
                    while self.at(";"):
                        self.next()
                        items.append(self._parse_struct_item())
                self.expect("}")
                entries.append((name, ("set", items)))
            else:
                tok = self.next()
                if tok.kind == "int":
                    entries.append((name, ("scalar", int(tok.text))))
                elif tok.kind == "name":
                    entries.append((name, ("scalar", tok.text)))
                else:
                    raise SpecSyntaxError(
                        f"expected a value, found {tok.text!r}", tok.line, tok.col
                    )
        self.expect("}")
        return entries

    def _parse_struct_item(self):
        # chain := group ('->' group)*, group := elem | '(' elem (',' elem)* ')'
        groups = [self._parse_struct_group()]
        while self.at("->"):
            self.next()
            groups.append(self._parse_struct_group())
        return groups

    def _parse_struct_group(self):
        if self.at("("):
            self.next()
            if self.at(")"):
                self.next()
                return ()
            elems = [self._parse_struct_elem()]
            while self.at(","):
                self.next()
                elems.append(self._parse_struct_elem())
            self.expect(")")
            return tuple(elems)
        return (self._parse_struct_elem(),)

    def _parse_struct_elem(self) -> Element:
        neg = False
        if self.at("-"):
            self.next()
            neg = True
        tok = self.next()
        if tok.kind == "int":
            return -int(tok.text) if neg else int(tok.text)
        if tok.kind == "name" and not neg:
            return tok.text
        raise SpecSyntaxError(f"expected an element, found {tok.text!r}", tok.line, tok.col)


# ----------------------------------------------- structure interpretation


def _build_structure(vocab: Vocabulary, entries, loc_of) -> PartialStructure:
    domains: Dict[str, List[Element]] = {}
    table_entries = []  # (token, symbol, payload)
    for name_tok, payload in entries:
        name = name_tok.text
        if name in vocab.types or name == INT:
            if name == INT:
                raise SpecSyntaxError(
                    "the int domain comes from its declared range", name_tok.line, name_tok.col
                )
            kind, items = payload
            if kind != "set":
                raise SpecSyntaxError("a domain must be a {...} set", name_tok.line, name_tok.col)
            elems = []
            for chain in items:
                if len(chain) != 1 or len(chain[0]) != 1:
                    raise SpecSyntaxError(
                        "domain entries are single elements", name_tok.line, name_tok.col
                    )
                elems.append(chain[0][0])
            if name in domains:
                raise SpecSyntaxError(f"duplicate domain for {name}", name_tok.line, name_tok.col)
            if len(set(elems)) != len(elems):
                raise SpecSyntaxError(f"duplicate element in {name}", name_tok.line, name_tok.col)
            domains[name] = elems
        elif vocab.is_pred(name) or vocab.is_func(name):
            table_entries.append((name_tok, name, payload))
        else:
            raise SpecSyntaxError(f"unknown symbol or type {name}", name_tok.line, name_tok.col)

    for ty in vocab.types:
        if ty not in domains:
            raise SpecSyntaxError(f"no domain declared for type {ty}", 1, 1)
    if vocab.uses_int() and vocab.int_range is None:
        raise SpecSyntaxError("integer type requires a declared finite range", 1, 1)

    struct = PartialStructure(vocab, domains)
    tables = {sym: dict(struct.tables[sym]) for sym in struct.tables}

    def check_elem(tok, ty, value):
        if value not in struct.domains.get(ty, ()):
            raise SpecSyntaxError(f"{value} is not in the domain of {ty}", tok.line, tok.col)

    for tok, sym, payload in table_entries:
        kind, data = payload
        if vocab.is_pred(sym):
            decl = vocab.pred(sym)
            if kind == "scalar":
                if decl.arg_types:
                    raise SpecSyntaxError(f"{sym} expects a tuple set", tok.line, tok.col)
                if data not in ("true", "false"):
                    raise SpecSyntaxError(f"{sym} takes true or false", tok.line, tok.col)
                tables[sym][()] = T if data == "true" else F
                continue
            marked = any(ch[-1] in (("T",), ("F",)) for ch in data)
            listed = set()
            for chain in data:
                if marked:
                    if len(chain) < 2 or chain[-1] not in (("T",), ("F",)):
                        raise SpecSyntaxError(
                            f"mixed marked and unmarked entries for {sym}", tok.line, tok.col
                        )
                    mark = T if chain[-1] == ("T",) else F
                    groups = chain[:-1]
                else:
                    mark = T
                    groups = chain
                if len(groups) != 1:
                    raise SpecSyntaxError(f"bad entry for predicate {sym}", tok.line, tok.col)
                key = groups[0]
                if len(key) != len(decl.arg_types):
                    raise SpecSyntaxError(
                        f"{sym} expects {len(decl.arg_types)} arguments", tok.line, tok.col
                    )
                for ty, v in zip(decl.arg_types, key):
                    check_elem(tok, ty, v)
                if key in listed:
                    raise SpecSyntaxError(f"duplicate entry for {sym}{key}", tok.line, tok.col)
                listed.add(key)
                tables[sym][key] = mark
            if not marked:
                for key in tables[sym]:
                    if key not in listed:
                        tables[sym][key] = F
        else:
            decl = vocab.func(sym)
            arity = len(decl.arg_types)
            if kind == "scalar":
                if arity:
                    raise SpecSyntaxError(f"{sym} expects a mapping set", tok.line, tok.col)
                check_elem(tok, decl.result, data)
                for v in struct.domains[decl.result]:
                    tables[sym][(v,)] = T if v == data else F
                continue
            marked = any(ch[-1] in (("T",), ("F",)) for ch in data)
            rows_listed = set()
            listed = set()
            for chain in data:
                if marked:
                    if len(chain) < 2 or chain[-1] not in (("T",), ("F",)):
                        raise SpecSyntaxError(
                            f"mixed marked and unmarked entries for {sym}", tok.line, tok.col
                        )
                    mark = T if chain[-1] == ("T",) else F
                    groups = chain[:-1]
                else:
                    mark = T
                    groups = chain
                if arity == 0:
                    if len(groups) != 1 or len(groups[0]) != 1:
                        raise SpecSyntaxError(f"bad entry for constant {sym}", tok.line, tok.col)
                    args, res = (), groups[0][0]
                else:
                    if len(groups) != 2:
                        raise SpecSyntaxError(
                            f"function entries are written args->value", tok.line, tok.col
                        )
                    args, res_group = groups
                    if len(res_group) != 1:
                        raise SpecSyntaxError(f"bad result for {sym}", tok.line, tok.col)
                    res = res_group[0]
                if len(args) != arity:
                    raise SpecSyntaxError(
                        f"{sym} expects {arity} arguments", tok.line, tok.col
                    )
                for ty, v in zip(decl.arg_types, args):
                    check_elem(tok, ty, v)
                check_elem(tok, decl.result, res)
                key = args + (res,)
                if key in listed:
                    raise SpecSyntaxError(f"duplicate entry for {sym}{key}", tok.line, tok.col)
                listed.add(key)
                rows_listed.add(args)
                tables[sym][key] = mark
            if not marked:
                # Two-valued shorthand: the listed graph is total.
                for args in itertools.product(
                    *(struct.domains[t] for t in decl.arg_types)
                ):
                    if args not in rows_listed:
                        raise SpecSyntaxError(
                            f"{sym}{args} has no value in two-valued shorthand",
                            tok.line,
                            tok.col,
                        )
                for key in tables[sym]:
                    if key not in listed:
                        tables[sym][key] = F

    return PartialStructure(vocab, domains, tables)


# ------------------------------------------------------------ typechecking


@dataclass
class Diagnostic:
    message: str
    loc: fol.Loc

    def __str__(self):
        return f"{self.loc}: {self.message}"


class _NeedsContext(Exception):
    pass


class _Typechecker:
    def __init__(self, vocab: Vocabulary, domains: Dict[str, Tuple[Element, ...]]):
        self.vocab = vocab
        self.domains = domains
        self.errors: List[Diagnostic] = []

    def fail(self, msg: str, loc: fol.Loc):
        self.errors.append(Diagnostic(msg, loc))
        raise TypecheckFailure(self.errors[-1:])

    def element_types(self, name: str) -> List[str]:
        return [ty for ty, elems in self.domains.items() if ty != INT and name in elems]

    # --- terms

    def term(self, t: fol.Term, env: Dict[str, str], expected: Optional[str]):
        """Resolve and check one term; returns (resolved, type)."""
        if isinstance(t, fol.Ident):
            if t.name in env:
                ty = env[t.name]
                if expected and ty != expected:
                    self.fail(f"variable {t.name} has type {ty}, expected {expected}", t.loc)
                return fol.Var(t.name, ty, t.loc), ty
            if self.vocab.is_func(t.name):
                decl = self.vocab.func(t.name)
                if decl.arg_types:
                    self.fail(f"function {t.name} expects arguments", t.loc)
                if expected and decl.result != expected:
                    self.fail(
                        f"{t.name} has type {decl.result}, expected {expected}", t.loc
                    )
                return fol.FuncApp(t.name, (), t.loc), decl.result
            if self.vocab.is_pred(t.name):
                self.fail(f"predicate {t.name} used in term position", t.loc)
            if expected:
                if t.name in self.domains.get(expected, ()):
                    return fol.Const(t.name, expected, t.loc), expected
                self.fail(f"{t.name} is not in the domain of {expected}", t.loc)
            tys = self.element_types(t.name)
            if len(tys) == 1:
                return fol.Const(t.name, tys[0], t.loc), tys[0]
            if len(tys) > 1:
                self.fail(f"ambiguous element {t.name} (in {', '.join(tys)})", t.loc)
            raise _NeedsContext()
        if isinstance(t, fol.IntLit):
            if expected and expected != INT:
                self.fail(f"integer literal where {expected} expected", t.loc)
            return t, INT
        if isinstance(t, fol.Const):
            if expected and t.type != expected:
                self.fail(f"{t.value} has type {t.type}, expected {expected}", t.loc)
            return t, t.type
        if isinstance(t, fol.Var):
            if expected and t.type != expected:
                self.fail(f"variable {t.name} has type {t.type}, expected {expected}", t.loc)
            return t, t.type
        if isinstance(t, fol.FuncApp):
            if self.vocab.is_pred(t.func):
                self.fail(f"predicate {t.func} used in term position", t.loc)
            if not self.vocab.is_func(t.func):
                self.fail(f"unknown function {t.func}", t.loc)
            decl = self.vocab.func(t.func)
            if len(t.args) != len(decl.arg_types):
                self.fail(
                    f"{t.func} expects {len(decl.arg_types)} arguments, got {len(t.args)}",
                    t.loc,
                )
            args = tuple(
                self.term(a, env, ty)[0] for a, ty in zip(t.args, decl.arg_types)
            )
            if expected and decl.result != expected:
                self.fail(f"{t.func} has type {decl.result}, expected {expected}", t.loc)
            return fol.FuncApp(t.func, args, t.loc), decl.result
        if isinstance(t, fol.Arith):
            if expected and expected != INT:
                self.fail(f"arithmetic term where {expected} expected", t.loc)
            left, _ = self.term(t.left, env, INT)
            right, _ = self.term(t.right, env, INT)
            return fol.Arith(t.op, left, right, t.loc), INT
        if isinstance(t, fol.Aggregate):
            if expected and expected != INT:
                self.fail(f"aggregate term where {expected} expected", t.loc)
            return self.aggregate(t, env), INT
        raise KbcfgError(f"unexpected term {t!r}")

    def aggregate(self, t: fol.Aggregate, env: Dict[str, str]) -> fol.Aggregate:
        binders = []
        for b in t.binders:
            ty = b.type or self.infer_binder_type(b.name, t)
            if ty is None:
                self.fail(
                    f"cannot infer the type of {b.name}; annotate it as {b.name}[type]",
                    b.loc,
                )
            if ty != INT and ty not in self.vocab.types:
                self.fail(f"unknown type {ty}", b.loc)
            binders.append(fol.Var(b.name, ty, b.loc))
        inner = dict(env)
        inner.update({b.name: b.type for b in binders})
        weight = None
        if t.kind != "card":
            weight, _ = self.term(t.weight, inner, INT)
        condition = self.formula(t.condition, inner)
        return fol.Aggregate(t.kind, tuple(binders), weight, condition, t.loc)

    def infer_binder_type(self, name: str, agg: fol.Aggregate) -> Optional[str]:
        """Find the type of an unannotated binder from its typed occurrences."""
        found = set()

        def walk_term(t, shadowed):
            if isinstance(t, fol.FuncApp) and self.vocab.is_func(t.func):
                decl = self.vocab.func(t.func)
                for a, ty in zip(t.args, decl.arg_types):
                    if isinstance(a, fol.Ident) and a.name == name and name not in shadowed:
                        found.add(ty)
                    walk_term(a, shadowed)
            elif isinstance(t, fol.Arith):
                walk_term(t.left, shadowed)
                walk_term(t.right, shadowed)
            elif isinstance(t, fol.Aggregate):
                inner = shadowed | {b.name for b in t.binders}
                if t.weight is not None:
                    walk_term(t.weight, inner)
                walk_formula(t.condition, inner)

        def walk_formula(f, shadowed):
            if isinstance(f, fol.Atom) and self.vocab.is_pred(f.pred):
                decl = self.vocab.pred(f.pred)
                for a, ty in zip(f.args, decl.arg_types):
                    if isinstance(a, fol.Ident) and a.name == name and name not in shadowed:
                        found.add(ty)
                    walk_term(a, shadowed)
            elif isinstance(f, fol.Compare):
                walk_term(f.left, shadowed)
                walk_term(f.right, shadowed)
            elif isinstance(f, fol.Not):
                walk_formula(f.body, shadowed)
            elif isinstance(f, (fol.And, fol.Or, fol.Implies, fol.Iff)):
                walk_formula(f.left, shadowed)
                walk_formula(f.right, shadowed)
            elif isinstance(f, (fol.ForAll, fol.Exists)):
                walk_formula(f.body, shadowed | {b.name for b in f.binders})

        walk_formula(agg.condition, set())
        if agg.weight is not None:
            walk_term(agg.weight, set())
        if len(found) == 1:
            return found.pop()
        return None

    # --- formulas

    def formula(self, f: fol.Formula, env: Dict[str, str]) -> fol.Formula:
        if isinstance(f, fol.BoolConst):
            return f
        if isinstance(f, fol.Atom):
            if self.vocab.is_func(f.pred):
                self.fail(f"function {f.pred} used as an atom", f.loc)
            if f.pred in env:
                self.fail(f"variable {f.pred} used as an atom", f.loc)
            if not self.vocab.is_pred(f.pred):
                self.fail(f"unknown predicate {f.pred}", f.loc)
            decl = self.vocab.pred(f.pred)
            if len(f.args) != len(decl.arg_types):
                self.fail(
                    f"{f.pred} expects {len(decl.arg_types)} arguments, got {len(f.args)}",
                    f.loc,
                )
            args = tuple(
                self.term(a, env, ty)[0] for a, ty in zip(f.args, decl.arg_types)
            )
            return fol.Atom(f.pred, args, f.loc)
        if isinstance(f, fol.Compare):
            if f.op in ("<", ">", "=<", ">="):
                left, _ = self.term(f.left, env, INT)
                right, _ = self.term(f.right, env, INT)
                return fol.Compare(f.op, left, right, f.loc)
            try:
                left, lty = self.term(f.left, env, None)
                right, _ = self.term(f.right, env, lty)
            except _NeedsContext:
                try:
                    right, rty = self.term(f.right, env, None)
                    left, _ = self.term(f.left, env, rty)
                except _NeedsContext:
                    self.fail("cannot resolve either side of the comparison", f.loc)
            return fol.Compare(f.op, left, right, f.loc)
        if isinstance(f, fol.Not):
            return fol.Not(self.formula(f.body, env), f.loc)
        if isinstance(f, (fol.And, fol.Or, fol.Implies, fol.Iff)):
            return type(f)(self.formula(f.left, env), self.formula(f.right, env), f.loc)
        if isinstance(f, (fol.ForAll, fol.Exists)):
            inner = dict(env)
            for b in f.binders:
                if b.type != INT and b.type not in self.vocab.types:
                    self.fail(f"unknown type {b.type}", b.loc)
                inner[b.name] = b.type
            return type(f)(f.binders, self.formula(f.body, inner), f.loc)
        raise KbcfgError(f"unexpected formula {f!r}")


# ------------------------------------------------------------- public API


def parse(text: str) -> Problem:
    """Parse a specification into a problem with an unresolved theory."""
    parser = _Parser(text)
    (types, preds, funcs, int_range), raw_sentences, struct_entries = parser.parse_spec()
    vocab = _make_vocab(types, preds, funcs, int_range)
    structure = _build_structure(vocab, struct_entries, None)
    sentences = []
    labels = set()
    for i, (label, formula, loc) in enumerate(raw_sentences):
        label = label or f"s{i + 1}"
        if label in labels:
            raise SpecSyntaxError(f"duplicate sentence label {label}", loc.line, loc.col)
        labels.add(label)
        sentences.append(Sentence(label, formula, loc))
    theory = Theory(vocab, tuple(sentences))
    return Problem(vocab, theory, structure)


def _make_vocab(types, preds, funcs, int_range) -> Vocabulary:
    try:
        return Vocabulary(types, preds, funcs, int_range)
    except KbcfgError as e:
        raise SpecSyntaxError(str(e), 1, 1) from None


def typecheck(problem: Problem) -> Problem:
    """Resolve identifiers and enforce signatures; collects all diagnostics."""
    checker = _Typechecker(problem.vocab, problem.structure.domains)
    resolved = []
    errors: List[Diagnostic] = []
    for sent in problem.theory.sentences:
        try:
            resolved.append(Sentence(sent.label, checker.formula(sent.formula, {}), sent.loc))
        except TypecheckFailure as e:
            errors.extend(e.diagnostics)
        except _NeedsContext:
            errors.append(Diagnostic("unresolved identifier", sent.loc))
    if errors:
        raise TypecheckFailure(errors)
    theory = Theory(problem.vocab, tuple(resolved))
    return Problem(problem.vocab, theory, problem.structure)


def load(text: str) -> Problem:
    return typecheck(parse(text))


def parse_structure(text: str, vocab: Vocabulary) -> PartialStructure:
    """Parse a standalone `structure { ... }` block against a known vocabulary."""
    parser = _Parser(text)
    tok = parser.expect_name("block keyword")
    if tok.text != "structure":
        raise SpecSyntaxError("expected a structure block", tok.line, tok.col)
    entries = parser.parse_structure_block()
    if parser.peek().kind != "eof":
        t = parser.peek()
        raise SpecSyntaxError(f"unexpected {t.text!r} after structure block", t.line, t.col)
    return _build_structure(vocab, entries, None)


def serialize_structure(s: PartialStructure) -> str:
    """Emit a structure block; parse(serialize(s)) reproduces s exactly."""
    lines = ["structure {"]
    for ty in s.vocab.types:
        elems = "; ".join(str(e) for e in s.domains[ty])
        lines.append(f"  {ty} = {{{elems}}}")
    for sym in s.vocab.symbols():
        entries = []
        if s.vocab.is_pred(sym):
            for key, tv in s.tables[sym].items():
                if tv is U:
                    continue
                mark = "T" if tv is T else "F"
                if not key:
                    entries.append(f"()->{mark}")
                elif len(key) == 1:
                    entries.append(f"{key[0]}->{mark}")
                else:
                    entries.append(f"({','.join(str(v) for v in key)})->{mark}")
        else:
            decl = s.vocab.func(sym)
            for key, tv in s.tables[sym].items():
                if tv is U:
                    continue
                mark = "T" if tv is T else "F"
                args, res = key[:-1], key[-1]
                if not args:
                    entries.append(f"{res}->{mark}")
                elif len(args) == 1:
                    entries.append(f"{args[0]}->{res}->{mark}")
                else:
                    entries.append(f"({','.join(str(v) for v in args)})->{res}->{mark}")
        if entries:
            lines.append(f"  {sym} = {{{'; '.join(entries)}}}")
    lines.append("}")
    return "\n".join(lines)


# ----------------------------------------------------- term path parsing


def parse_domain_term(text: str, structure: PartialStructure) -> DomainTerm:
    """Parse a term path like `Install(Windows)` or `Cost` against a structure."""
    parser = _Parser(text)
    tok = parser.expect_name("symbol")
    args: Tuple[Element, ...] = ()
    if parser.at("("):
        parser.next()
        if not parser.at(")"):
            elems = [parser._parse_struct_elem()]
            while parser.at(","):
                parser.next()
                elems.append(parser._parse_struct_elem())
            args = tuple(elems)
        parser.expect(")")
    if parser.peek().kind != "eof":
        t = parser.peek()
        raise SpecSyntaxError(f"unexpected {t.text!r} in term path", t.line, t.col)
    name = tok.text
    vocab = structure.vocab
    if vocab.is_pred(name):
        arg_types = vocab.pred(name).arg_types
    elif vocab.is_func(name):
        arg_types = vocab.func(name).arg_types
    else:
        raise SpecSyntaxError(f"unknown symbol {name}", tok.line, tok.col)
    if len(args) != len(arg_types):
        raise SpecSyntaxError(
            f"{name} expects {len(arg_types)} arguments, got {len(args)}", tok.line, tok.col
        )
    for ty, v in zip(arg_types, args):
        if v not in structure.domains.get(ty, ()):
            raise SpecSyntaxError(f"{v} is not in the domain of {ty}", tok.line, tok.col)
    return DomainTerm(name, args)


def parse_value(raw, term: DomainTerm, structure: PartialStructure):
    """Coerce a request/CLI value for `term`: true/false or a domain element."""
    vocab = structure.vocab
    if vocab.is_pred(term.symbol):
        if isinstance(raw, bool):
            return raw
        if isinstance(raw, str) and raw.lower() in ("true", "false", "t", "f"):
            return raw.lower() in ("true", "t")
        raise KbcfgError(f"{term} is a predicate atom; value must be true/false")
    result = vocab.func(term.symbol).result
    domain = structure.domains[result]
    if isinstance(raw, bool):
        raise KbcfgError(f"{term} takes a {result} value")
    if isinstance(raw, int):
        value: Element = raw
    else:
        text = str(raw)
        if text.lstrip("-").isdigit():
            value = int(text)
        else:
            value = text
    if value not in domain:
        raise KbcfgError(f"{value} is not in the domain of {result}")
    return value
