"""Abstract syntax for typed first-order formulas, terms and aggregates.

Nodes are plain frozen dataclasses. The parser produces `Ident` leaves for
names it cannot resolve locally; the typechecker rewrites those into `Var`,
`Const` or `FuncApp` and annotates binders with their types. Everything after
the typechecker works on resolved trees only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union


@dataclass(frozen=True)
class Loc:
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


NOLOC = Loc(0, 0)


# ---------------------------------------------------------------- terms


@dataclass(frozen=True)
class Ident:
    """Unresolved identifier as a term (variable, constant or 0-ary function)."""

    name: str
    loc: Loc = NOLOC


@dataclass(frozen=True)
class Var:
    name: str
    type: str
    loc: Loc = NOLOC


@dataclass(frozen=True)
class Const:
    """A named domain element, tagged with its type."""

    value: Union[str, int]
    type: str
    loc: Loc = NOLOC


@dataclass(frozen=True)
class IntLit:
    value: int
    loc: Loc = NOLOC


@dataclass(frozen=True)
class FuncApp:
    func: str
    args: Tuple["Term", ...]
    loc: Loc = NOLOC


@dataclass(frozen=True)
class Arith:
    op: str  # '+', '-', '*'
    left: "Term"
    right: "Term"
    loc: Loc = NOLOC


@dataclass(frozen=True)
class Aggregate:
    """Agg over a definable set: kind{(x1,..,xn, weight) | condition}.

    `card` has no weight expression (each member counts 1).
    """

    kind: str  # 'sum' | 'card' | 'min' | 'max' | 'prod'
    binders: Tuple[Var, ...]
    weight: Optional["Term"]
    condition: "Formula"
    loc: Loc = NOLOC


Term = Union[Ident, Var, Const, IntLit, FuncApp, Arith, Aggregate]


# ------------------------------------------------------------- formulas


@dataclass(frozen=True)
class BoolConst:
    value: bool
    loc: Loc = NOLOC


@dataclass(frozen=True)
class Atom:
    pred: str
    args: Tuple[Term, ...]
    loc: Loc = NOLOC


@dataclass(frozen=True)
class Compare:
    op: str  # '=', '~=', '<', '>', '=<', '>='
    left: Term
    right: Term
    loc: Loc = NOLOC


@dataclass(frozen=True)
class Not:
    body: "Formula"
    loc: Loc = NOLOC


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"
    loc: Loc = NOLOC


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"
    loc: Loc = NOLOC


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"
    loc: Loc = NOLOC


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"
    loc: Loc = NOLOC


@dataclass(frozen=True)
class ForAll:
    binders: Tuple[Var, ...]
    body: "Formula"
    loc: Loc = NOLOC


@dataclass(frozen=True)
class Exists:
    binders: Tuple[Var, ...]
    body: "Formula"
    loc: Loc = NOLOC


Formula = Union[BoolConst, Atom, Compare, Not, And, Or, Implies, Iff, ForAll, Exists]


@dataclass(frozen=True)
class SetExpr:
    """{x1,..,xn | condition} with explicitly typed binders (query input)."""

    binders: Tuple[Var, ...]
    condition: Formula
    loc: Loc = NOLOC


# ------------------------------------------------------------ rendering

_CMP_NEG = {"=": "~=", "~=": "=", "<": ">=", ">=": "<", ">": "=<", "=<": ">"}


def negate_cmp(op: str) -> str:
    return _CMP_NEG[op]


def render_term(t: Term) -> str:
    if isinstance(t, (Ident,)):
        return t.name
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return str(t.value)
    if isinstance(t, IntLit):
        return str(t.value)
    if isinstance(t, FuncApp):
        if not t.args:
            return t.func
        return f"{t.func}({','.join(render_term(a) for a in t.args)})"
    if isinstance(t, Arith):
        return f"({render_term(t.left)} {t.op} {render_term(t.right)})"
    if isinstance(t, Aggregate):
        inner = ",".join(b.name for b in t.binders)
        if t.weight is not None:
            inner = f"({inner}, {render_term(t.weight)})"
        return f"{t.kind}{{{inner} | {render_formula(t.condition)}}}"
    raise TypeError(f"not a term: {t!r}")


def render_formula(f: Formula) -> str:
    if isinstance(f, BoolConst):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        if not f.args:
            return f.pred
        return f"{f.pred}({','.join(render_term(a) for a in f.args)})"
    if isinstance(f, Compare):
        return f"{render_term(f.left)} {f.op} {render_term(f.right)}"
    if isinstance(f, Not):
        return f"~({render_formula(f.body)})"
    if isinstance(f, And):
        return f"({render_formula(f.left)} & {render_formula(f.right)})"
    if isinstance(f, Or):
        return f"({render_formula(f.left)} | {render_formula(f.right)})"
    if isinstance(f, Implies):
        return f"({render_formula(f.left)} => {render_formula(f.right)})"
    if isinstance(f, Iff):
        return f"({render_formula(f.left)} <=> {render_formula(f.right)})"
    if isinstance(f, (ForAll, Exists)):
        q = "!" if isinstance(f, ForAll) else "?"
        binders = " ".join(f"{b.name}[{b.type}]" for b in f.binders)
        return f"{q}{binders}: {render_formula(f.body)}"
    raise TypeError(f"not a formula: {f!r}")


def substitute(f: Formula, env: dict) -> Formula:
    """Replace bound variables that occur in `env` by constants."""

    def sub_t(t: Term) -> Term:
        if isinstance(t, Var):
            if t.name in env:
                v = env[t.name]
                return Const(v, t.type, t.loc)
            return t
        if isinstance(t, FuncApp):
            return FuncApp(t.func, tuple(sub_t(a) for a in t.args), t.loc)
        if isinstance(t, Arith):
            return Arith(t.op, sub_t(t.left), sub_t(t.right), t.loc)
        if isinstance(t, Aggregate):
            inner = {k: v for k, v in env.items() if k not in {b.name for b in t.binders}}
            w = substitute_term(t.weight, inner) if t.weight is not None else None
            return Aggregate(t.kind, t.binders, w, substitute(t.condition, inner), t.loc)
        return t

    if isinstance(f, BoolConst):
        return f
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(sub_t(a) for a in f.args), f.loc)
    if isinstance(f, Compare):
        return Compare(f.op, sub_t(f.left), sub_t(f.right), f.loc)
    if isinstance(f, Not):
        return Not(substitute(f.body, env), f.loc)
    if isinstance(f, (And, Or, Implies, Iff)):
        return type(f)(substitute(f.left, env), substitute(f.right, env), f.loc)
    if isinstance(f, (ForAll, Exists)):
        inner = {k: v for k, v in env.items() if k not in {b.name for b in f.binders}}
        return type(f)(f.binders, substitute(f.body, inner), f.loc)
    raise TypeError(f"not a formula: {f!r}")


def substitute_term(t: Term, env: dict) -> Term:
    return substitute(Compare("=", t, IntLit(0)), env).left
