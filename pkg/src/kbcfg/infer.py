"""Base inferences over (theory, partial structure): model expansion,
model checking, minimization and exact propagation.

All solver-backed operations accept a `seed` (reproducible tie-breaking) and
an optional wall-clock `deadline` (monotonic seconds); crossing the deadline
raises SolveTimeout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .core import (
    DomainTerm,
    Element,
    F,
    INT,
    PartialStructure,
    T,
    Theory,
    Truth,
    U,
    check_total,
    eval_formula,
)
from .errors import InconsistentState, KbcfgError
from .ground import GroundProblem, decode_model, ground
from .sat import CdclSolver


def solver_for(gp: GroundProblem, seed: int = 0) -> CdclSolver:
    solver = CdclSolver(gp.num_vars, seed=seed)
    for clause in gp.clauses:
        solver.add_clause(clause)
    return solver


# ------------------------------------------------------------ modelcheck


def modelcheck(theory: Theory, structure: PartialStructure) -> bool:
    """Classical satisfaction on a total structure; a polynomial walk."""
    check_total(structure)
    return all(eval_formula(structure, s.formula) is T for s in theory.sentences)


def violated_sentences(theory: Theory, structure: PartialStructure) -> List[str]:
    check_total(structure)
    return [s.label for s in theory.sentences if eval_formula(structure, s.formula) is not T]


# ----------------------------------------------------------- modelexpand


def modelexpand(
    theory: Theory,
    structure: PartialStructure,
    seed: int = 0,
    deadline: Optional[float] = None,
) -> Optional[PartialStructure]:
    """A total model of the theory extending the structure, or None (UNSAT)."""
    gp = ground(theory, structure)
    outcome = solver_for(gp, seed).solve(deadline=deadline)
    if not outcome.is_sat:
        return None
    return decode_model(gp.varmap, outcome.model)


# -------------------------------------------------------------- minimize


def _objective_row(gp: GroundProblem, objective: DomainTerm):
    vocab = gp.structure.vocab
    if not vocab.is_func(objective.symbol) or vocab.func(objective.symbol).result != INT:
        raise KbcfgError(f"objective {objective} is not an integer-typed term")
    return gp.value_literals(objective)


def minimize(
    theory: Theory,
    structure: PartialStructure,
    objective: DomainTerm,
    seed: int = 0,
    deadline: Optional[float] = None,
) -> Optional[PartialStructure]:
    """A model whose objective value is minimal; descending branch-and-bound."""
    gp = ground(theory, structure)
    solver = solver_for(gp, seed)
    row = _objective_row(gp, objective)
    return _minimize_on(solver, gp, row, (), deadline)


def _minimize_on(solver, gp, row, assumptions, deadline):
    outcome = solver.solve(assumptions, deadline=deadline)
    if not outcome.is_sat:
        return None
    best_model = outcome.model
    while True:
        best = _row_value(row, best_model)
        # forbid every objective value >= the current best; the next model,
        # if any, is strictly cheaper, so this terminates
        for value, var in row:
            if value >= best:
                solver.add_clause((-var,))
        outcome = solver.solve(assumptions, deadline=deadline)
        if not outcome.is_sat:
            break
        best_model = outcome.model
    return decode_model(gp.varmap, best_model)


def _row_value(row, model):
    for value, var in row:
        if model[var]:
            return value
    raise KbcfgError("objective has no value in the model: encoding bug")


# -------------------------------------------------------------- propagate


@dataclass(frozen=True)
class PropagationResult:
    """The refined structure plus every (term, value) pair decided by it."""

    structure: PartialStructure
    newly: Tuple[Tuple[DomainTerm, Union[Element, bool], Truth], ...]


def _unknown_atom_vars(gp: GroundProblem, structure: PartialStructure) -> List[int]:
    vm = gp.varmap
    out = []
    for var in range(1, vm.num_atoms + 1):
        atom = vm.atom(var)
        if atom[0] == "p":
            tv = structure.pred_value(atom[1], atom[2])
        else:
            tv = structure.graph_value(atom[1], atom[2], atom[3])
        if tv is U:
            out.append(var)
    return out


def forced_atoms(
    solver: CdclSolver,
    candidates: Sequence[int],
    assumptions: Sequence[int] = (),
    deadline: Optional[float] = None,
    keep_models: Optional[list] = None,
) -> Dict[int, bool]:
    """Value-atom variables fixed across all models, by assumption probing.

    A first model seeds one candidate value per variable; each further model
    prunes every candidate it disagrees on, so the number of solver calls is
    roughly the number of forced atoms plus the number of pruning models.
    Raises InconsistentState when no model exists at all.
    """
    outcome = solver.solve(assumptions, deadline=deadline)
    if not outcome.is_sat:
        raise InconsistentState()
    model = outcome.model
    if keep_models is not None:
        keep_models.append(model)
    pending: Dict[int, bool] = {v: model[v] for v in candidates}
    forced: Dict[int, bool] = {}
    for var in candidates:
        want = pending.get(var)
        if want is None:
            continue
        probe = -var if want else var
        outcome = solver.solve(tuple(assumptions) + (probe,), deadline=deadline)
        if outcome.is_sat:
            m2 = outcome.model
            if keep_models is not None:
                keep_models.append(m2)
            for v2 in list(pending):
                if pending[v2] != m2[v2]:
                    del pending[v2]
        else:
            forced[var] = want
            del pending[var]
    return forced


def _apply_forced(
    gp: GroundProblem, structure: PartialStructure, forced: Dict[int, bool]
) -> PropagationResult:
    vm = gp.varmap
    updates: Dict[Tuple[str, tuple], Truth] = {}
    newly: List[Tuple[DomainTerm, Union[Element, bool], Truth]] = []
    for var, val in forced.items():
        atom = vm.atom(var)
        tv = T if val else F
        if atom[0] == "p":
            _, sym, args = atom
            updates[(sym, args)] = tv
            newly.append((DomainTerm(sym, args), True, tv))
            newly.append((DomainTerm(sym, args), False, tv.negate()))
        else:
            _, sym, args, res = atom
            updates[(sym, args + (res,))] = tv
            newly.append((DomainTerm(sym, args), res, tv))
    refined = structure.with_updates(updates) if updates else structure
    return PropagationResult(refined, tuple(newly))


def propagate(
    theory: Theory,
    structure: PartialStructure,
    seed: int = 0,
    deadline: Optional[float] = None,
) -> PropagationResult:
    """Exact propagation: everything true (false) in all models extending s.

    Raises InconsistentState when no model extends the structure.
    """
    gp = ground(theory, structure)
    solver = solver_for(gp, seed)
    candidates = _unknown_atom_vars(gp, structure)
    forced = forced_atoms(solver, candidates, deadline=deadline)
    return _apply_forced(gp, structure, forced)
