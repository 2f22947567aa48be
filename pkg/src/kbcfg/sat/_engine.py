"""Pure-Python conflict-driven clause-learning solver.

Reference implementation for the compiled backend in `_engine_cy.pyx`; the
two are ported statement for statement and must take identical decisions, so
the rest of the engine can run on either. Features: two-watched-literal
propagation, first-UIP learning, VSIDS activities with an indexed heap, phase
saving, Luby restarts, assumptions as pseudo-decision levels with
final-conflict core extraction, incremental clause addition and monotone
variable growth.
"""

from __future__ import annotations

import time
from typing import List, Optional, Sequence

from ..errors import SolveTimeout
from .api import SatOutcome

_VAR_DECAY = 0.95
_RESCALE = 1e100
_RESTART_BASE = 128


def luby(i: int) -> int:
    """Value of the Luby restart sequence at 0-based index i."""
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) // 2
        seq -= 1
        i = i % size
    return 1 << seq


class _VarOrder:
    """Indexed max-heap over variables: higher activity first, lower index on ties."""

    __slots__ = ("act", "heap", "pos")

    def __init__(self, act: List[float]):
        self.act = act
        self.heap: List[int] = []
        self.pos: List[int] = [-1] * len(act)

    def _lt(self, a: int, b: int) -> bool:
        if self.act[a] != self.act[b]:
            return self.act[a] > self.act[b]
        return a < b

    def grow(self, v: int):
        while len(self.pos) < v + 1:
            self.pos.append(-1)

    def in_heap(self, v: int) -> bool:
        return self.pos[v] >= 0

    def _sift_up(self, i: int):
        heap, pos = self.heap, self.pos
        v = heap[i]
        while i > 0:
            parent = (i - 1) >> 1
            if self._lt(v, heap[parent]):
                heap[i] = heap[parent]
                pos[heap[i]] = i
                i = parent
            else:
                break
        heap[i] = v
        pos[v] = i

    def _sift_down(self, i: int):
        heap, pos = self.heap, self.pos
        v = heap[i]
        n = len(heap)
        while True:
            left = 2 * i + 1
            if left >= n:
                break
            right = left + 1
            child = right if right < n and self._lt(heap[right], heap[left]) else left
            if self._lt(heap[child], v):
                heap[i] = heap[child]
                pos[heap[i]] = i
                i = child
            else:
                break
        heap[i] = v
        pos[v] = i

    def insert(self, v: int):
        if self.pos[v] >= 0:
            return
        self.heap.append(v)
        self.pos[v] = len(self.heap) - 1
        self._sift_up(len(self.heap) - 1)

    def update(self, v: int):
        if self.pos[v] >= 0:
            self._sift_up(self.pos[v])

    def pop(self) -> int:
        heap, pos = self.heap, self.pos
        top = heap[0]
        last = heap.pop()
        pos[top] = -1
        if heap:
            heap[0] = last
            pos[last] = 0
            self._sift_down(0)
        return top

    def empty(self) -> bool:
        return not self.heap


class CdclSolver:
    """Incremental CDCL solver over DIMACS-style integer literals."""

    def __init__(self, num_vars: int, seed: int = 0):
        self.nvars = 0
        self.rng = (seed & 0xFFFFFFFFFFFFFFFF) or 0x9E3779B97F4A7C15
        self.clauses: List[Optional[List[int]]] = []
        self.learnt_refs: List[int] = []
        self.watches: List[List[int]] = [[], []]
        self.assign: List[int] = [0]  # 0 unknown, 1 true, -1 false
        self.level: List[int] = [0]
        self.reason: List[int] = [-1]  # clause ref or -1
        self.act: List[float] = [0.0]
        self.phase: List[int] = [0]
        self.seen: List[int] = [0]
        self.trail: List[int] = []
        self.trail_lim: List[int] = []
        self.qhead = 0
        self.order = _VarOrder(self.act)
        self.var_inc = 1.0
        self.ok = True
        self.conflicts = 0
        self.max_learnts = 4000.0
        for _ in range(num_vars):
            self.new_var()

    # ------------------------------------------------------------ set-up

    def _next_phase(self) -> int:
        # xorshift64*, kept bit-for-bit identical in the compiled backend
        x = self.rng
        x ^= x >> 12
        x = (x ^ (x << 25)) & 0xFFFFFFFFFFFFFFFF
        x ^= x >> 27
        self.rng = x
        return 1 if (x * 0x2545F4914F6CDD1D) & 0x8000000000000000 else -1

    def new_var(self) -> int:
        self.nvars += 1
        v = self.nvars
        self.assign.append(0)
        self.level.append(0)
        self.reason.append(-1)
        self.act.append(0.0)
        self.phase.append(self._next_phase())
        self.watches.append([])
        self.watches.append([])
        self.seen.append(0)
        self.order.grow(v)
        self.order.insert(v)
        return v

    def _value(self, lit: int) -> int:
        return self.assign[lit] if lit > 0 else -self.assign[-lit]

    def add_clause(self, lits: Sequence[int]) -> bool:
        """Add a permanent clause; returns False once the database is unsat."""
        if not self.ok:
            return False
        self._backtrack(0)
        out: List[int] = []
        seen = set()
        for lit in lits:
            if -lit in seen:
                return True  # tautology
            if lit in seen:
                continue
            val = self._value(lit)
            if val == 1:
                return True  # satisfied at level 0
            if val == -1:
                continue  # false at level 0
            seen.add(lit)
            out.append(lit)
        if not out:
            self.ok = False
            return False
        if len(out) == 1:
            self._enqueue(out[0], -1)
            self.ok = self._propagate() == -1
            return self.ok
        ref = len(self.clauses)
        self.clauses.append(out)
        self.watches[2 * out[0] if out[0] > 0 else -2 * out[0] + 1].append(ref)
        self.watches[2 * out[1] if out[1] > 0 else -2 * out[1] + 1].append(ref)
        return True

    # ------------------------------------------------------------ search

    def _enqueue(self, lit: int, reason_ref: int):
        v = lit if lit > 0 else -lit
        self.assign[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason_ref
        self.trail.append(lit)

    def _new_level(self):
        self.trail_lim.append(len(self.trail))

    def _backtrack(self, target: int):
        if len(self.trail_lim) <= target:
            return
        limit = self.trail_lim[target]
        order = self.order
        for i in range(len(self.trail) - 1, limit - 1, -1):
            lit = self.trail[i]
            v = lit if lit > 0 else -lit
            self.assign[v] = 0
            self.reason[v] = -1
            self.phase[v] = 1 if lit > 0 else -1
            if not order.in_heap(v):
                order.insert(v)
        del self.trail[limit:]
        del self.trail_lim[target:]
        self.qhead = limit

    def _propagate(self) -> int:
        """Unit propagation to fixpoint; returns a conflicting clause ref or -1."""
        assign = self.assign
        clauses = self.clauses
        watches = self.watches
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            # p just became true, so visit the clauses watching -p
            widx = (-2 * p) if p < 0 else (2 * p + 1)
            ws = watches[widx]
            i = j = 0
            n = len(ws)
            while i < n:
                ref = ws[i]
                i += 1
                clause = clauses[ref]
                if clause is None:
                    continue
                if clause[0] == -p:
                    clause[0] = clause[1]
                    clause[1] = -p
                first = clause[0]
                fv = assign[first] if first > 0 else -assign[-first]
                if fv == 1:
                    ws[j] = ref
                    j += 1
                    continue
                moved = False
                for k in range(2, len(clause)):
                    lk = clause[k]
                    if (assign[lk] if lk > 0 else -assign[-lk]) != -1:
                        clause[1] = lk
                        clause[k] = -p
                        watches[2 * lk if lk > 0 else -2 * lk + 1].append(ref)
                        moved = True
                        break
                if moved:
                    continue
                ws[j] = ref
                j += 1
                if fv == -1:
                    while i < n:
                        ws[j] = ws[i]
                        j += 1
                        i += 1
                    del ws[j:n]
                    self.qhead = len(self.trail)
                    return ref
                self._enqueue(first, ref)
            if j < n:
                del ws[j:n]
        return -1

    def _bump(self, v: int):
        self.act[v] += self.var_inc
        if self.act[v] > _RESCALE:
            for i in range(1, self.nvars + 1):
                self.act[i] *= 1e-100
            self.var_inc *= 1e-100
        self.order.update(v)

    def _analyze(self, confl: int):
        """First-UIP conflict analysis; returns (learnt clause, backjump level)."""
        seen = self.seen
        level = self.level
        learnt: List[int] = [0]
        counter = 0
        p = 0
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        ref = confl
        while True:
            clause = self.clauses[ref]
            for k in range(1 if p else 0, len(clause)):
                q = clause[k]
                v = q if q > 0 else -q
                if not seen[v] and level[v] > 0:
                    seen[v] = 1
                    self._bump(v)
                    if level[v] >= cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while True:
                lit = self.trail[idx]
                v = lit if lit > 0 else -lit
                if seen[v]:
                    break
                idx -= 1
            p = self.trail[idx]
            v = p if p > 0 else -p
            ref = self.reason[v]
            seen[v] = 0
            counter -= 1
            idx -= 1
            if counter == 0:
                break
        learnt[0] = -p
        for k in range(1, len(learnt)):
            q = learnt[k]
            seen[q if q > 0 else -q] = 0
        if len(learnt) == 1:
            return learnt, 0
        max_i = 1
        max_level = level[abs(learnt[1])]
        for k in range(2, len(learnt)):
            lv = level[abs(learnt[k])]
            if lv > max_level:
                max_level = lv
                max_i = k
        learnt[1], learnt[max_i] = learnt[max_i], learnt[1]
        return learnt, max_level

    def _analyze_final(self, confl_lits: Sequence[int]) -> set:
        """Assumption decisions responsible for the given falsified literals."""
        seen = self.seen
        core = set()
        marked = []
        for q in confl_lits:
            v = q if q > 0 else -q
            if self.level[v] > 0 and not seen[v]:
                seen[v] = 1
                marked.append(v)
        start = self.trail_lim[0] if self.trail_lim else len(self.trail)
        for i in range(len(self.trail) - 1, start - 1, -1):
            lit = self.trail[i]
            v = lit if lit > 0 else -lit
            if not seen[v]:
                continue
            ref = self.reason[v]
            if ref == -1:
                core.add(lit)
            else:
                for q in self.clauses[ref]:
                    w = q if q > 0 else -q
                    if w != v and self.level[w] > 0 and not seen[w]:
                        seen[w] = 1
                        marked.append(w)
        for v in marked:
            seen[v] = 0
        return core

    def _reduce_db(self):
        drop_until = len(self.learnt_refs) // 2
        new_refs: List[int] = []
        for i, ref in enumerate(self.learnt_refs):
            clause = self.clauses[ref]
            if clause is None:
                continue
            if i < drop_until and len(clause) > 2:
                v0 = clause[0] if clause[0] > 0 else -clause[0]
                locked = self.reason[v0] == ref and self.assign[v0] != 0
                if not locked:
                    self.clauses[ref] = None
                    continue
            new_refs.append(ref)
        self.learnt_refs = new_refs
        self.max_learnts *= 1.1

    def _decide(self) -> bool:
        order = self.order
        while not order.empty():
            v = order.pop()
            if self.assign[v] == 0:
                self._new_level()
                self._enqueue(v if self.phase[v] >= 0 else -v, -1)
                return True
        return False

    def solve(
        self, assumptions: Sequence[int] = (), deadline: Optional[float] = None
    ) -> SatOutcome:
        """Search under the given assumption literals; deterministic per seed."""
        if not self.ok:
            return SatOutcome("unsat", core=frozenset())
        self._backtrack(0)
        if self._propagate() != -1:
            self.ok = False
            return SatOutcome("unsat", core=frozenset())
        assumptions = list(assumptions)
        aset = set(assumptions)
        restart_count = 0
        budget = luby(restart_count) * _RESTART_BASE
        conflicts_here = 0
        while True:
            confl = self._propagate()
            if confl != -1:
                self.conflicts += 1
                conflicts_here += 1
                cur_level = len(self.trail_lim)
                if cur_level == 0:
                    self.ok = False
                    return SatOutcome("unsat", core=frozenset())
                if cur_level <= len(assumptions):
                    core = self._analyze_final(self.clauses[confl])
                    self._backtrack(0)
                    return SatOutcome("unsat", core=frozenset(core & aset))
                learnt, bt = self._analyze(confl)
                self._backtrack(bt)
                if len(learnt) == 1:
                    lit = learnt[0]
                    val = self._value(lit)
                    if val == -1:
                        self.ok = False
                        return SatOutcome("unsat", core=frozenset())
                    if val == 0:
                        self._enqueue(lit, -1)
                else:
                    ref = len(self.clauses)
                    self.clauses.append(learnt)
                    self.learnt_refs.append(ref)
                    l0, l1 = learnt[0], learnt[1]
                    self.watches[2 * l0 if l0 > 0 else -2 * l0 + 1].append(ref)
                    self.watches[2 * l1 if l1 > 0 else -2 * l1 + 1].append(ref)
                    self._enqueue(l0, ref)
                self.var_inc /= _VAR_DECAY
                if len(self.learnt_refs) > self.max_learnts:
                    self._reduce_db()
                if deadline is not None and self.conflicts % 64 == 0:
                    if time.monotonic() > deadline:
                        self._backtrack(0)
                        raise SolveTimeout()
                if conflicts_here >= budget:
                    restart_count += 1
                    budget = luby(restart_count) * _RESTART_BASE
                    conflicts_here = 0
                    self._backtrack(0)
                continue
            # place pending assumptions, one decision level each
            pending = False
            while len(self.trail_lim) < len(assumptions):
                p = assumptions[len(self.trail_lim)]
                val = self._value(p)
                if val == 1:
                    self._new_level()
                    continue
                if val == -1:
                    core = self._analyze_final([p])
                    core.add(p)
                    self._backtrack(0)
                    return SatOutcome("unsat", core=frozenset(core & aset))
                self._new_level()
                self._enqueue(p, -1)
                pending = True
                break
            if pending:
                continue
            if deadline is not None and time.monotonic() > deadline:
                self._backtrack(0)
                raise SolveTimeout()
            if not self._decide():
                model = [False] * (self.nvars + 1)
                assign = self.assign
                for v in range(1, self.nvars + 1):
                    model[v] = assign[v] == 1
                self._backtrack(0)
                return SatOutcome("sat", model=model)
