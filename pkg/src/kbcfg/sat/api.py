"""Shared result type for the solver backends."""

from dataclasses import dataclass
from typing import FrozenSet, List, Optional


@dataclass(frozen=True)
class SatOutcome:
    """Either a satisfying valuation or an unsat core over the assumptions.

    `model` is indexed by variable (entry 0 unused). `core` is a subset of
    the assumption literals whose conjunction with the clause database is
    unsatisfiable; it is empty when the database alone is unsatisfiable.
    """

    status: str  # 'sat' | 'unsat'
    model: Optional[List[bool]] = None
    core: Optional[FrozenSet[int]] = None

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"
