"""Knowledge-base interactive configuration engine.

One declarative specification (typed first-order theory plus a three-valued
partial structure) serves many inference operations: model expansion,
propagation, optimization, explanation and backtracking, exposed through a
Python API, a stateless HTTP service and a CLI.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    Assignment,
    DomainTerm,
    PartialStructure,
    Problem,
    Sentence,
    Theory,
    Truth,
    Vocabulary,
)
from .lang import load, parse, parse_structure, serialize_structure, typecheck  # noqa: F401
