"""Exception hierarchy shared across the engine."""


class KbcfgError(Exception):
    """Base class for all engine errors."""


class SpecSyntaxError(KbcfgError):
    """Raised by the parser; carries a source position."""

    def __init__(self, message, line, col):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class TypecheckFailure(KbcfgError):
    """Raised after type checking; collects every diagnostic found."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class IncomparableStructures(KbcfgError):
    def __init__(self, detail=""):
        super().__init__("incomparable structures" + (f": {detail}" if detail else ""))


class ConflictingAssignment(KbcfgError):
    def __init__(self, detail=""):
        super().__init__("conflicting assignment" + (f": {detail}" if detail else ""))


class UnknownTerm(KbcfgError):
    pass


class RangeExceeded(KbcfgError):
    def __init__(self, detail=""):
        super().__init__("range exceeded" + (f": {detail}" if detail else ""))


class UnsupportedAggregate(KbcfgError):
    pass


class StructureNotTotal(KbcfgError):
    def __init__(self):
        super().__init__("structure not total")


class InconsistentState(KbcfgError):
    def __init__(self):
        super().__init__("inconsistent state")


class ConsistentState(KbcfgError):
    def __init__(self):
        super().__init__("state is consistent")


class BackgroundInconsistent(KbcfgError):
    def __init__(self):
        super().__init__("background inconsistent")


class ExplanationTooLarge(KbcfgError):
    def __init__(self):
        super().__init__("instance too large for minimum core")


class ValueConflictsWithBaseData(KbcfgError):
    def __init__(self):
        super().__init__("value conflicts with base data")


class SolveTimeout(KbcfgError):
    def __init__(self):
        super().__init__("timeout")
