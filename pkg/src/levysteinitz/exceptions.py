"""Exception hierarchy shared by all modules."""


class LevySteinitzError(Exception):
    """Base class for every error raised by this package."""


class DegenerateWitness(LevySteinitzError):
    pass


class OutsideHull(LevySteinitzError):
    pass


class UnknownFamily(LevySteinitzError):
    pass


class BadParams(LevySteinitzError):
    pass


class ParseError(LevySteinitzError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class ZeroTermRejected(LevySteinitzError):
    pass


class NotRearrangeable(LevySteinitzError):
    pass


class BudgetExhausted(LevySteinitzError):
    pass


class PoolExhausted(BudgetExhausted):
    pass


class DegenerateContext(LevySteinitzError):
    pass


class TargetOutsideX0(LevySteinitzError):
    pass


class InfeasibleTarget(LevySteinitzError):
    def __init__(self, message, offending=None):
        self.offending = offending
        super().__init__(message)


class InfeasibleSeries(LevySteinitzError):
    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class Inconclusive(LevySteinitzError):
    pass


class CertificateError(LevySteinitzError):
    pass


class DuplicateIndex(LevySteinitzError):
    def __init__(self, index, step):
        self.index = index
        self.step = step
        super().__init__(f"index {index} emitted twice (second time at step {step})")


class AssertionFailed(LevySteinitzError):
    def __init__(self, clause, message):
        self.clause = clause
        super().__init__(f"clause ({clause}): {message}")
