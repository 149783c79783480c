# src/errors.py
from __future__ import annotations

# Exit codes used by the CLI:
#   1 -> a checked statement was falsified
#   2 -> a precondition rejected the input
#   3 -> an internal invariant broke (never expected)


class KZError(Exception):
    exit_code = 2


# ---------------- precondition failures ----------------
class InvalidParameter(KZError):
    pass

class ModulusBudgetExceeded(KZError):
    pass

class NotAUnit(KZError):
    pass

class DegenerateRegime(KZError):
    pass

class NonInvertibleDifference(KZError):
    pass

class ResidueCollision(KZError):
    pass

class NonOrdinaryPoint(KZError):
    pass

class DetNotUnit(KZError):
    pass

class NotOnto(KZError):
    pass

class CutoffTooSmall(KZError):
    pass

class NotClosed(KZError):
    pass

class PrecisionExhausted(KZError):
    pass

class DivisionByP(KZError):
    pass

class InsufficientTruncation(KZError):
    pass

class SumZeroViolation(KZError):
    pass

class WitnessMismatch(KZError):
    pass


# ---------------- falsified checks ----------------
class CheckFailed(KZError):
    exit_code = 1

class NoMatch(CheckFailed):
    pass


# ---------------- internal ----------------
class InternalError(KZError):
    exit_code = 3
