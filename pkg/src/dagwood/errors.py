"""Exception hierarchy shared across the package.

Transition-rule rejections subclass :class:`StepError`, one class per
violated premise, so callers can either catch the family or a specific
rejection.  Analysis-level failures (pricing, solving, searching) live
directly under :class:`AmmError`.
"""

from __future__ import annotations


class AmmError(Exception):
    """Base class for every error raised by this package."""

    @property
    def code(self) -> str:
        return type(self).__name__


class StepError(AmmError):
    """A transaction was rejected; exactly one rule premise failed.

    ``tx`` is the offending transaction (``None`` when the check does not
    originate from a transaction, e.g. state construction).
    """

    def __init__(self, message: str = "", tx=None):
        super().__init__(message)
        self.tx = tx


class NonPositiveAmount(StepError):
    pass


class InsufficientBalance(StepError):
    pass


class SameToken(StepError):
    pass


class MintedTokenInDeposit(StepError):
    pass


class PairAlreadyExists(StepError):
    pass


class PairMissing(StepError):
    pass


class RatioMismatch(StepError):
    pass


class SlippageExceeded(StepError):
    pass


class ReserveDrained(StepError):
    pass


class ZeroSupply(AmmError):
    """A minted token was priced while its total supply is zero."""


class UnknownUser(AmmError):
    """Net worth requested for a user with no wallet in the state."""


class NonPositiveRatio(AmmError):
    """Projected reserve ratio must be strictly positive."""


class Infeasible(AmmError):
    """A front-run direction split failed; signals numerical inconsistency."""


class UnfundedUser(AmmError):
    """A txpool transaction cannot be enabled even after front-running."""


class NoFeasibleBundle(AmmError):
    """The classic same-direction sandwich cannot enable the user swap."""


class InstanceTooLarge(AmmError):
    """The brute-force oracle only accepts desk-scale instances."""


class ParseError(AmmError):
    """A game file is not syntactically well-formed."""


class ValidationError(AmmError):
    """A game file parsed but violates a semantic invariant."""
