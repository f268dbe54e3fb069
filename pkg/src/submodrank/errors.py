"""Exception hierarchy shared by every submodrank module."""


class SubmodrankError(Exception):
    """Base class for all library errors."""


class DomainError(SubmodrankError, ValueError):
    """A transform was evaluated outside the region where it is defined."""


class DuplicateItem(SubmodrankError, ValueError):
    pass


class TooLarge(SubmodrankError, ValueError):
    """An exhaustive routine was asked to enumerate more than its limit."""

    def __init__(self, message, count=None):
        super().__init__(message)
        self.count = count


class MissingInput(SubmodrankError, ValueError):
    pass


class BadParameter(SubmodrankError, ValueError):
    pass


class BudgetTooLarge(SubmodrankError, ValueError):
    pass


class AllItemsDegenerate(SubmodrankError, ValueError):
    pass


class NotMonotone(SubmodrankError, ValueError):
    pass


class OutOfRange(SubmodrankError, ValueError):
    pass


class ParseError(SubmodrankError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyDataset(SubmodrankError, ValueError):
    pass


class FractionOutOfRange(SubmodrankError, ValueError):
    pass


class NonFiniteLoss(SubmodrankError, ArithmeticError):
    pass


class UnknownUser(SubmodrankError, KeyError):
    pass


class UndefinedMetric(SubmodrankError, ValueError):
    """The metric has no value for this input (reported as missing, not zero)."""


class TooFewItems(SubmodrankError, ValueError):
    pass
