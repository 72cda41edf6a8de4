"""Shared exception types.

Two failure categories are distinguished throughout the package:
violated input contracts (caller bugs, bad configs) and numerical
breakdowns discovered mid-computation (non-finite values, failed
iterations).  The CLI maps them to exit codes 1 and 2.
"""


class InputContractError(ValueError):
    """An argument or configuration violates a documented precondition."""


class NumericalDomainError(RuntimeError):
    """A computation produced or encountered non-finite / invalid values."""
