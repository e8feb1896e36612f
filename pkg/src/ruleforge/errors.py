"""Shared exception base for the package.

Every domain error raised by ruleforge derives from RuleforgeError so callers
(notably the CLI) can distinguish data problems from programming errors.
"""


class RuleforgeError(Exception):
    """Base class for all ruleforge domain errors."""
