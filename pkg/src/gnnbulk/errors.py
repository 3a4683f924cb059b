"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments that break its contract.

    Raised for dimension mismatches, out-of-range vertex ids, negative
    probability mass, and similar caller errors. The CLI maps this to a
    nonzero exit code.
    """


class GraphFormatError(ValueError):
    """A graph file could not be parsed; the message carries the line number."""
