"""Exception types shared across the solver and harness modules."""


class InfeasibleError(Exception):
    """No allocation can satisfy the stated constraints.

    Raised when a budget (energy or symbols) is too small for the
    requested reliability, latency, or vehicle count. The message names
    the binding constraint so CLI users can tell which budget to raise.
    """


class ConfigError(ValueError):
    """A configuration file or override could not be parsed or validated."""
