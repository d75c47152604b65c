"""Exception types shared across the package."""


class InvalidSpec(ValueError):
    """A configuration or argument violates a documented precondition."""


class InfeasibleDesign(InvalidSpec):
    """A covariate design cannot be constructed as requested (e.g. more columns than rows)."""


class NumericalFailure(RuntimeError):
    """A numerical routine failed in a way that should be reported, not silently patched."""
