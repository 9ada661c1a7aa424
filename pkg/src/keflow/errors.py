"""Exception types shared across the package."""


class DomainError(ValueError):
    """Evaluation outside the domain where a formula or state is defined."""


class GridError(ValueError):
    """Invalid grid data: bad axes, asymmetric components, loss of positivity."""


class CompatibilityError(RuntimeError):
    """Overdetermined system input fields fail their cross-derivative check."""


class VerificationError(RuntimeError):
    """A verification pass did not meet its tolerance."""
