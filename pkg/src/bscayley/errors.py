"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point or parameter lies outside the region where a chart or formula is valid."""


class DegreeError(ValueError):
    """A form operation was asked for an impossible degree."""
