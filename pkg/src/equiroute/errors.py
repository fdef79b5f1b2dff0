"""Exception types shared across the package."""


class EquirouteError(Exception):
    pass


class ValidationError(EquirouteError, ValueError):
    """Scenario, network or profile content violates a model invariant."""


class ScenarioParseError(ValidationError):
    """The scenario document is not well-formed JSON."""


class NumericalError(EquirouteError, ArithmeticError):
    """Non-finite values or singular derivatives encountered while solving."""
