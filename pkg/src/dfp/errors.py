"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An input breaks a documented precondition (shapes, ranges, invariants)."""


class CapacityError(RuntimeError):
    """Exact enumeration would exceed the configured cap."""


class SingularityError(ContractViolation):
    """An agent sits exactly on a target it may select."""


class ConfigError(ValueError):
    """A configuration document is malformed or inconsistent."""
