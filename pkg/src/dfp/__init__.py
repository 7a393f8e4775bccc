"""Decentralized fictitious play on time-varying networks."""

from .errors import CapacityError, ConfigError, ContractViolation, SingularityError

__version__ = "0.1.0"

__all__ = ["CapacityError", "ConfigError", "ContractViolation", "SingularityError", "__version__"]
