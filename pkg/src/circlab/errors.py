"""Exception hierarchy shared by all circlab modules."""


class CirclabError(Exception):
    """Base class for all circlab errors."""


class DomainError(CirclabError, ValueError):
    """A scalar argument is outside the mathematical domain of the function."""


class ParameterError(CirclabError, ValueError):
    """A model or experiment parameter combination is invalid (e.g. K > N)."""


class NumericError(CirclabError, ArithmeticError):
    """A numerical routine failed to converge or to certify its tolerance."""


class CapabilityError(CirclabError, RuntimeError):
    """The request exceeds a configured exact-computation budget."""


class ConfigError(CirclabError, ValueError):
    """A config file or CLI invocation is malformed (usage error, exit code 2)."""
