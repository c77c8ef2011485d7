"""Exception types shared across the package."""


class ContractError(ValueError):
    """A precondition of an operation was violated by the caller."""


class DomainError(ContractError):
    """A numerical condition required by a bound formula does not hold."""


class GenerationError(RuntimeError):
    """Random data generation failed repeatedly (e.g. singular draws)."""


class InvariantError(RuntimeError):
    """An internal invariant failed; indicates a bug rather than bad input."""


class ParseError(ValueError):
    """Malformed input file.  ``line`` is 1-based, or None if not line-specific."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
