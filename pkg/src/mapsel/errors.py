"""Exception types shared across the package."""


class ParseError(ValueError):
    """Malformed input text (instance, schema, tgd, or set-cover files)."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        prefix = source or ""
        if line is not None:
            prefix = f"{prefix}:{line}" if prefix else f"line {line}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DomainError(ValueError):
    """Well-formed input that violates a contract (arity, membership, caps)."""
