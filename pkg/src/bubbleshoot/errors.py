"""Exception hierarchy.

Every error carries a short machine-readable ``kind`` used by the CLI when it
emits the JSON error record on stderr.
"""


class BubbleShootError(Exception):
    kind = "internal"
    context: dict = {}

    def to_dict(self):
        d = {"kind": self.kind, "type": type(self).__name__, "message": str(self)}
        d.update(self.context)
        return d


class DomainError(BubbleShootError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    kind = "domain"


class PrecisionError(BubbleShootError, ArithmeticError):
    """An exponent would exceed the configured cap of the scalar mode."""

    kind = "precision"

    def __init__(self, message, log_value=None, stage=None):
        super().__init__(message)
        self.log_value = log_value
        self.stage = stage

    def to_dict(self):
        d = super().to_dict()
        if self.log_value is not None:
            d["log_value"] = self.log_value
        if self.stage is not None:
            d["stage"] = self.stage
        return d


class BracketError(BubbleShootError, ValueError):
    kind = "domain"


class NonTerminationError(BubbleShootError, RuntimeError):
    kind = "domain"


class IntegratorError(BubbleShootError, RuntimeError):
    kind = "internal"


class SpecSyntaxError(BubbleShootError, ValueError):
    """Malformed model / weight / grid specification string."""

    kind = "usage"

    def __init__(self, message, text="", position=0):
        super().__init__(f"{message} at position {position}: {text[position:]!r}")
        self.text = text
        self.position = position
