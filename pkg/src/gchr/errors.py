"""Exception hierarchy shared by all engines."""


class CHRError(Exception):
    pass


class ParseError(CHRError):
    def __init__(self, message: str, line: int = 0, column: int = 0, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(sorted(set(expected)))
        detail = f"{message} at line {line}, column {column}"
        if self.expected:
            detail += " (expected " + ", ".join(self.expected) + ")"
        super().__init__(detail)


class EvalError(CHRError):
    pass


class StuckBuiltin(CHRError):
    """A body built-in evaluated to false."""


class NonTermination(CHRError):
    def __init__(self, steps: int):
        self.steps = steps
        super().__init__(f"fuel exhausted after {steps} steps")


class UnknownId(CHRError, KeyError):
    pass


class FragmentError(CHRError):
    """Program is outside the fragment an engine accepts."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class RetryExhausted(CHRError):
    pass


class NotBounded(CHRError):
    pass


class NotOneNeighbor(CHRError):
    pass


class UnknownLocation(CHRError):
    pass


class Unbounded(CHRError):
    """State-space search hit its bound."""
