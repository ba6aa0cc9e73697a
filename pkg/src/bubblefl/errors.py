"""Exception types shared across the interpreter."""


class BubbleError(Exception):
    """Base class for every error the interpreter raises deliberately."""


class DuplicateSymbol(BubbleError):
    pass


class ArityMismatch(BubbleError):
    pass


class CycleCreated(BubbleError):
    pass


class CorruptStore(BubbleError):
    """Internal graph invariant broken; always a bug, never user error."""


class IsRoot(BubbleError):
    pass


class TooLarge(BubbleError):
    pass


class NotAChoice(BubbleError):
    pass


class BadDominator(BubbleError):
    pass


class NotNormalForm(BubbleError):
    pass


class NotInductivelySequential(BubbleError):
    pass


class NotStaticallyEnumerable(BubbleError):
    pass


class ParseError(BubbleError):
    def __init__(self, msg, source=None, line=None, col=None):
        self.source = source
        self.line = line
        self.col = col
        if line is not None:
            where = source or "<input>"
            msg = f"{where}:{line}:{col or 0}: {msg}"
        super().__init__(msg)


class NonLinearLhs(ParseError):
    pass


class UnknownIdentifier(ParseError):
    pass


class UnboundWhereName(ParseError):
    pass
