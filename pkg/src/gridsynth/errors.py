"""Exception taxonomy shared across the interpreter and the search.

Any DslError raised while executing a candidate step marks that search
branch dead; it never aborts the surrounding process.
"""


class DslError(Exception):
    """Base class for step-execution failures."""


class BadRef(DslError):
    """Reference index outside the current program state."""


class ArityMismatch(DslError):
    """Wrong number of arguments for a primitive."""


class TypeMismatch(DslError):
    """Argument value kind not accepted by the primitive."""


class ExecError(DslError):
    """Primitive-level runtime failure (ranges, lengths, caps)."""


class NonGridResult(DslError):
    """Program finished on a value that is not a grid."""
