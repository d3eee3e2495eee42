"""Exception hierarchy shared by all stages."""


class RolecapError(Exception):
    """Base class; `category` feeds the CLI's one-line error report."""

    category = "error"


class EdgeListFormatError(RolecapError):
    category = "parse"

    def __init__(self, lineno, reason):
        self.lineno = lineno
        self.reason = reason
        super().__init__(f"line {lineno}: {reason}")


class EmptyInputError(RolecapError):
    category = "parse"


class NodeIdError(RolecapError, IndexError):
    category = "bounds"


class UndefinedModularityError(RolecapError):
    category = "degenerate"


class UndefinedOverlapError(RolecapError):
    category = "degenerate"


class InfeasibleKError(RolecapError):
    category = "infeasible"


class DegenerateClusteringError(RolecapError):
    category = "degenerate"


class SpecError(RolecapError):
    """Invalid generator or pipeline parameterization."""

    category = "spec"


class MissingInputError(RolecapError, FileNotFoundError):
    category = "missing-input"
