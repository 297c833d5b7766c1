"""Exception hierarchy shared by the library and the command line."""


class CherryVineError(Exception):
    """Base class for all library errors."""


class StructureError(CherryVineError, ValueError):
    """A hypergraph, junction tree or vine structure is invalid."""


class ParameterError(CherryVineError, ValueError):
    """A copula parameter or Kendall tau lies outside the family's domain."""


class ConvergenceError(CherryVineError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class NumericalError(CherryVineError, ArithmeticError):
    """A non-finite intermediate value was produced."""


class DataError(CherryVineError, ValueError):
    """Input data is unusable (too few rows, constant column, bad shape)."""


class InternalInvariantError(CherryVineError, AssertionError):
    """An invariant that holds by construction was found violated."""


class InputFormatError(CherryVineError, ValueError):
    """A structure, model or data file cannot be parsed."""
