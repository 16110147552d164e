"""Exception types raised across the package."""


class ErgoseqError(Exception):
    """Base class for all package errors."""


# linalg
class SingularMatrix(ErgoseqError):
    pass


class NonConvergence(ErgoseqError):
    pass


class NotPSD(ErgoseqError):
    pass


# detector
class SingularCovariance(ErgoseqError):
    pass


class EmptyStructure(ErgoseqError):
    pass


# region graph
class GraphValidationError(ErgoseqError):
    """Graph fails a chain-theoretic precondition."""


class NotIrreducible(GraphValidationError):
    pass


class Periodic(GraphValidationError):
    pass


# chain optimizer
class SolverError(ErgoseqError):
    pass


class StationarityViolated(SolverError):
    pass


class NotApplicable(SolverError):
    pass


class Infeasible(SolverError):
    pass


class SolverStalled(SolverError):
    pass
