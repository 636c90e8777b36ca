"""Exception hierarchy for randcons."""


class RandconsError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatchError(RandconsError, ValueError):
    """Vectors or constraints of incompatible dimension were combined."""


class HellyOverflowError(RandconsError, ValueError):
    """The integer dimension is too large for the Helly number to be represented."""


class SolverError(RandconsError):
    """Base class for failures of the mixed-integer solver."""


class NodeLimitError(SolverError):
    """Branch-and-bound exceeded its node budget."""


class NumericalFailureError(SolverError):
    """The simplex method did not terminate within its iteration cap."""


class InfeasibleSubproblemError(SolverError):
    """A local problem solved during a run has no feasible point."""


class UnboundedSubproblemError(SolverError):
    """A local problem solved during a run has no finite optimum."""


class ResamplingCapError(RandconsError):
    """A random generator could not meet its target within the resampling cap."""


class ConnectivityError(RandconsError):
    """A communication schedule is not (jointly) strongly connected."""


class InstanceFormatError(RandconsError, ValueError):
    """An instance file does not conform to the bundled schema."""
