"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the CLI: validation problems exit 2,
identification failures exit 3, numeric failures exit 4.
"""


class ProdenvError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ValidationError(ProdenvError):
    """Bad configuration, malformed input files, or argument errors."""

    exit_code = 2


class IdentificationFailure(ProdenvError):
    """The data do not support the identification step that was requested.

    Raised e.g. when no separated cell exists, when a deconvolution cannot
    match the empirical distribution, or when a rank condition fails.
    """

    exit_code = 3


class NumericFailure(ProdenvError):
    """A computation produced non-finite values or an unbounded problem
    where a finite answer was required."""

    exit_code = 4


class UnboundedProblem(NumericFailure):
    """A maximization has no finite value (recession-cone violation)."""


class InsufficientData(IdentificationFailure):
    """Too few observations in the conditioning window."""


class DeconvolutionFailure(IdentificationFailure):
    """No discrete mixture fits the cell distribution acceptably."""


class RankConditionError(IdentificationFailure):
    """The proxy-recovery linear system is singular."""


class IntegrationError(NumericFailure):
    """The ODE integration for a proxy map cannot proceed (sign change
    of the integrand denominator inside the grid)."""
