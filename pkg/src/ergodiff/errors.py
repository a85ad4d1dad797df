"""Exception types raised across the package."""


class ErgodiffError(Exception):
    """Base class for all package-specific errors."""


class DomainError(ErgodiffError, ValueError):
    """An argument lies outside the domain a formula is defined on."""


class NonErgodicDrift(ErgodiffError):
    """The unnormalised density integrand does not decay at the grid ends."""


class GridTooCoarse(ErgodiffError):
    """A tabulation grid is too coarse for the requested operation."""


class ZeroDensity(ErgodiffError):
    """A density dropped below the representable floor inside the window."""


class TailNotResolved(ErgodiffError):
    """A tail integrand is not negligible at the grid boundary."""


class Blowup(ErgodiffError):
    """A simulated path left the stable region (drift or step misconfigured)."""


class BandwidthOutOfRange(ErgodiffError, ValueError):
    """Bandwidth must lie in (0, 1)."""


class GridMismatch(ErgodiffError, ValueError):
    """Two tabulated functions do not share the same evaluation grid."""


class DenominatorNonpositive(ErgodiffError):
    """Regularised density denominator is non-positive somewhere."""


class SingularMomentSystem(ErgodiffError):
    """The kernel moment system is numerically singular."""


class KernelOrderTooLow(ErgodiffError, ValueError):
    """Kernel order is insufficient for the requested smoothness."""


class EmptyGrid(ErgodiffError):
    """No candidate bandwidth satisfies the grid floor constraint."""


class HypothesisInvalid(ErgodiffError):
    """A lower-bound hypothesis violates one of its invariants."""

    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        super().__init__(f"hypothesis invariant violated: {invariant}"
                         + (f" ({detail})" if detail else ""))


class TooFewSamples(ErgodiffError, ValueError):
    """Not enough samples for a distributional check."""


class InsufficientHorizons(ErgodiffError, ValueError):
    """Rate fitting needs at least three horizons."""
