"""Exception types shared by all rabi_lab modules."""


class RabiLabError(Exception):
    """Base class for every failure this package raises deliberately."""


class ValidationError(RabiLabError, ValueError):
    """Invalid user-supplied parameters, rejected before any computation."""


class NearZoneBoundary(RabiLabError):
    """Quasi-frequency too close to half the drive frequency; branch choice ambiguous."""


class IllConditioned(RabiLabError):
    """Fundamental matrix at t=0 is numerically singular (or a reconstruction lost realness)."""


class NotConverged(RabiLabError):
    """Truncated solution did not converge; raise the truncation order n_max."""


class NoBracket(RabiLabError):
    """Resonance search failed: objective monotone or root not sign-bracketed."""


class DerivativeStepError(RabiLabError):
    """Finite-difference step for the frequency derivative is infeasible (mu too small)."""


class DegenerateCollapse(RabiLabError):
    """Collapse time undefined: the Rabi frequency does not depend on the field amplitude."""


class SmallDenominator(RabiLabError):
    """A resonant denominator in the subleading field response is below tolerance."""


class CutoffReflection(RabiLabError):
    """State reached the top of the Fock basis (or lost norm); raise the cutoff."""


class PeaksUnresolved(RabiLabError):
    """Phase-space distribution does not show two separated fragments at this time."""


class IntegratorFailure(RabiLabError):
    """Direct ODE integration did not reach the requested tolerance."""
