"""Exception types shared across the package."""


class BurstmfError(Exception):
    """Base class for all package errors."""


class UnsupportedModel(BurstmfError):
    """Operation is not defined for this neuron model."""


class QuadratureFailure(BurstmfError):
    """Adaptive quadrature did not reach the requested tolerance."""


class BlowUp(BurstmfError):
    """A membrane potential exceeded the safety ceiling without a detected spike."""


class StepSizeUnderflow(BurstmfError):
    """The adaptive integrator could not make progress at the minimum step size."""


class NonConvergence(BurstmfError):
    """An iterative computation exhausted its budget without converging."""


class Indeterminate(BurstmfError):
    """A trace or trajectory has not settled enough to classify."""


class RootFindingFailure(BurstmfError):
    """A scalar root solve failed to bracket or converge."""


class OnOrBelowManifold(BurstmfError):
    """A firing-side quantity was requested at a point with H <= 0."""


class ThresholdUnavailable(BurstmfError):
    """The numerically computed coupling threshold is required but was not supplied."""


class NoHopfRegime(BurstmfError):
    """No Hopf bifurcation exists for these parameters (g* <= g-bar)."""


class DomainError(BurstmfError):
    """A curve was evaluated outside its domain of definition."""


class NoCycleFound(BurstmfError):
    """No limit cycle was found within the transient budget."""


class BracketInvalid(BurstmfError):
    """A bisection bracket does not straddle the sought transition."""
