"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """Input outside its documented domain (bad probabilities, ranges, files)."""


class UndefinedObservableError(ValueError):
    """Observable not defined for this state (e.g. g2 of the vacuum)."""


class MixedInputError(ValueError):
    """State-vector interference requested for a mixed (lambda < 1) state."""


class IntegrationError(RuntimeError):
    """Master-equation integration produced an unphysical trajectory."""


class TruncationError(RuntimeError):
    """Photon-number truncation at n = 2 is inconsistent with the dynamics."""


class InsufficientContrastError(RuntimeError):
    """Singles fringe amplitude below the noise floor; no phase mapping possible."""


class InfeasibleMeasurementsError(RuntimeError):
    """No physical state reproduces the supplied (v1, v2, g2) measurements."""


class DegenerateDataError(ValueError):
    """Fit input is degenerate (e.g. all abscissa values identical)."""
