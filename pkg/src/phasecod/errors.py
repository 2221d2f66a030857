"""Exception types raised across the package."""


class PhasecodError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(PhasecodError, ValueError):
    pass


class NonPowerOfTwoDims(PhasecodError, ValueError):
    pass


class ResidualImaginary(PhasecodError, ArithmeticError):
    pass


class NonPositiveVariance(PhasecodError, ValueError):
    pass


class OddChannelCount(PhasecodError, ValueError):
    pass


class EvenKernel(PhasecodError, ValueError):
    pass


class DomainError(PhasecodError, ValueError):
    """Prediction values fall outside the domain a loss is defined on."""


class EmptyGroundTruth(PhasecodError, ValueError):
    """Ground truth has no foreground; the metric is skipped, not failed."""


class UnreadableImage(PhasecodError, OSError):
    pass


class NonFiniteLoss(PhasecodError, ArithmeticError):
    pass


class EmptyMaskWarning(UserWarning):
    """Mask is all background or all foreground, so it has no edges."""
