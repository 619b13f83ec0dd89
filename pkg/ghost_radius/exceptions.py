# -*- coding: utf-8 -*-


class GhostRadiusError(Exception):
    pass


class MagnitudeOverflowError(GhostRadiusError, OverflowError):
    pass


class DegenerateSpreadError(GhostRadiusError, ValueError):
    """
    Raised when all slopes coincide: Δ_a = 0, no zeros, infinite radius.
    """


class InvalidParameterError(GhostRadiusError, ValueError):
    pass


class ZeroSearchExhausted(GhostRadiusError):

    def __init__(self, re_bounds, im_bounds):
        self.re_bounds = tuple(re_bounds)
        self.im_bounds = tuple(im_bounds)
        super(ZeroSearchExhausted, self).__init__(
            'search exhausted: no zero in Re %s x Im %s' % (
                _format_bounds(self.re_bounds), _format_bounds(self.im_bounds),
            )
        )


class ContourTooCloseError(GhostRadiusError):

    def __init__(self, radius):
        self.radius = radius
        super(ContourTooCloseError, self).__init__(
            'contour too close to a zero, perturb radius (%r)' % radius
        )


class NumericOverflowError(GhostRadiusError, FloatingPointError):

    def __init__(self, layer):
        self.layer = layer
        super(NumericOverflowError, self).__init__('numeric overflow at layer %d' % layer)


class ZeroDirectionError(GhostRadiusError, ValueError):
    pass


class EmptySampleSetError(GhostRadiusError, ValueError):
    pass


class DatasetError(GhostRadiusError):

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = 'line %d: %s' % (line, message)
        super(DatasetError, self).__init__(message)


class ConfigurationError(GhostRadiusError):
    pass


def _format_bounds(bounds):
    return '[%.6g, %.6g]' % bounds
