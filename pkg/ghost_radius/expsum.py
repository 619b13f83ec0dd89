# -*- coding: utf-8 -*-
"""
Exponential sums F(t) = sum_k w_k exp(a_k t) over the complex plane.

The zeros of F ("ghosts") are the branch points of log F, hence the
singularities that cap the Taylor radius of softmax cross-entropy along a
step direction. Every evaluation here is done on max-shifted exponents, so
weights spanning e^{z_k} never overflow.
"""
import logging
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from . import settings
from .exceptions import (
    ContourTooCloseError, DegenerateSpreadError, GhostRadiusError,
    InvalidParameterError, MagnitudeOverflowError, ZeroSearchExhausted,
)


logger = logging.getLogger(__name__)

MAX_EXPONENT = math.log(np.finfo(float).max)
EPS = np.finfo(float).eps


class ExpSum(object):
    """
    Positive weights w_k and real slopes a_k. Stored in the log domain so
    that weights e^{z_k} built from large logits stay representable.
    """

    def __init__(self, weights=None, slopes=None, log_weights=None):
        if log_weights is None:
            weights = np.asarray(weights, dtype=float)
            if weights.ndim != 1 or not np.all(weights > 0) or not np.all(np.isfinite(weights)):
                raise InvalidParameterError('weights must be finite and strictly positive')
            log_weights = np.log(weights)
        self.log_weights = np.asarray(log_weights, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        if self.log_weights.ndim != 1 or self.slopes.shape != self.log_weights.shape:
            raise InvalidParameterError('weights and slopes must be vectors of equal length')
        if self.slopes.size < 2:
            raise InvalidParameterError('an exponential sum needs at least two terms')
        if not (np.all(np.isfinite(self.log_weights)) and np.all(np.isfinite(self.slopes))):
            raise InvalidParameterError('weights and slopes must be finite')

    @classmethod
    def from_logits(cls, logits, slopes):
        # Subtracting max z multiplies F by a nonzero constant: zeros stay put.
        logits = np.asarray(logits, dtype=float)
        return cls(slopes=slopes, log_weights=logits - logits.max())

    @property
    def weights(self):
        return np.exp(self.log_weights)

    @property
    def spread(self):
        return float(self.slopes.max() - self.slopes.min())

    def __len__(self):
        return self.slopes.size

    def __repr__(self):
        return 'ExpSum(weights=%r, slopes=%r)' % (self.weights.tolist(), self.slopes.tolist())


class ZeroSearchConfig(object):

    def __init__(self, max_imag_multiplier=None, grid_density=None, newton_tol=None,
                 max_newton_iters=None):
        self.max_imag_multiplier = float(
            settings.ZERO_SEARCH_MAX_IMAG_MULTIPLIER if max_imag_multiplier is None else max_imag_multiplier
        )
        self.grid_density = int(settings.ZERO_SEARCH_GRID_DENSITY if grid_density is None else grid_density)
        self.newton_tol = float(settings.ZERO_SEARCH_NEWTON_TOL if newton_tol is None else newton_tol)
        self.max_newton_iters = int(
            settings.ZERO_SEARCH_MAX_NEWTON_ITERS if max_newton_iters is None else max_newton_iters
        )
        if self.newton_tol <= 0:
            raise InvalidParameterError('newton_tol must be positive')
        if self.grid_density < 4:
            raise InvalidParameterError('grid_density must be at least 4')
        if self.max_imag_multiplier <= 1:
            raise InvalidParameterError('max_imag_multiplier must exceed 1')
        if self.max_newton_iters < 1:
            raise InvalidParameterError('max_newton_iters must be positive')

    def __repr__(self):
        return 'ZeroSearchConfig(max_imag_multiplier=%r, grid_density=%r, newton_tol=%r, max_newton_iters=%r)' % (
            self.max_imag_multiplier, self.grid_density, self.newton_tol, self.max_newton_iters,
        )


def _shifted_terms(expsum, t):
    t = np.asarray(t, dtype=complex)[..., np.newaxis]
    exponent = expsum.log_weights + expsum.slopes * t
    shift = exponent.real.max(axis=-1, keepdims=True)
    return np.exp(exponent - shift), shift[..., 0]


def evaluate(expsum, t):
    """
    F(t) in complex arithmetic. ``t`` may be a scalar or an array.
    """
    exponent = expsum.log_weights + np.multiply.outer(np.asarray(t, dtype=complex), expsum.slopes)
    if exponent.real.max() > MAX_EXPONENT:
        raise MagnitudeOverflowError('magnitude overflow')
    value = np.exp(exponent).sum(axis=-1)
    if value.ndim == 0:
        return complex(value)
    return value


def log_abs_evaluate(expsum, t):
    terms, shift = _shifted_terms(expsum, t)
    with np.errstate(divide='ignore'):
        return shift + np.log(np.abs(terms.sum(axis=-1)))


def merge_equal_slopes(expsum):
    slopes, inverse = np.unique(expsum.slopes, return_inverse=True)
    if slopes.size == expsum.slopes.size:
        return expsum
    log_weights = np.array([logsumexp(expsum.log_weights[inverse == k]) for k in range(slopes.size)])
    if slopes.size < 2:
        raise DegenerateSpreadError('degenerate: Δ_a = 0, no zeros, infinite radius')
    return ExpSum(slopes=slopes, log_weights=log_weights)


def binary_zeros(expsum):
    """
    The two nearest zeros of a two-term sum, t = (δ + iπ(2k+1))/Δ_a for
    k in {0, -1}, with δ = log(w₁/w₂) and Δ_a = a₂ − a₁.
    """
    if len(expsum) != 2:
        raise InvalidParameterError('binary_zeros needs exactly two terms, got %d' % len(expsum))
    gap = expsum.slopes[1] - expsum.slopes[0]
    if gap == 0:
        raise DegenerateSpreadError('degenerate: Δ_a = 0, no zeros, infinite radius')
    margin = expsum.log_weights[0] - expsum.log_weights[1]
    return [complex(margin, math.pi * (2 * k + 1)) / gap for k in (0, -1)]


def real_part_bounds(expsum):
    """
    Vertical strip [x_lo, x_hi] holding every zero: outside it one extreme
    term outweighs all the others combined.
    """
    merged = merge_equal_slopes(expsum)
    order = np.argsort(merged.slopes)
    slopes, log_weights = merged.slopes[order], merged.log_weights[order]

    def dominance(index):
        others = np.arange(slopes.size) != index

        def gap(x):
            return log_weights[index] + slopes[index] * x - logsumexp(log_weights[others] + slopes[others] * x)
        return gap

    return _bracketed_root(dominance(0)), _bracketed_root(dominance(slopes.size - 1))


def _bracketed_root(func):
    low, high = -1.0, 1.0
    while np.sign(func(low)) == np.sign(func(high)):
        low, high = 2 * low, 2 * high
        if high > 1e12:
            raise GhostRadiusError('cannot bracket real-part bound')
    return brentq(func, low, high, xtol=1e-12)


def _newton_from_grid(expsum, cfg, height, density):
    unit = math.pi / expsum.spread
    x_lo, x_hi = real_part_bounds(expsum)
    width = max(x_hi - x_lo, unit / density)
    cols = int(math.ceil(width / unit * density)) + 1
    rows = int(math.ceil((height - 1.0) * density)) + 1
    if rows * cols > settings.ZERO_SEARCH_MAX_SEEDS:
        shrink = math.sqrt(settings.ZERO_SEARCH_MAX_SEEDS / float(rows * cols))
        rows, cols = max(2, int(rows * shrink)), max(2, int(cols * shrink))
    re_axis = np.linspace(x_lo, x_hi, cols)
    im_axis = np.linspace(unit, height * unit, rows)
    t = (re_axis[np.newaxis, :] + 1j * im_axis[:, np.newaxis]).ravel()
    logger.debug('newton from %d seeds over Re [%g, %g] x Im [%g, %g]', t.size, x_lo, x_hi, unit, height * unit)

    with np.errstate(all='ignore'):
        for _ in range(cfg.max_newton_iters):
            terms, _shift = _shifted_terms(expsum, t)
            t = t - terms.sum(axis=-1) / (terms * expsum.slopes).sum(axis=-1)
            # Diverged seeds are dropped rather than restarted.
            alive = np.isfinite(t)
            if not alive.all():
                t = t[alive]
        terms, _shift = _shifted_terms(expsum, t)
        residual = np.abs(terms.sum(axis=-1)) / np.abs(terms).sum(axis=-1)
    converged = t[np.isfinite(residual) & (residual < cfg.newton_tol)]
    converged = np.where(converged.imag < 0, np.conj(converged), converged)
    bounds = ((x_lo, x_hi), (unit, height * unit))
    return converged, bounds


def nearest_zero(expsum, cfg=None):
    """
    Zero of F with the smallest modulus, as (zero, modulus). The returned
    zero lies in the upper half plane; its conjugate is a zero as well.
    """
    cfg = cfg or ZeroSearchConfig()
    merged = merge_equal_slopes(expsum)
    if len(merged) == 2:
        zero = max(binary_zeros(merged), key=lambda z: z.imag)
        return zero, abs(zero)

    height, density = cfg.max_imag_multiplier, cfg.grid_density
    bounds = None
    for attempt in range(settings.ZERO_SEARCH_MAX_EXPANSIONS + 1):
        candidates, bounds = _newton_from_grid(merged, cfg, height, density)
        if candidates.size:
            moduli = np.abs(candidates)
            best = np.lexsort((candidates.imag, candidates.real, moduli))[0]
            zero, modulus = complex(candidates[best]), float(moduli[best])
            if _is_zero_free(merged, modulus):
                return zero, modulus
            logger.warning('zero at modulus %g is not the nearest, widening search (attempt %d)', modulus, attempt)
        else:
            logger.warning('no zero in strip of height %g·π/Δ_a, widening search (attempt %d)', height, attempt)
        height, density = 2 * height, 2 * density
    raise ZeroSearchExhausted(*bounds)


def _is_zero_free(expsum, modulus):
    for shrink in (1e-6, 1e-5, 1e-4):
        try:
            return count_zeros_in_disk(expsum, modulus * (1 - shrink)) == 0
        except ContourTooCloseError:
            continue
    return False


def count_zeros_in_disk(expsum, radius, samples=None):
    """
    Number of zeros strictly inside |t| < radius, by the argument principle.

    Starts from ``samples`` equally spaced points on the circle and bisects
    every arc over which the phase of F moves by more than π/4. The contour
    counts as too close to a zero when |F| at some sample falls below 1e3·eps
    times that sample's own term scale Σ|w_k e^{a_k t}|, rather than below a
    fraction of max |F| over the circle, which grows like e^{Δ_a·radius}.
    """
    samples = int(samples or settings.CONTOUR_SAMPLES)
    if radius <= 0:
        return 0
    angles = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    for _ in range(settings.CONTOUR_MAX_REFINEMENTS):
        terms, _shift = _shifted_terms(expsum, radius * np.exp(1j * angles))
        values = terms.sum(axis=-1)
        phase = np.angle(values)
        steps = np.angle(np.exp(1j * np.diff(np.append(phase, phase[0]))))
        coarse = np.abs(steps) > math.pi / 4
        if not coarse.any():
            break
        closed = np.append(angles, 2 * math.pi)
        midpoints = 0.5 * (closed[:-1] + closed[1:])[coarse]
        angles = np.sort(np.concatenate([angles, midpoints]))
    else:
        raise ContourTooCloseError(radius)

    if (np.abs(values) / np.abs(terms).sum(axis=-1)).min() <= 1e3 * EPS:
        raise ContourTooCloseError(radius)
    return int(round(steps.sum() / (2 * math.pi)))
