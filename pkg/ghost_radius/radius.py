# -*- coding: utf-8 -*-
"""
Convergence-radius bounds for softmax cross-entropy along a direction.

Along θ + τv with linearised logits z_k + a_k τ the loss is
log F(τ) − z_y − a_y τ, F being the exponential sum with weights e^{z_k}
and slopes a_k. Its Taylor radius is the modulus of the nearest zero of F
and is never smaller than π/Δ_a, Δ_a = max_k a_k − min_k a_k.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import softmax

from . import settings
from .exceptions import (
    DegenerateSpreadError, EmptySampleSetError, InvalidParameterError,
)
from .expsum import ExpSum, nearest_zero
from .utils import INF


logger = logging.getLogger(__name__)


@dataclass
class DirectionalSlopes:
    a: np.ndarray
    sample_id: object = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        if self.a.ndim != 1 or self.a.size < 2:
            raise InvalidParameterError('slopes need one entry per class, at least two classes')


@dataclass
class LogitState:
    z: np.ndarray
    target: int

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if not 0 <= self.target < self.z.size:
            raise InvalidParameterError('target %r out of range for %d classes' % (self.target, self.z.size))

    @property
    def competitor(self):
        # Strongest non-target class; np.argmax breaks ties toward the lowest index.
        masked = self.z.copy()
        masked[self.target] = -INF
        return int(np.argmax(masked))

    @property
    def margin(self):
        return float(self.z[self.target] - self.z[self.competitor])


@dataclass
class RadiusReport:
    rho_a: float
    delta_a_max: float
    rho_star: Optional[float] = None
    ghost: Optional[complex] = None
    bottleneck_sample: object = None
    mode: Optional[str] = None
    n_samples: int = 0
    spreads: np.ndarray = field(default=None, repr=False)


def spread(slopes):
    return float(slopes.a.max() - slopes.a.min())


def binary_radius(delta, delta_a):
    if not delta_a > 0:
        raise DegenerateSpreadError('degenerate spread: Δ_a must be positive, got %r' % delta_a)
    return math.hypot(delta, math.pi) / delta_a


def _radius_from_spread(value):
    return math.pi / value if value > 0 else INF


def lower_bound(slopes):
    return _radius_from_spread(spread(slopes))


def per_sample_ghost(state, slopes):
    """
    Nearest ghost of the top-2 reduction (target y against competitor c):
    ((δ + iπ)/Δ_{y,c}, √(δ² + π²)/|Δ_{y,c}|).

    A zero slope gap has no ghost; ``(None, inf)`` is returned.
    """
    competitor = state.competitor
    gap = float(slopes.a[state.target] - slopes.a[competitor])
    if gap == 0:
        logger.debug('top-2 degenerate for sample %r: infinite radius under reduction', slopes.sample_id)
        return None, INF
    delta = state.margin
    return complex(delta, math.pi) / gap, math.hypot(delta, math.pi) / abs(gap)


def exact_radius(state, slopes, cfg=None):
    return exact_ghost(state, slopes, cfg)[1]


def exact_ghost(state, slopes, cfg=None):
    if spread(slopes) == 0:
        return None, INF
    zero, modulus = nearest_zero(ExpSum.from_logits(state.z, slopes.a), cfg)
    return zero, modulus


def batch_radius(samples, states=None, exact=False, cfg=None, mode=None):
    """
    ρ_a = π / max_x Δ_a(x; v) over a sample set, with the bottleneck sample
    (first index attaining the maximum spread).

    ``samples`` is a sequence of DirectionalSlopes; ``states`` an optional
    parallel sequence of LogitState used for ghosts and, with ``exact``,
    for the exact per-sample radii ρ*.
    """
    samples = list(samples)
    if not samples:
        raise EmptySampleSetError('no samples')
    spreads = np.array([spread(s) for s in samples])
    bottleneck = int(np.argmax(spreads))
    delta_a_max = float(spreads[bottleneck])
    report = RadiusReport(
        rho_a=_radius_from_spread(delta_a_max),
        delta_a_max=delta_a_max,
        bottleneck_sample=samples[bottleneck].sample_id,
        mode=mode,
        n_samples=len(samples),
        spreads=spreads,
    )
    if states is None:
        return report
    states = list(states)
    if exact:
        best = (INF, None)
        for state, slopes in zip(states, samples):
            zero, modulus = exact_ghost(state, slopes, cfg)
            if modulus < best[0]:
                best = (modulus, zero)
        report.rho_star, report.ghost = best
    else:
        report.ghost = per_sample_ghost(states[bottleneck], samples[bottleneck])[0]
    return report


def normalized_step(tau, rho_a):
    if math.isinf(rho_a):
        return 0.0
    if not rho_a > 0:
        raise InvalidParameterError('rho_a must be positive')
    return tau / rho_a


def temperature_radius(slopes, temperature):
    if not temperature > 0:
        raise InvalidParameterError('invalid temperature %r' % temperature)
    # Written as T·ρ_a so that ρ_a(T) = T·ρ_a(1) holds bit for bit.
    return temperature * lower_bound(slopes)


def normalized_weights(z):
    return softmax(np.asarray(z, dtype=float))


def linearization_epsilon(curvature, delta_a, w_min):
    """
    ε = C·π²/(2·Δ_a²·w_min) and the guaranteed floor (π/Δ_a)(1 − ε) on the
    true radius; the floor is None ("no guarantee") once ε ≥ 1.
    """
    epsilon = curvature * math.pi ** 2 / (2.0 * delta_a ** 2 * w_min)
    if epsilon >= 1:
        return epsilon, None
    return epsilon, math.pi / delta_a * (1 - epsilon)


def estimate_logit_curvature(logit_fn, step=None, rho_a=None):
    """
    C = max_k |z_k(h) − 2 z_k(0) + z_k(−h)| / h², the central second
    difference of the logits along the direction. Without an explicit
    ``step``, h = CURVATURE_STEP_FRACTION·ρ_a.
    """
    if step is None:
        if rho_a is None or not 0 < rho_a < INF:
            raise InvalidParameterError('a finite rho_a is needed to choose the step')
        step = settings.CURVATURE_STEP_FRACTION * rho_a
    centre = np.asarray(logit_fn(0.0), dtype=float)
    forward = np.asarray(logit_fn(step), dtype=float)
    backward = np.asarray(logit_fn(-step), dtype=float)
    return float(np.max(np.abs(forward - 2 * centre + backward)) / step ** 2)
