# -*- coding: utf-8 -*-
"""
Quadratic (Hessian) step scale against the ghost scale for the top-2
logistic reduction ℓ(τ) = log(1 + e^{−(δ + Δτ)}).

The curvature decays like e^{−δ} while the radius grows only like δ/|Δ|, so
τ_H = 2/ℓ''(0) overshoots the radius once δ passes ln(π|Δ|/2).
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

from scipy.optimize import bisect

from .exceptions import DegenerateSpreadError, InvalidParameterError
from .utils import INF


logger = logging.getLogger(__name__)

CROSSOVER_BRACKET = (0.0, 50.0)


@dataclass(frozen=True)
class MarginState:
    delta: float
    slope_gap: float

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.slope_gap)):
            raise InvalidParameterError('margin and slope gap must be finite')


class GhostComparison(NamedTuple):
    tau_h: float
    rho: float
    ratio: float
    ratio_a: float


def logistic_curvature(delta):
    # σ(δ)(1 − σ(δ)) = e^{−|δ|}/(1 + e^{−|δ|})², even in δ.
    e = math.exp(-abs(delta))
    return e / (1.0 + e) ** 2


def directional_curvature(state):
    return logistic_curvature(state.delta) * state.slope_gap ** 2


def hessian_step(kappa):
    if kappa <= 0:
        logger.debug('nonconvex direction: quadratic scale undefined (kappa=%r)', kappa)
        return INF
    return 2.0 / kappa


def ghost_vs_hessian(state):
    """
    τ_H, the exact binary radius ρ = √(δ² + π²)/|Δ|, their ratio, and the
    ratio against the lower bound ρ_a = π/|Δ| which tends to 2e^δ/(π|Δ|).
    """
    if state.slope_gap == 0:
        raise DegenerateSpreadError('degenerate')
    tau_h = hessian_step(directional_curvature(state))
    gap = abs(state.slope_gap)
    rho = math.hypot(state.delta, math.pi) / gap
    return GhostComparison(tau_h, rho, tau_h / rho, tau_h * gap / math.pi)


def crossover_margin(slope_gap):
    if slope_gap == 0:
        raise DegenerateSpreadError('degenerate')
    return math.log(math.pi * abs(slope_gap) / 2.0)


def crossover_margin_numeric(slope_gap, against='rho_a', bracket=CROSSOVER_BRACKET):
    """
    Smallest δ ≥ 0 with τ_H(δ) = ρ(δ), ρ being π/|Δ| (``'rho_a'``) or
    √(δ² + π²)/|Δ| (``'exact'``). τ_H is even in δ, so the default bracket
    is [0, 50] rather than one reaching into negative margins. Returns None
    when τ_H already exceeds ρ at the lower end of the bracket, i.e. there
    is no crossover.
    """
    if slope_gap == 0:
        raise DegenerateSpreadError('degenerate')
    if against not in ('rho_a', 'exact'):
        raise InvalidParameterError('against must be rho_a or exact')
    gap = abs(slope_gap)

    def excess(delta):
        tau_h = hessian_step(directional_curvature(MarginState(delta, gap)))
        rho = math.pi / gap if against == 'rho_a' else math.hypot(delta, math.pi) / gap
        return math.log(tau_h) - math.log(rho)

    low, high = bracket
    if excess(low) >= 0 or excess(high) <= 0:
        logger.debug('no crossover for slope gap %g on [%g, %g]', slope_gap, low, high)
        return None
    return bisect(excess, low, high, xtol=1e-12)


def crossover_sweep(slope_gap, deltas):
    """
    Rows of (delta, curvature, tau_H, rho, ratio) over a margin grid.
    """
    rows = []
    for delta in deltas:
        state = MarginState(float(delta), slope_gap)
        comparison = ghost_vs_hessian(state)
        rows.append((state.delta, directional_curvature(state), comparison.tau_h, comparison.rho, comparison.ratio))
    return rows
