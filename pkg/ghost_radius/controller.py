# -*- coding: utf-8 -*-
"""
Step-size control from the convergence radius.

Policies receive the optimizer's tentative update p (momentum or Adam
state already folded in) and return the update actually applied. ρ_a is
measured along v = p/‖p‖, on the current mini-batch capped at
``settings.RADIUS_BATCH_CAP`` samples.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import autonet, settings
from .activations import (
    ffn_kink_quantile, layer_radius, network_radius, singular_set,
)
from .exceptions import InvalidParameterError
from .radius import (
    DirectionalSlopes, LogitState, batch_radius, normalized_step,
)
from .utils import INF, unit_vector


logger = logging.getLogger(__name__)

CLIP_TOLERANCE = 1e-12


@dataclass
class ControlDecision:
    """
    One controller step. ``scale`` is always tau_after/tau_before; it lies
    in (0, 1] for clipping and pass-through policies. The target-r
    controller records its multiplier η in ``eta`` (None elsewhere), where
    the ratio may exceed 1.
    """
    scale: float
    rho_a: float
    tau_before: float
    tau_after: float
    r_after: float
    mode: Optional[str] = None
    engaged: bool = False
    staleness: int = 0
    eta: Optional[float] = None


def radius_clip(update, rho_a, mode=None):
    """
    s·p with s = min(1, ρ_a/‖p‖). Steps already within ρ_a (to a relative
    1e-12) are passed through untouched, so clipping twice equals clipping
    once.
    """
    update = np.asarray(update, dtype=float)
    tau = float(np.linalg.norm(update))
    if tau == 0.0:
        return update, ControlDecision(1.0, rho_a, 0.0, 0.0, 0.0, mode)
    if tau <= rho_a * (1 + CLIP_TOLERANCE):
        return update, ControlDecision(1.0, rho_a, tau, tau, normalized_step(tau, rho_a), mode)
    scale = rho_a / tau
    tau_after = scale * tau
    return update * scale, ControlDecision(
        scale, rho_a, tau, tau_after, normalized_step(tau_after, rho_a), mode, engaged=True,
    )


def target_r_step(direction, r_target, rho_a, eta_max=None):
    """
    η = r·ρ_a/‖v‖, so the step η·v has length exactly r·ρ_a. An infinite
    radius caps η at ``eta_max`` (``settings.ETA_MAX``).
    """
    if not r_target > 0:
        raise InvalidParameterError('target r must be positive')
    direction = np.asarray(direction, dtype=float)
    _unit, norm = unit_vector(direction)
    if math.isinf(rho_a):
        eta = settings.ETA_MAX if eta_max is None else eta_max
        logger.debug('infinite radius, eta capped at %g', eta)
    else:
        eta = r_target * rho_a / norm
    return eta, eta * direction


def grad_clip_baseline(gradient, threshold):
    if not threshold > 0:
        raise InvalidParameterError('clip threshold must be positive')
    gradient = np.asarray(gradient, dtype=float)
    norm = float(np.linalg.norm(gradient))
    if norm <= threshold:
        return gradient
    return gradient * (threshold / norm)


def cap_batch(batch, cap=None):
    cap = settings.RADIUS_BATCH_CAP if cap is None else cap
    if len(batch) <= cap:
        return batch
    return batch.subset(slice(0, cap))


def finite_difference_slopes(spec, params, inputs, direction):
    unit, _norm = unit_vector(direction)
    params = np.asarray(params, dtype=float)
    step = settings.RADIUS_FD_STEP * max(1.0, float(np.max(np.abs(params))))
    forward = autonet.forward(spec, params + step * unit, inputs)
    backward = autonet.forward(spec, params - step * unit, inputs)
    return (forward - backward) / (2 * step)


def rho_estimate(spec, params, batch, direction, mode='jvp', exact=False, cap=None):
    """
    RadiusReport for ``direction`` over ``batch`` (capped). ``mode`` is
    ``'jvp'`` for exact forward-mode slopes or ``'finite_diff'`` for the
    central difference with h = RADIUS_FD_STEP·max(1, ‖θ‖∞).
    """
    batch = cap_batch(batch, cap)
    if mode == 'jvp':
        samples, states = autonet.directional_samples(spec, params, batch, direction)
    elif mode == 'finite_diff':
        slopes = finite_difference_slopes(spec, params, batch.inputs, direction)
        logits = autonet.forward(spec, params, batch.inputs)
        samples = [DirectionalSlopes(a, sample_id=int(i)) for a, i in zip(slopes, batch.ids)]
        states = [LogitState(z, int(y)) for z, y in zip(logits, batch.labels)]
    else:
        raise InvalidParameterError('unknown radius mode %r' % mode)
    return batch_radius(samples, states, exact=exact, mode=mode)


def ffn_radius(spec, params, inputs, direction, q=None):
    """
    Hidden-layer radius: the q-quantile kink proxy over layers with real
    breakpoints, and the exact nearest-pole radius over smooth layers.
    """
    q = settings.KINK_QUANTILE if q is None else q
    pairs = autonet.hidden_preactivations_jvp(spec, params, inputs, direction)[:-1]
    kinked = [p for p in pairs if singular_set(p.kind).variant == 'real_breakpoints']
    smooth = [p for p in pairs if singular_set(p.kind).variant == 'imaginary_lattice']
    rho = INF
    if kinked:
        rho = ffn_kink_quantile(
            np.concatenate([np.ravel(p.h) for p in kinked]), np.concatenate([np.ravel(p.hdot) for p in kinked]), q,
        )
    for pair in smooth:
        rho = min(rho, layer_radius(pair.h, pair.hdot, pair.kind))
    return rho


def network_rho_estimate(spec, params, batch, direction, q=None, mode='jvp'):
    """
    ρ_net = min(ρ_out, ρ_ffn) with the tag of the binding term.
    """
    report = rho_estimate(spec, params, batch, direction, mode=mode)
    rho_ffn = ffn_radius(spec, params, cap_batch(batch).inputs, direction, q)
    rho_net, tag = network_radius(report.rho_a, rho_ffn)
    return rho_net, tag, report


@dataclass
class StepContext:
    spec: autonet.NetworkSpec
    params: np.ndarray
    batch: autonet.Batch


class StepPolicy(object):
    """
    Turns a tentative optimizer update into the applied update. Subclasses
    override ``control``; ``prepare_gradient`` runs before the optimizer.
    """
    name = None
    clips = False

    def __init__(self, rho_every=None, mode='jvp', track_radius=True, **options):
        self.rho_every = int(settings.RHO_EVERY if rho_every is None else rho_every)
        if self.rho_every < 1:
            raise InvalidParameterError('rho_every must be at least 1')
        self.mode = mode
        self.track_radius = track_radius
        self.options = options
        self._cached = None
        self._cached_step = None

    def prepare_gradient(self, gradient):
        return gradient

    def radius(self, step, update, context):
        """
        (ρ, staleness) along the update, recomputed every ``rho_every`` steps;
        NaN when radius tracking is off.
        """
        if not self.track_radius:
            return math.nan, 0
        if self._cached is not None and step - self._cached_step < self.rho_every:
            staleness = step - self._cached_step
            logger.debug('step %d: reusing radius from step %d (staleness %d)', step, self._cached_step, staleness)
            return self._cached, staleness
        if not np.any(update):
            rho = INF
        else:
            rho = self.measure(update, context)
        self._cached, self._cached_step = rho, step
        return rho, 0

    def measure(self, update, context):
        return rho_estimate(context.spec, context.params, context.batch, update, mode=self.mode).rho_a

    def control(self, step, update, context):
        raise NotImplementedError

    def _passthrough(self, step, update, context):
        rho, staleness = self.radius(step, update, context)
        tau = float(np.linalg.norm(update))
        r = math.nan if math.isnan(rho) else normalized_step(tau, rho)
        decision = ControlDecision(1.0, rho, tau, tau, r, self.mode, staleness=staleness)
        return update, decision


class PlainPolicy(StepPolicy):
    name = 'plain'

    def control(self, step, update, context):
        return self._passthrough(step, update, context)


class FixedLRPolicy(PlainPolicy):
    name = 'fixed_lr'


class GradClipPolicy(StepPolicy):
    name = 'grad_clip'

    def __init__(self, threshold=None, **kwargs):
        super(GradClipPolicy, self).__init__(**kwargs)
        self.threshold = float(settings.GRAD_CLIP_THRESHOLD if threshold is None else threshold)

    def prepare_gradient(self, gradient):
        return grad_clip_baseline(gradient, self.threshold)

    def control(self, step, update, context):
        return self._passthrough(step, update, context)


class RadiusClipPolicy(StepPolicy):
    name = 'rho_controller'
    clips = True

    def control(self, step, update, context):
        rho, staleness = self.radius(step, update, context)
        update, decision = radius_clip(update, rho, self.mode)
        decision.staleness = staleness
        return update, decision


class NetworkRadiusClipPolicy(RadiusClipPolicy):
    name = 'rho_controller_all'

    def measure(self, update, context):
        rho_net, tag, _report = network_rho_estimate(
            context.spec, context.params, context.batch, update, q=self.options.get('q'), mode=self.mode,
        )
        logger.debug('network radius %g bound by %s', rho_net, tag)
        return rho_net


class TargetRPolicy(StepPolicy):
    name = 'target_r'

    def __init__(self, r_target=1.0, **kwargs):
        super(TargetRPolicy, self).__init__(**kwargs)
        if not r_target > 0:
            raise InvalidParameterError('target r must be positive')
        self.r_target = float(r_target)

    def control(self, step, update, context):
        tau = float(np.linalg.norm(update))
        if tau == 0.0:
            return update, ControlDecision(1.0, INF, 0.0, 0.0, 0.0, self.mode)
        rho, staleness = self.radius(step, update, context)
        eta, applied = target_r_step(update, self.r_target, rho)
        tau_after = eta * tau
        decision = ControlDecision(
            tau_after / tau, rho, tau, tau_after, normalized_step(tau_after, rho), self.mode,
            engaged=True, staleness=staleness, eta=eta,
        )
        return applied, decision
