# -*- coding: utf-8 -*-
"""
Activation families and their complex singular sets.

A hidden neuron with preactivation h moving as h + tḣ hits a singularity of
its activation φ at the first t with h + tḣ ∈ Σ_φ, which caps the loss
radius independently of the softmax ghosts.
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit, ndtr

from .exceptions import EmptySampleSetError, InvalidParameterError
from .utils import INF, extended_quantile, min_with_tag


PLAIN_KINDS = (
    'relu', 'leaky_relu', 'tanh', 'sigmoid', 'softplus', 'silu', 'gelu_exact', 'gelu_tanh', 'ria', 'identity',
)
GATED_KINDS = ('gaussglu', 'swiglu', 'reglu')
PARAMETRISED = {'leaky_relu': 0.01, 'ria': 1.0, 'gaussglu': 1.0}

GELU_TANH_COEFF = 0.044715
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ActivationKind:
    name: str
    param: Optional[float] = None

    def __post_init__(self):
        if self.name not in PLAIN_KINDS + GATED_KINDS:
            raise InvalidParameterError('unknown activation %r' % self.name)
        if self.name in PARAMETRISED:
            if self.param is None:
                object.__setattr__(self, 'param', PARAMETRISED[self.name])
            if not self.param > 0:
                raise InvalidParameterError('%s parameter must be positive' % self.name)

    @property
    def gated(self):
        return self.name in GATED_KINDS

    @classmethod
    def parse(cls, text):
        """
        ``'relu'``, ``'ria:4'``, ``'leaky_relu:0.1'`` -> ActivationKind.
        """
        if isinstance(text, cls):
            return text
        name, _, param = str(text).strip().partition(':')
        return cls(name, float(param) if param else None)

    def __str__(self):
        if self.param is None:
            return self.name
        return '%s:%g' % (self.name, self.param)


@dataclass(frozen=True)
class SingularSet:
    variant: str
    breakpoints: Tuple[float, ...] = ()
    offset: float = 0.0
    spacing: float = 0.0

    def __post_init__(self):
        if self.variant == 'imaginary_lattice' and not self.spacing > 0:
            raise InvalidParameterError('lattice spacing must be positive')

    @classmethod
    def real_breakpoints(cls, points):
        return cls('real_breakpoints', breakpoints=tuple(points))

    @classmethod
    def imaginary_lattice(cls, offset, spacing):
        return cls('imaginary_lattice', offset=offset, spacing=spacing)

    @classmethod
    def empty(cls):
        return cls('empty')

    @property
    def imaginary_distance(self):
        """
        Distance from the real axis to the nearest lattice point.
        """
        residue = math.fmod(self.offset, self.spacing) % self.spacing
        return min(residue, self.spacing - residue)


LOGISTIC_POLES = SingularSet.imaginary_lattice(math.pi, 2 * math.pi)
TANH_POLES = SingularSet.imaginary_lattice(math.pi / 2, math.pi)
RELU_KINK = SingularSet.real_breakpoints([0.0])


def singular_set(kind):
    kind = ActivationKind.parse(kind)
    if kind.name in ('relu', 'leaky_relu', 'reglu'):
        return RELU_KINK
    if kind.name in ('sigmoid', 'softplus', 'silu', 'swiglu'):
        return LOGISTIC_POLES
    if kind.name in ('tanh', 'gelu_tanh'):
        return TANH_POLES
    # gelu_exact, ria and gaussglu are built from erf; identity is linear.
    return SingularSet.empty()


def neuron_radius(h, hdot, kind):
    """
    min_{s ∈ Σ_φ} |s − h| / |ḣ|, infinite when Σ_φ is empty or ḣ = 0.
    Accepts scalars or arrays.
    """
    singular = singular_set(kind)
    h = np.asarray(h, dtype=float)
    speed = np.abs(np.asarray(hdot, dtype=float))
    if singular.variant == 'empty':
        distance = np.full(np.broadcast(h, speed).shape, INF)
    elif singular.variant == 'real_breakpoints':
        points = np.asarray(singular.breakpoints)
        distance = np.min(np.abs(h[..., np.newaxis] - points), axis=-1)
    else:
        distance = np.hypot(h, singular.imaginary_distance)
    with np.errstate(divide='ignore', invalid='ignore'):
        radius = np.where(speed > 0, distance / speed, INF)
    if radius.ndim == 0:
        return float(radius)
    return radius


def layer_radius(h, hdot, kind):
    radii = neuron_radius(h, hdot, kind)
    return float(np.min(radii)) if np.size(radii) else INF


def ffn_kink_quantile(h, hdot, q=0.01):
    """
    q-quantile of |h|/|ḣ| over hidden preactivations, the conservative
    distance-to-kink proxy ρ_ffn. Neurons with ḣ = 0 count as infinitely
    far; when every neuron does, the result is infinite.
    """
    h = np.abs(np.ravel(np.asarray(h, dtype=float)))
    speed = np.abs(np.ravel(np.asarray(hdot, dtype=float)))
    if h.size == 0:
        raise EmptySampleSetError('no preactivations')
    if not 0 < q < 1:
        raise InvalidParameterError('quantile must lie in (0, 1)')
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = np.where(speed > 0, h / speed, INF)
    return extended_quantile(ratios, q)


def network_radius(rho_out, rho_ffn):
    return min_with_tag([('out', rho_out), ('ffn', rho_ffn)])


def ria(x, beta=1.0):
    """
    Rectified integral activation: ReLU convolved with a Gaussian,
    x·Φ(βx) + φ(βx)/β. Entire, convex, tends to ReLU as β grows.
    """
    x = np.asarray(x, dtype=float)
    scaled = beta * x
    return x * ndtr(scaled) + _gaussian_pdf(scaled) / beta


def ria_derivative(x, beta=1.0):
    return ndtr(beta * np.asarray(x, dtype=float))


def gaussglu_gate(x, beta=1.0):
    return ndtr(beta * np.asarray(x, dtype=float))


def _gaussian_pdf(x):
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def _silu(x):
    return x * expit(x)


def _silu_derivative(x):
    s = expit(x)
    return s * (1 + x * (1 - s))


def _gelu_tanh(x):
    return 0.5 * x * (1 + np.tanh(SQRT_2_OVER_PI * (x + GELU_TANH_COEFF * x ** 3)))


def _gelu_tanh_derivative(x):
    t = np.tanh(SQRT_2_OVER_PI * (x + GELU_TANH_COEFF * x ** 3))
    return 0.5 * (1 + t) + 0.5 * x * (1 - t * t) * SQRT_2_OVER_PI * (1 + 3 * GELU_TANH_COEFF * x * x)


def apply(kind, x):
    """
    φ(x) for a plain kind, or the gate γ(x) for a gated kind.
    """
    name, param = kind.name, kind.param
    if name == 'identity':
        return x
    if name in ('relu', 'reglu'):
        return np.maximum(x, 0.0)
    if name == 'leaky_relu':
        return np.where(x > 0, x, param * x)
    if name == 'tanh':
        return np.tanh(x)
    if name == 'sigmoid':
        return expit(x)
    if name == 'softplus':
        return np.logaddexp(0.0, x)
    if name in ('silu', 'swiglu'):
        return _silu(x)
    if name == 'gelu_exact':
        return x * ndtr(x)
    if name == 'gelu_tanh':
        return _gelu_tanh(x)
    if name == 'ria':
        return ria(x, param)
    return gaussglu_gate(x, param)


def derivative(kind, x):
    name, param = kind.name, kind.param
    if name == 'identity':
        return np.ones_like(x)
    if name in ('relu', 'reglu'):
        return (x > 0).astype(float)
    if name == 'leaky_relu':
        return np.where(x > 0, 1.0, param)
    if name == 'tanh':
        return 1 - np.tanh(x) ** 2
    if name in ('sigmoid', 'softplus'):
        s = expit(x)
        return s * (1 - s) if name == 'sigmoid' else s
    if name in ('silu', 'swiglu'):
        return _silu_derivative(x)
    if name == 'gelu_exact':
        return ndtr(x) + x * _gaussian_pdf(x)
    if name == 'gelu_tanh':
        return _gelu_tanh_derivative(x)
    if name == 'ria':
        return ria_derivative(x, param)
    return param * _gaussian_pdf(param * x)
