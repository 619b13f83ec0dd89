# -*- coding: utf-8 -*-
"""
A small dense-network engine: reverse-mode gradients of mean cross-entropy
and forward-mode Jacobian-vector products through dual numbers.

Parameter layout (flat vector θ, layer-major): for every layer, the weight
matrix (out × in, row-major) followed by its bias. Gated layers store the
value weight, value bias, gate weight and gate bias, in that order. A layer
maps a row batch X to X·Wᵀ + b.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import log_softmax

from .activations import ActivationKind, apply, derivative
from .exceptions import InvalidParameterError, NumericOverflowError
from .radius import DirectionalSlopes, LogitState
from .utils import unit_vector


logger = logging.getLogger(__name__)

STANDARDIZE_EPS = 1e-5
IDENTITY = ActivationKind('identity')


@dataclass
class NetworkSpec:
    layer_widths: Tuple[int, ...]
    activations: Tuple[ActivationKind, ...] = ()
    seed: int = 0
    standardize: bool = False

    def __post_init__(self):
        self.layer_widths = tuple(int(w) for w in self.layer_widths)
        if len(self.layer_widths) < 2 or min(self.layer_widths) < 1:
            raise InvalidParameterError('a network needs an input width and at least one positive layer width')
        if isinstance(self.activations, (str, ActivationKind)):
            self.activations = (self.activations,) * (len(self.layer_widths) - 2)
        self.activations = tuple(ActivationKind.parse(kind) for kind in self.activations)
        if len(self.activations) != len(self.layer_widths) - 2:
            raise InvalidParameterError(
                'expected %d hidden activations, got %d' % (len(self.layer_widths) - 2, len(self.activations))
            )
        if self.standardize and any(kind.gated for kind in self.activations):
            raise InvalidParameterError('standardisation is not supported on gated layers')
        if self.seed < 0:
            raise InvalidParameterError('seed must be unsigned')

    @property
    def input_dim(self):
        return self.layer_widths[0]

    @property
    def n_classes(self):
        return self.layer_widths[-1]

    @property
    def n_layers(self):
        return len(self.layer_widths) - 1

    def layer_kind(self, index):
        if index < self.n_layers - 1:
            return self.activations[index]
        return IDENTITY


@dataclass
class Batch:
    inputs: np.ndarray
    labels: np.ndarray
    ids: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int).ravel()
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise InvalidParameterError(
                'batch has %d inputs but %d labels' % (self.inputs.shape[0], self.labels.shape[0])
            )
        if self.labels.size and self.labels.min() < 0:
            raise InvalidParameterError('labels must be non-negative class indices')
        if self.ids is None:
            self.ids = np.arange(self.labels.size)

    def __len__(self):
        return self.labels.size

    def subset(self, index):
        return Batch(self.inputs[index], self.labels[index], np.asarray(self.ids)[index])


class LayerEntry(NamedTuple):
    layer: int
    name: str
    shape: Tuple[int, ...]
    offset: int

    @property
    def size(self):
        return int(np.prod(self.shape))


class PreactivationJvp(NamedTuple):
    layer: int
    kind: ActivationKind
    h: np.ndarray
    hdot: np.ndarray


class Dual(object):
    """
    Array-valued dual number value + ε·tangent with ε² = 0. Tangents flow
    alongside values through every operation the network uses.
    """
    __array_ufunc__ = None

    def __init__(self, value, tangent):
        self.value = np.asarray(value, dtype=float)
        tangent = np.asarray(tangent, dtype=float)
        if tangent.shape != self.value.shape:
            tangent = np.broadcast_to(tangent, self.value.shape)
        self.tangent = tangent

    @staticmethod
    def _split(other):
        if isinstance(other, Dual):
            return other.value, other.tangent
        return np.asarray(other, dtype=float), 0.0

    @property
    def shape(self):
        return self.value.shape

    @property
    def T(self):
        return Dual(self.value.T, self.tangent.T)

    def __getitem__(self, index):
        return Dual(self.value[index], self.tangent[index])

    def __neg__(self):
        return Dual(-self.value, -self.tangent)

    def __add__(self, other):
        value, tangent = self._split(other)
        return Dual(self.value + value, self.tangent + tangent)

    __radd__ = __add__

    def __sub__(self, other):
        value, tangent = self._split(other)
        return Dual(self.value - value, self.tangent - tangent)

    def __rsub__(self, other):
        return -self + other

    def __mul__(self, other):
        value, tangent = self._split(other)
        return Dual(self.value * value, self.tangent * value + self.value * tangent)

    __rmul__ = __mul__

    def __truediv__(self, other):
        value, tangent = self._split(other)
        return Dual(self.value / value, (self.tangent * value - self.value * tangent) / (value * value))

    def __rtruediv__(self, other):
        return Dual(other / self.value, -other * self.tangent / (self.value * self.value))

    def __pow__(self, exponent):
        return Dual(self.value ** exponent, exponent * self.value ** (exponent - 1) * self.tangent)

    def __matmul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value @ other.value, self.value @ other.tangent + self.tangent @ other.value)
        return Dual(self.value @ other, self.tangent @ other)

    def __rmatmul__(self, other):
        return Dual(other @ self.value, other @ self.tangent)

    def sum(self, axis=None, keepdims=False):
        return Dual(self.value.sum(axis=axis, keepdims=keepdims), self.tangent.sum(axis=axis, keepdims=keepdims))

    def mean(self, axis=None, keepdims=False):
        return Dual(self.value.mean(axis=axis, keepdims=keepdims), self.tangent.mean(axis=axis, keepdims=keepdims))

    def apply(self, func, dfunc):
        return Dual(func(self.value), dfunc(self.value) * self.tangent)

    def sqrt(self):
        root = np.sqrt(self.value)
        return Dual(root, 0.5 * self.tangent / root)

    def __repr__(self):
        return 'Dual(value=%r, tangent=%r)' % (self.value, self.tangent)


def param_layout(spec):
    entries, offset = [], 0
    for index in range(spec.n_layers):
        fan_in, fan_out = spec.layer_widths[index], spec.layer_widths[index + 1]
        names = ('W', 'b', 'Wg', 'bg') if spec.layer_kind(index).gated else ('W', 'b')
        for name in names:
            shape = (fan_out, fan_in) if name.startswith('W') else (fan_out,)
            entry = LayerEntry(index, name, shape, offset)
            entries.append(entry)
            offset += entry.size
    return entries


def n_params(spec):
    last = param_layout(spec)[-1]
    return last.offset + last.size


def init_params(spec, seed=None):
    """
    Weights uniform on ±√(6/(fan_in + fan_out)), biases zero, drawn from
    ``seed`` (``spec.seed`` when omitted).
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    chunks = []
    for entry in param_layout(spec):
        if entry.name.startswith('W'):
            fan_out, fan_in = entry.shape
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            chunks.append(rng.uniform(-bound, bound, size=entry.size))
        else:
            chunks.append(np.zeros(entry.size))
    return np.concatenate(chunks)


def _unpack_array(spec, params):
    params = np.asarray(params, dtype=float)
    layout = param_layout(spec)
    expected = layout[-1].offset + layout[-1].size
    if params.shape != (expected,):
        raise InvalidParameterError('expected %d parameters, got shape %r' % (expected, params.shape))
    layers = [{} for _ in range(spec.n_layers)]
    for entry in layout:
        layers[entry.layer][entry.name] = params[entry.offset:entry.offset + entry.size].reshape(entry.shape)
    return layers


def unpack(spec, params):
    if isinstance(params, Dual):
        values, tangents = _unpack_array(spec, params.value), _unpack_array(spec, params.tangent)
        return [
            {name: Dual(value[name], tangent[name]) for name in value}
            for value, tangent in zip(values, tangents)
        ]
    return _unpack_array(spec, params)


def pack(spec, layers):
    return np.concatenate([np.ravel(layers[entry.layer][entry.name]) for entry in param_layout(spec)])


def _activate(kind, x):
    if isinstance(x, Dual):
        return x.apply(lambda v: apply(kind, v), lambda v: derivative(kind, v))
    return apply(kind, x)


def _sqrt(x):
    return x.sqrt() if isinstance(x, Dual) else np.sqrt(x)


def _standardize(pre):
    centred = pre - pre.mean(axis=-1, keepdims=True)
    scale = _sqrt((centred * centred).mean(axis=-1, keepdims=True) + STANDARDIZE_EPS)
    return centred / scale, scale


def _check_finite(x, index):
    arrays = (x.value, x.tangent) if isinstance(x, Dual) else (x,)
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise NumericOverflowError(index + 1)


def _run(spec, layers, inputs):
    """
    The forward pass shared by evaluation, backpropagation and the JVP:
    every operation accepts arrays and Dual numbers alike. Returns the
    logits and a per-layer trace.
    """
    hidden, trace = inputs, []
    with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
        for index, layer in enumerate(layers):
            kind = spec.layer_kind(index)
            pre = hidden @ layer['W'].T + layer['b']
            _check_finite(pre, index)
            entry = {'input': hidden, 'pre': pre}
            if kind.gated:
                gate_pre = hidden @ layer['Wg'].T + layer['bg']
                gate = _activate(kind, gate_pre)
                output = pre * gate
                entry.update(gate_pre=gate_pre, gate=gate, singular_pre=gate_pre)
            else:
                if spec.standardize and index < spec.n_layers - 1:
                    pre, entry['scale'] = _standardize(pre)
                output = _activate(kind, pre)
                entry['singular_pre'] = pre
            _check_finite(output, index)
            entry['output'] = output
            trace.append(entry)
            hidden = output
    return hidden, trace


def _as_rows(spec, inputs):
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape[-1] != spec.input_dim:
        raise InvalidParameterError('input has %d features, network expects %d' % (inputs.shape[-1], spec.input_dim))
    return np.atleast_2d(inputs), inputs.ndim == 1


def forward(spec, params, inputs):
    rows, single = _as_rows(spec, inputs)
    logits, _trace = _run(spec, unpack(spec, params), rows)
    return logits[0] if single else logits


def predict(spec, params, inputs):
    return np.argmax(forward(spec, params, inputs), axis=-1)


def accuracy(spec, params, batch):
    if not len(batch):
        return math.nan
    return float(np.mean(predict(spec, params, batch.inputs) == batch.labels))


def _check_labels(spec, batch):
    if len(batch) and batch.labels.max() >= spec.n_classes:
        raise InvalidParameterError('label %d out of range for %d classes' % (batch.labels.max(), spec.n_classes))


def loss(spec, params, batch):
    _check_labels(spec, batch)
    logits = forward(spec, params, batch.inputs)
    log_probs = log_softmax(logits, axis=1)
    return float(-log_probs[np.arange(len(batch)), batch.labels].mean())


def loss_and_grad(spec, params, batch):
    """
    Mean cross-entropy over ``batch`` and its gradient with respect to the
    flat parameter vector, by reverse accumulation through the trace.
    """
    _check_labels(spec, batch)
    layers = unpack(spec, params)
    logits, trace = _run(spec, layers, batch.inputs)
    count = len(batch)
    log_probs = log_softmax(logits, axis=1)
    value = float(-log_probs[np.arange(count), batch.labels].mean())

    delta = np.exp(log_probs)
    delta[np.arange(count), batch.labels] -= 1.0
    delta /= count
    grads = [None] * spec.n_layers
    for index in reversed(range(spec.n_layers)):
        entry, layer, kind = trace[index], layers[index], spec.layer_kind(index)
        grad = {}
        if kind.gated:
            dpre = delta * entry['gate']
            dgate = delta * entry['pre'] * derivative(kind, entry['gate_pre'])
            grad['Wg'] = dgate.T @ entry['input']
            grad['bg'] = dgate.sum(axis=0)
        else:
            dpre = delta * derivative(kind, entry['singular_pre'])
            if 'scale' in entry:
                normed = entry['singular_pre']
                dpre = (
                    dpre - dpre.mean(axis=-1, keepdims=True)
                    - normed * (dpre * normed).mean(axis=-1, keepdims=True)
                ) / entry['scale']
        grad['W'] = dpre.T @ entry['input']
        grad['b'] = dpre.sum(axis=0)
        delta = dpre @ layer['W']
        if kind.gated:
            delta = delta + dgate @ layer['Wg']
        grads[index] = grad
    return value, pack(spec, grads)


def _dual_run(spec, params, inputs, direction):
    unit, _norm = unit_vector(direction)
    rows, single = _as_rows(spec, inputs)
    _logits, trace = _run(spec, unpack(spec, Dual(params, unit)), rows)
    return trace, single


def logit_jvp(spec, params, inputs, direction):
    """
    a = J_z·v for one input, v being ``direction`` normalised to unit
    length; raises ZeroDirectionError for v = 0.
    """
    trace, single = _dual_run(spec, params, inputs, direction)
    logits = trace[-1]['output']
    return DirectionalSlopes(logits.tangent[0] if single else logits.tangent)


def batch_logit_jvp(spec, params, inputs, direction):
    """
    Logits and their directional derivatives for a whole input matrix, as
    two (samples × classes) arrays from a single dual pass.
    """
    trace, _single = _dual_run(spec, params, np.atleast_2d(inputs), direction)
    logits = trace[-1]['output']
    return np.array(logits.value), np.array(logits.tangent)


def directional_samples(spec, params, batch, direction):
    _check_labels(spec, batch)
    logits, slopes = batch_logit_jvp(spec, params, batch.inputs, direction)
    samples = [DirectionalSlopes(a, sample_id=int(i)) for a, i in zip(slopes, batch.ids)]
    states = [LogitState(z, int(y)) for z, y in zip(logits, batch.labels)]
    return samples, states


def hidden_preactivations_jvp(spec, params, inputs, direction):
    """
    (h, ḣ) for every layer from one dual pass. For plain layers h is the
    argument of the activation (after standardisation when enabled), for
    gated layers the gate preactivation. The last entry is the output layer
    and carries the logits with the identity kind.
    """
    trace, single = _dual_run(spec, params, inputs, direction)
    pairs = []
    for index, entry in enumerate(trace):
        pre = entry['singular_pre']
        h, hdot = (pre.value[0], pre.tangent[0]) if single else (pre.value, pre.tangent)
        pairs.append(PreactivationJvp(index, spec.layer_kind(index), np.array(h), np.array(hdot)))
    return pairs


def save_checkpoint(path, spec, params):
    np.savez(
        path,
        params=np.asarray(params, dtype=float),
        layer_widths=np.asarray(spec.layer_widths),
        activations=np.asarray([str(kind) for kind in spec.activations], dtype=str),
        seed=spec.seed,
        standardize=spec.standardize,
    )
    logger.info('saved checkpoint with %d parameters to %s', np.size(params), path)


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as data:
        spec = NetworkSpec(
            layer_widths=tuple(data['layer_widths'].tolist()),
            activations=tuple(data['activations'].tolist()),
            seed=int(data['seed']),
            standardize=bool(data['standardize']),
        )
        params = np.array(data['params'])
    if params.size != n_params(spec):
        raise InvalidParameterError('checkpoint holds %d parameters, spec needs %d' % (params.size, n_params(spec)))
    return spec, params


@dataclass
class SGDState:
    buffer: Optional[np.ndarray] = None


@dataclass
class AdamState:
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    step: int = 0


def sgd_momentum_step(params, grad, state, lr, momentum=0.0):
    """
    Tentative SGD update p = −η·buf with buf ← μ·buf + g (buf = g on the
    first step). Nothing is applied to ``params``; τ = ‖p‖ includes the
    momentum buffer.
    """
    grad = np.asarray(grad, dtype=float)
    if state.buffer is None or momentum == 0.0:
        buffer = grad.copy()
    else:
        buffer = momentum * state.buffer + grad
    return -lr * buffer, SGDState(buffer)


def adam_step(params, grad, state, lr, betas=(0.9, 0.999), eps=1e-8):
    grad = np.asarray(grad, dtype=float)
    beta1, beta2 = betas
    m = np.zeros_like(grad) if state.m is None else state.m
    v = np.zeros_like(grad) if state.v is None else state.v
    step = state.step + 1
    m = beta1 * m + (1 - beta1) * grad
    v = beta2 * v + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1 ** step)
    v_hat = v / (1 - beta2 ** step)
    return -lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, step)


def _spec(widths, activation, seed, **kwargs):
    return NetworkSpec(layer_widths=widths, activations=activation, seed=seed, **kwargs)


def linear_spec(input_dim, n_classes, seed=0):
    return _spec((input_dim, n_classes), (), seed)


def mlp_tanh_spec(input_dim, n_classes, seed=0):
    return _spec((input_dim, 128, n_classes), 'tanh', seed)


def mlp_relu_spec(input_dim, n_classes, seed=0):
    return _spec((input_dim, 128, n_classes), 'relu', seed)


def deep_mlp_spec(input_dim, n_classes, seed=0):
    return _spec((input_dim, 64, 64, 64, 64, n_classes), 'tanh', seed)


def mlp_ln_spec(input_dim, n_classes, seed=0):
    return _spec((input_dim, 128, n_classes), 'relu', seed, standardize=True)


def wide_mlp_spec(input_dim, n_classes, seed=0):
    return _spec((input_dim, 512, n_classes), 'relu', seed)


def mlp_gelu_spec(input_dim, n_classes, seed=0):
    return _spec((input_dim, 128, n_classes), 'gelu_exact', seed)


def mlp_ria_spec(input_dim, n_classes, seed=0):
    return _spec((input_dim, 128, n_classes), 'ria:1', seed)


def mlp_gaussglu_spec(input_dim, n_classes, seed=0):
    return _spec((input_dim, 128, n_classes), 'gaussglu:1', seed)


def mlp_swiglu_spec(input_dim, n_classes, seed=0):
    return _spec((input_dim, 128, n_classes), 'swiglu', seed)
