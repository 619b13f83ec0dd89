# -*- coding: utf-8 -*-
import math
import os

import numpy as np
from scipy.special import softmax

from ghost_radius import autonet
from ghost_radius.autonet import Batch, Dual, NetworkSpec
from ghost_radius.exceptions import (
    InvalidParameterError, NumericOverflowError, ZeroDirectionError,
)

from .base import BaseTestCase


SMALL_KINDS = ('tanh', 'relu', 'sigmoid', 'softplus', 'silu', 'gelu_exact', 'gelu_tanh', 'ria:2', 'leaky_relu:0.1')


def random_batch(rng, spec, count=7):
    return Batch(rng.normal(size=(count, spec.input_dim)), rng.integers(0, spec.n_classes, size=count))


class NetworkSpecTestCase(BaseTestCase):

    def test_broadcast_activation(self):
        spec = NetworkSpec((4, 8, 8, 3), 'tanh')
        self.assertEqual([str(k) for k in spec.activations], ['tanh', 'tanh'])
        self.assertEqual(spec.n_layers, 3)
        self.assertEqual(spec.layer_kind(2).name, 'identity')

    def test_validation(self):
        with self.assertRaises(InvalidParameterError):
            NetworkSpec((4,))
        with self.assertRaises(InvalidParameterError):
            NetworkSpec((4, 8, 3), ('tanh', 'relu'))
        with self.assertRaises(InvalidParameterError):
            NetworkSpec((4, 8, 3), 'swiglu', standardize=True)
        with self.assertRaises(InvalidParameterError):
            NetworkSpec((4, 3), seed=-1)

    def test_param_layout(self):
        spec = NetworkSpec((4, 6, 3), 'gaussglu')
        names = [(entry.layer, entry.name) for entry in autonet.param_layout(spec)]
        self.assertEqual(names, [(0, 'W'), (0, 'b'), (0, 'Wg'), (0, 'bg'), (1, 'W'), (1, 'b')])
        self.assertEqual(autonet.n_params(spec), 2 * (4 * 6 + 6) + 6 * 3 + 3)

    def test_architectures(self):
        self.assertEqual(autonet.n_params(autonet.mlp_tanh_spec(16, 10)), 16 * 128 + 128 + 128 * 10 + 10)
        self.assertEqual(autonet.n_params(autonet.linear_spec(16, 10)), 16 * 10 + 10)
        self.assertEqual(autonet.deep_mlp_spec(16, 10).layer_widths, (16, 64, 64, 64, 64, 10))
        self.assertTrue(autonet.mlp_ln_spec(16, 10).standardize)
        self.assertEqual(autonet.wide_mlp_spec(16, 10).layer_widths[1], 512)


class ParamsTestCase(BaseTestCase):

    def test_init_is_seeded(self):
        spec = NetworkSpec((5, 7, 3), 'tanh', seed=3)
        self.assertTrue(np.array_equal(autonet.init_params(spec), autonet.init_params(spec)))
        self.assertFalse(np.array_equal(autonet.init_params(spec), autonet.init_params(spec, seed=4)))

    def test_init_bounds(self):
        spec = NetworkSpec((5, 7, 3), 'tanh')
        layers = autonet.unpack(spec, autonet.init_params(spec))
        self.assertTrue(np.all(np.abs(layers[0]['W']) <= math.sqrt(6.0 / 12)))
        self.assertTrue(np.all(layers[1]['b'] == 0))

    def test_pack_unpack(self):
        spec = NetworkSpec((5, 7, 3), 'swiglu')
        params = self.rng.normal(size=autonet.n_params(spec))
        self.assertTrue(np.array_equal(autonet.pack(spec, autonet.unpack(spec, params)), params))

    def test_wrong_length(self):
        spec = NetworkSpec((5, 3))
        with self.assertRaises(InvalidParameterError):
            autonet.forward(spec, np.zeros(4), np.zeros(5))


class ForwardTestCase(BaseTestCase):

    def test_linear_forward(self):
        spec = autonet.linear_spec(3, 2)
        layers = [{'W': np.array([[1.0, 0.0, 2.0], [0.0, -1.0, 0.0]]), 'b': np.array([0.5, 0.0])}]
        logits = autonet.forward(spec, autonet.pack(spec, layers), np.array([1.0, 2.0, 3.0]))
        self.assertAllClose(logits, [7.5, -2.0])

    def test_loss_of_uniform_logits(self):
        spec = autonet.linear_spec(3, 4)
        batch = random_batch(self.rng, spec)
        self.assertAllClose(autonet.loss(spec, np.zeros(autonet.n_params(spec)), batch), math.log(4))

    def test_accuracy(self):
        spec = autonet.linear_spec(2, 2)
        layers = [{'W': np.array([[1.0, 0.0], [0.0, 1.0]]), 'b': np.zeros(2)}]
        batch = Batch([[2.0, 0.0], [0.0, 2.0], [3.0, 1.0]], [0, 1, 1])
        self.assertAllClose(autonet.accuracy(spec, autonet.pack(spec, layers), batch), 2 / 3)

    def test_label_out_of_range(self):
        spec = autonet.linear_spec(2, 2)
        with self.assertRaises(InvalidParameterError):
            autonet.loss(spec, np.zeros(6), Batch([[0.0, 0.0]], [2]))

    def test_overflow_names_layer(self):
        spec = autonet.linear_spec(2, 2)
        params = np.full(autonet.n_params(spec), 1e308)
        with self.assertRaises(NumericOverflowError) as context:
            autonet.forward(spec, params, np.array([10.0, 10.0]))
        self.assertEqual(context.exception.layer, 1)
        self.assertIn('layer 1', str(context.exception))


class DualTestCase(BaseTestCase):

    def test_arithmetic(self):
        x = Dual(np.array([2.0, 3.0]), np.array([1.0, 0.0]))
        y = (x * x + 3.0 * x - 1.0 / x) / 2.0
        self.assertAllClose(y.value, (np.array([4.0, 9.0]) + np.array([6.0, 9.0]) - np.array([0.5, 1 / 3])) / 2)
        self.assertAllClose(y.tangent, [(4.0 + 3.0 + 0.25) / 2, 0.0])
        self.assertAllClose((x ** 3).tangent, [12.0, 0.0])
        self.assertAllClose(x.sqrt().tangent, [0.5 / math.sqrt(2.0), 0.0])

    def test_matmul_both_sides(self):
        matrix = self.rng.normal(size=(3, 2))
        x = Dual(self.rng.normal(size=(2, 4)), self.rng.normal(size=(2, 4)))
        left = matrix @ x
        self.assertAllClose(left.tangent, matrix @ x.tangent)
        right = x.T @ matrix.T
        self.assertAllClose(right.value, (matrix @ x.value).T)


class JvpTestCase(BaseTestCase):

    def fd_logits(self, spec, params, inputs, direction, step=1e-6):
        unit = direction / np.linalg.norm(direction)
        return (
            autonet.forward(spec, params + step * unit, inputs)
            - autonet.forward(spec, params - step * unit, inputs)
        ) / (2 * step)

    def test_jvp_against_finite_differences(self):
        for trial in range(50):
            kind = SMALL_KINDS[trial % len(SMALL_KINDS)]
            spec = NetworkSpec((5, 8, 4), kind, standardize=(trial % 5 == 4))
            params = autonet.init_params(spec, seed=trial)
            inputs = self.rng.normal(size=5)
            direction = self.rng.normal(size=autonet.n_params(spec))
            slopes = autonet.logit_jvp(spec, params, inputs, direction)
            expected = self.fd_logits(spec, params, inputs, direction)
            error = np.linalg.norm(slopes.a - expected) / np.linalg.norm(expected)
            self.assertLess(error, 1e-4, 'kind %s' % kind)

    def test_jvp_gated_and_deep(self):
        for spec in (NetworkSpec((5, 6, 3), 'gaussglu:1.5'), NetworkSpec((5, 6, 3), 'swiglu'),
                     NetworkSpec((5, 6, 6, 6, 3), 'tanh')):
            params = autonet.init_params(spec, seed=1)
            inputs = self.rng.normal(size=5)
            direction = self.rng.normal(size=autonet.n_params(spec))
            slopes = autonet.logit_jvp(spec, params, inputs, direction)
            self.assertAllClose(slopes.a, self.fd_logits(spec, params, inputs, direction), rtol=1e-5, atol=1e-8)

    def test_jvp_scales_to_unit_direction(self):
        spec = NetworkSpec((4, 6, 3), 'tanh')
        params = autonet.init_params(spec)
        direction = self.rng.normal(size=autonet.n_params(spec))
        inputs = self.rng.normal(size=4)
        a = autonet.logit_jvp(spec, params, inputs, direction).a
        self.assertAllClose(autonet.logit_jvp(spec, params, inputs, 10 * direction).a, a, rtol=1e-12)

    def test_zero_direction(self):
        spec = NetworkSpec((4, 3))
        with self.assertRaises(ZeroDirectionError):
            autonet.logit_jvp(spec, np.zeros(autonet.n_params(spec)), np.zeros(4), np.zeros(autonet.n_params(spec)))

    def test_batch_jvp_matches_rows(self):
        spec = NetworkSpec((4, 6, 3), 'relu')
        params = autonet.init_params(spec)
        inputs = self.rng.normal(size=(5, 4))
        direction = self.rng.normal(size=autonet.n_params(spec))
        logits, tangents = autonet.batch_logit_jvp(spec, params, inputs, direction)
        self.assertAllClose(logits, autonet.forward(spec, params, inputs))
        for row in range(5):
            self.assertAllClose(tangents[row], autonet.logit_jvp(spec, params, inputs[row], direction).a)

    def test_directional_samples(self):
        spec = NetworkSpec((4, 6, 3), 'tanh')
        batch = Batch(self.rng.normal(size=(3, 4)), [0, 2, 1], ids=[10, 11, 12])
        samples, states = autonet.directional_samples(
            spec, autonet.init_params(spec), batch, self.rng.normal(size=autonet.n_params(spec)),
        )
        self.assertEqual([s.sample_id for s in samples], [10, 11, 12])
        self.assertEqual([s.target for s in states], [0, 2, 1])

    def test_hidden_preactivations(self):
        spec = NetworkSpec((4, 6, 3), 'tanh')
        params = autonet.init_params(spec)
        inputs = self.rng.normal(size=4)
        direction = self.rng.normal(size=autonet.n_params(spec))
        pairs = autonet.hidden_preactivations_jvp(spec, params, inputs, direction)
        self.assertEqual([p.layer for p in pairs], [0, 1])
        self.assertEqual(pairs[1].kind.name, 'identity')
        self.assertAllClose(pairs[1].h, autonet.forward(spec, params, inputs))

        unit = direction / np.linalg.norm(direction)
        step = 1e-6

        def first_pre(theta):
            layer = autonet.unpack(spec, theta)[0]
            return layer['W'] @ inputs + layer['b']

        expected = (first_pre(params + step * unit) - first_pre(params - step * unit)) / (2 * step)
        self.assertAllClose(pairs[0].hdot, expected, rtol=1e-6, atol=1e-9)


class GradientTestCase(BaseTestCase):

    def check_gradient(self, spec, coordinates=20, step=1e-6):
        params = autonet.init_params(spec, seed=2)
        batch = random_batch(self.rng, spec)
        value, grad = autonet.loss_and_grad(spec, params, batch)
        self.assertAllClose(value, autonet.loss(spec, params, batch), rtol=1e-12)
        for index in self.rng.choice(params.size, size=coordinates, replace=False):
            bump = np.zeros_like(params)
            bump[index] = step
            numeric = (autonet.loss(spec, params + bump, batch) - autonet.loss(spec, params - bump, batch)) / (2 * step)
            self.assertAllClose(grad[index], numeric, rtol=1e-5, atol=1e-8)

    def test_plain_layers(self):
        self.check_gradient(NetworkSpec((5, 8, 4), 'tanh'))
        self.check_gradient(NetworkSpec((5, 8, 8, 4), ('gelu_exact', 'softplus')))

    def test_standardized(self):
        self.check_gradient(NetworkSpec((5, 8, 4), 'tanh', standardize=True))

    def test_gated(self):
        self.check_gradient(NetworkSpec((5, 6, 4), 'gaussglu:1'))
        self.check_gradient(NetworkSpec((5, 6, 4), 'swiglu'))

    def test_linear(self):
        self.check_gradient(autonet.linear_spec(5, 4))

    def test_gradient_matches_directional_slopes(self):
        for spec in (NetworkSpec((5, 8, 4), 'tanh'), NetworkSpec((5, 6, 4), 'swiglu'), autonet.linear_spec(5, 4)):
            params = autonet.init_params(spec, seed=3)
            batch = random_batch(self.rng, spec, count=9)
            direction = self.rng.normal(size=params.size)
            _value, grad = autonet.loss_and_grad(spec, params, batch)
            logits, slopes = autonet.batch_logit_jvp(spec, params, batch.inputs, direction)
            residual = softmax(logits, axis=1) - np.eye(spec.n_classes)[batch.labels]
            chain = (residual * slopes).sum(axis=1).mean()
            self.assertAllClose(grad @ direction / np.linalg.norm(direction), chain, rtol=1e-9, atol=1e-12)


class CheckpointTestCase(BaseTestCase):

    def test_checkpoint(self):
        spec = NetworkSpec((4, 6, 3), 'ria:2', seed=5, standardize=True)
        params = autonet.init_params(spec)
        path = os.path.join(self.make_tempdir(), 'net.npz')
        autonet.save_checkpoint(path, spec, params)
        loaded_spec, loaded = autonet.load_checkpoint(path)
        self.assertEqual(loaded_spec, spec)
        self.assertTrue(np.array_equal(loaded, params))


class OptimizerTestCase(BaseTestCase):

    def test_sgd_momentum(self):
        g1, g2 = np.array([1.0, -2.0]), np.array([0.5, 0.5])
        update, state = autonet.sgd_momentum_step(None, g1, autonet.SGDState(), lr=0.1, momentum=0.9)
        self.assertAllClose(update, -0.1 * g1)
        update, state = autonet.sgd_momentum_step(None, g2, state, lr=0.1, momentum=0.9)
        self.assertAllClose(update, -0.1 * (0.9 * g1 + g2))

    def test_plain_sgd(self):
        update, _state = autonet.sgd_momentum_step(None, np.array([2.0]), autonet.SGDState(np.array([5.0])), 0.5)
        self.assertAllClose(update, [-1.0])

    def test_adam_first_step(self):
        grad = np.array([3.0, -0.2])
        update, state = autonet.adam_step(None, grad, autonet.AdamState(), lr=0.01)
        self.assertAllClose(update, [-0.01, 0.01], rtol=1e-6)
        self.assertEqual(state.step, 1)

    def test_adam_step_stays_within_moment_bound(self):
        beta1, beta2, lr = 0.9, 0.999, 0.01
        state = autonet.AdamState()
        for step in range(1, 201):
            grad = self.rng.normal(size=6) * 10.0 ** self.rng.uniform(-3, 3)
            grad[self.rng.random(6) < 0.3] = 0.0
            update, state = autonet.adam_step(None, grad, state, lr=lr, betas=(beta1, beta2))
            ages = np.arange(step)
            first = (1 - beta1) * beta1 ** ages / (1 - beta1 ** step)
            second = (1 - beta2) * beta2 ** ages / (1 - beta2 ** step)
            bound = lr * math.sqrt((first ** 2 / second).sum())
            self.assertTrue((np.abs(update) <= bound * (1 + 1e-12)).all(), 'step %d' % step)
