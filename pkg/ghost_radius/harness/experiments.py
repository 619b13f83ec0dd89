# -*- coding: utf-8 -*-
"""
Experiment drivers. Each ``run_*`` takes a cleaned ExperimentConfig and
returns a RunRecord; nothing here writes files.

Arms of the spike experiment are labelled
``<architecture>/<arm>@<multiplier>``, those of target-r training
``target_r=<r>`` and ``fixed_lr=<lr>``.
"""
import itertools
import logging
import math
from collections import OrderedDict

import numpy as np
from scipy.special import log_softmax

from .. import autonet, settings
from ..activations import (
    ffn_kink_quantile, layer_radius, network_radius, neuron_radius,
    singular_set,
)
from ..controller import StepContext, cap_batch, ffn_radius, rho_estimate
from ..exceptions import (
    ConfigurationError, ContourTooCloseError, NumericOverflowError,
)
from ..expsum import ExpSum, count_zeros_in_disk, nearest_zero
from ..hessian_ghost import (
    crossover_margin, crossover_margin_numeric, crossover_sweep,
)
from ..klbound import kl_check
from ..radius import (
    DirectionalSlopes, LogitState, batch_radius, exact_radius, lower_bound,
    per_sample_ghost, temperature_radius,
)
from ..utils import import_from_setting, unit_vector
from .config import parse_direction
from .datasets import load_dataset
from .records import (
    RunRecord, flip_fraction, loss_ratio, retained_accuracy, transition_point,
)


logger = logging.getLogger(__name__)

VIOLATION_TOLERANCE = 1e-12
ACTSCAN_OFFSETS = (0.0, 0.5, 1.0, 2.0)
# Zeros are counted in the disk of this multiple of the nearest modulus.
ZERO_COUNT_FACTOR = 1.5


def build_network(config, dataset, seed, architecture=None):
    factory = import_from_setting(settings.ARCHITECTURES, architecture or config.architecture)
    spec = factory(dataset.input_dim, dataset.n_classes, seed)
    return spec, autonet.init_params(spec)


def make_policy(name, config, **options):
    policy_class = import_from_setting(settings.STEP_POLICIES, name)
    options.setdefault('threshold', config.clip_threshold)
    return policy_class(rho_every=config.rho_every, mode=config.rho_mode, **options)


class Trainer(object):
    """
    Mini-batch training of one arm: optimizer proposes, policy disposes.
    Batches are drawn from a generator seeded with the run seed, so arms
    sharing a seed see the same batch sequence.
    """

    def __init__(self, spec, params, dataset, config, policy, seed, lr=None):
        self.spec = spec
        self.params = np.array(params, dtype=float)
        self.dataset = dataset
        self.config = config
        self.policy = policy
        self.lr = config.lr if lr is None else lr
        self.rng = np.random.default_rng(seed)
        self.state = autonet.SGDState() if config.optimizer == 'sgd' else autonet.AdamState()

    def sample_batch(self):
        train = self.dataset.train
        size = min(self.config.batch_size, len(train))
        return train.subset(np.sort(self.rng.choice(len(train), size=size, replace=False)))

    def tentative_update(self, grad, lr):
        if self.config.optimizer == 'sgd':
            return autonet.sgd_momentum_step(self.params, grad, self.state, lr, self.config.momentum)
        return autonet.adam_step(
            self.params, grad, self.state, lr, (self.config.beta1, self.config.beta2), self.config.adam_eps,
        )

    def step(self, index, lr=None):
        lr = self.lr if lr is None else lr
        batch = self.sample_batch()
        loss, grad = autonet.loss_and_grad(self.spec, self.params, batch)
        grad = self.policy.prepare_gradient(grad)
        update, self.state = self.tentative_update(grad, lr)
        applied, decision = self.policy.control(index, update, StepContext(self.spec, self.params, batch))
        self.params = self.params + applied
        return loss, decision

    def evaluate(self):
        # A network that overflows has no usable predictions.
        try:
            return (
                autonet.loss(self.spec, self.params, self.dataset.train),
                autonet.accuracy(self.spec, self.params, self.dataset.test),
            )
        except NumericOverflowError:
            return math.inf, 0.0


def train_arm(trainer, n_steps, record, arm, seed, lr_at=None):
    """
    Run ``n_steps`` steps, logging a step row and a decision row each.
    Returns False when the arm diverged numerically and had to stop.
    """
    for index in range(n_steps):
        lr = trainer.lr if lr_at is None else lr_at(index)
        try:
            loss, decision = trainer.step(index, lr)
            test_acc = autonet.accuracy(trainer.spec, trainer.params, trainer.dataset.test)
        except NumericOverflowError as error:
            logger.warning('arm %s seed %d diverged at step %d: %s', arm, seed, index, error)
            record.add_step(index, math.inf, 0.0, math.nan, math.nan, math.nan, lr, arm, seed)
            return False
        record.add_step(
            index, loss, test_acc, decision.tau_after, decision.rho_a, decision.r_after, lr * decision.scale, arm, seed,
        )
        record.add_decision(index, decision, arm, seed)
    return True


def train_to_convergence(spec, params, dataset, config, seed):
    """
    Plain training until the train loss drops below ``converged_loss`` or
    ``train_steps`` steps have run, whichever comes first.
    """
    trainer = Trainer(spec, params, dataset, config, make_policy('plain', config, track_radius=False), seed)
    for index in range(config.train_steps):
        trainer.step(index)
        if index % 10 == 9 and autonet.loss(spec, trainer.params, dataset.train) < config.converged_loss:
            logger.info('converged after %d steps', index + 1)
            return trainer.params, index + 1
    logger.info('stopped after %d steps at loss %g', config.train_steps, autonet.loss(spec, trainer.params, dataset.train))
    return trainer.params, config.train_steps


def _arm_rows(record, arm, seed=None):
    return [row for row in record.steps if row['arm'] == arm and (seed is None or row['seed'] == seed)]


def _max_r(rows):
    values = [row['r'] for row in rows if math.isfinite(row['r'])]
    return max(values) if values else math.nan


def _violations(rows, limit=1.0):
    return sum(1 for row in rows if row['r'] > limit * (1 + VIOLATION_TOLERANCE))


def spike_schedule(config, multiplier):
    def lr_at(index):
        return config.lr * (multiplier if index >= config.spike_step else 1.0)
    return lr_at


def run_spike(config):
    """
    Train each arm on every architecture; at ``spike_step`` the base
    learning rate is multiplied by the spike multiplier and held there for
    ``spike_hold`` steps.
    """
    dataset = load_dataset(config)
    record = RunRecord()
    n_steps = config.spike_step + config.spike_hold
    runs = itertools.product(config.architectures, config.spike_multipliers, config.arms)
    for architecture, multiplier, arm in runs:
        label = '%s/%s@%g' % (architecture, arm, multiplier)
        lr_at = spike_schedule(config, multiplier)
        finals = []
        for seed in config.seeds:
            spec, params = build_network(config, dataset, seed, architecture)
            trainer = Trainer(spec, params, dataset, config, make_policy(arm, config), seed)
            train_arm(trainer, n_steps, record, label, seed, lr_at)
            finals.append(trainer.evaluate())
        record.add_summary(label, 'final_loss', [loss for loss, _acc in finals])
        record.add_summary(label, 'final_acc', [acc for _loss, acc in finals])
        record.add_summary(label, 'max_r', [_max_r(_arm_rows(record, label, seed)) for seed in config.seeds])
        if import_from_setting(settings.STEP_POLICIES, arm).clips:
            record.add_summary(
                label, 'violations', [_violations(_arm_rows(record, label, seed)) for seed in config.seeds],
            )
    return record


def sweep_direction(record, spec, params, dataset, config, direction, direction_id, seed, arm):
    """
    One step of length r·ρ_a along ``direction`` from ``params`` for every r
    in the grid. ``params`` itself is never modified, so each step starts
    from the same checkpoint. Returns the sweep rows added.
    """
    train, test = dataset.train, dataset.test
    report = rho_estimate(spec, params, train, direction, mode=config.rho_mode, cap=len(train))
    if math.isinf(report.rho_a):
        logger.warning('%s: logits do not move along this direction, skipped', direction_id)
        return []
    unit, _norm = unit_vector(direction)
    base_loss = autonet.loss(spec, params, train)
    base_acc = autonet.accuracy(spec, params, test)
    base_predictions = autonet.predict(spec, params, test.inputs)
    start = len(record.sweep)
    for r in config.r_grid:
        stepped = params + (r * report.rho_a) * unit
        try:
            post_loss = autonet.loss(spec, stepped, train)
            post_acc = autonet.accuracy(spec, stepped, test)
            predictions = autonet.predict(spec, stepped, test.inputs)
        except NumericOverflowError:
            post_loss, post_acc, predictions = math.inf, 0.0, np.full_like(base_predictions, -1)
        record.add_sweep(
            r, loss_ratio(post_loss, base_loss), retained_accuracy(post_acc, base_acc),
            flip_fraction(predictions, base_predictions), direction_id, seed, arm,
        )
    return record.sweep[start:]


def run_phase_sweep(config):
    dataset = load_dataset(config)
    record = RunRecord()
    for architecture in config.architectures:
        worst_inside, worst_outside = [], []
        for seed in config.seeds:
            spec, params = build_network(config, dataset, seed, architecture)
            params, _steps = train_to_convergence(spec, params, dataset, config, seed)
            _loss, grad = autonet.loss_and_grad(spec, params, dataset.train)
            rows = sweep_direction(record, spec, params, dataset, config, -grad, 'gradient', seed, architecture)
            inside = [row['retained_acc'] for row in rows if row['param'] < 1]
            outside = [row['loss_ratio'] for row in rows if row['param'] >= 10]
            worst_inside.append(min(inside) if inside else None)
            worst_outside.append(max(outside) if outside else None)
        record.add_summary(architecture, 'min_retained_acc_below_r1', worst_inside)
        record.add_summary(architecture, 'max_loss_ratio_above_r10', worst_outside)
    return record


def run_random_dirs(config):
    """
    Gradient and random Gaussian directions at checkpoints taken after each
    of ``phase_steps`` training steps.
    """
    dataset = load_dataset(config)
    record = RunRecord()
    gradient_transitions, random_transitions = OrderedDict(), OrderedDict()
    for seed in config.seeds:
        spec, params = build_network(config, dataset, seed)
        trainer = Trainer(spec, params, dataset, config, make_policy('plain', config, track_radius=False), seed)
        rng = np.random.default_rng([seed, 1])
        done = 0
        for phase in sorted(config.phase_steps):
            while done < phase:
                trainer.step(done)
                done += 1
            params = trainer.params
            _loss, grad = autonet.loss_and_grad(spec, params, dataset.train)
            directions = [('gradient', -grad)] + [
                ('random%02d' % k, rng.normal(size=grad.size)) for k in range(config.n_random_dirs)
            ]
            arm = 'phase%d' % phase
            for name, direction in directions:
                rows = sweep_direction(
                    record, spec, params, dataset, config, direction, '%s:%s' % (arm, name), seed, arm,
                )
                transition = transition_point(rows, config.transition_ratio)
                target = gradient_transitions if name == 'gradient' else random_transitions
                target.setdefault(arm, []).append(transition)
    for arm in gradient_transitions:
        record.add_summary(arm, 'transition_r_gradient', gradient_transitions[arm])
        record.add_summary(arm, 'transition_r_random', random_transitions.get(arm, []))
    return record


def tempered_loss(spec, params, batch, temperature):
    try:
        logits = autonet.forward(spec, params, batch.inputs)
    except NumericOverflowError:
        return math.inf
    log_probs = log_softmax(logits / temperature, axis=1)
    return float(-log_probs[np.arange(len(batch)), batch.labels].mean())


def run_temperature(config):
    """
    Collapse onsets τ*(T) along a fixed direction (the descent direction at
    T = 1) under the loss CE(z/T), in raw units and in units of ρ_a(T).
    """
    dataset = load_dataset(config)
    record = RunRecord()
    train, test = dataset.train, dataset.test
    raw_spread, normalized_spread = [], []
    onsets = OrderedDict((t, []) for t in config.t_grid)
    for seed in config.seeds:
        spec, params = build_network(config, dataset, seed)
        params, _steps = train_to_convergence(spec, params, dataset, config, seed)
        _loss, grad = autonet.loss_and_grad(spec, params, train)
        unit, _norm = unit_vector(-grad)
        samples, states = autonet.directional_samples(spec, params, train, unit)
        report = batch_radius(samples, states)
        bottleneck = samples[int(np.argmax(report.spreads))]
        base_predictions = autonet.predict(spec, params, test.inputs)
        base_acc = autonet.accuracy(spec, params, test)
        raw, normalized = [], []
        for temperature in config.t_grid:
            rho_t = temperature_radius(bottleneck, temperature)
            base = tempered_loss(spec, params, train, temperature)
            onset = None
            for tau in sorted(config.tau_grid):
                stepped = params + tau * unit
                ratio = loss_ratio(tempered_loss(spec, stepped, train, temperature), base)
                try:
                    predictions = autonet.predict(spec, stepped, test.inputs)
                    acc = autonet.accuracy(spec, stepped, test)
                except NumericOverflowError:
                    predictions, acc = np.full_like(base_predictions, -1), 0.0
                record.add_sweep(
                    tau, ratio, retained_accuracy(acc, base_acc), flip_fraction(predictions, base_predictions),
                    'T=%g' % temperature, seed, 'temperature',
                )
                if onset is None and ratio > config.collapse_threshold:
                    onset = tau
            if onset is None:
                logger.warning('seed %d T=%g: no collapse onset on the tau grid, censored', seed, temperature)
                continue
            onsets[temperature].append(onset)
            raw.append(math.log10(onset))
            normalized.append(math.log10(onset / rho_t))
        if len(raw) >= 2:
            raw_spread.append(float(np.std(raw)))
            normalized_spread.append(float(np.std(normalized)))
    for temperature, values in onsets.items():
        record.add_summary('T=%g' % temperature, 'onset_tau', values)
    record.add_summary('temperature', 'onset_std_raw', raw_spread)
    record.add_summary('temperature', 'onset_std_normalized', normalized_spread)
    return record


def run_target_r_train(config):
    """
    Training from scratch under the target-r controller for each r, next to
    fixed learning-rate baselines.
    """
    dataset = load_dataset(config)
    record = RunRecord()
    arms = [('target_r=%g' % r, 'target_r', {'r_target': r}, None) for r in config.r_targets]
    arms += [('fixed_lr=%g' % lr, 'fixed_lr', {}, lr) for lr in config.fixed_lrs]
    steps_per_epoch = int(math.ceil(len(dataset.train) / float(config.batch_size)))
    epoch_rows = []
    for label, policy_name, options, lr in arms:
        finals = []
        for seed in config.seeds:
            spec, params = build_network(config, dataset, seed)
            trainer = Trainer(spec, params, dataset, config, make_policy(policy_name, config, **options), seed, lr)
            train_arm(trainer, config.target_steps, record, label, seed)
            finals.append(trainer.evaluate()[1])
            rows = _arm_rows(record, label, seed)
            for start in range(0, len(rows), steps_per_epoch):
                epoch_rows.append((label, seed, start // steps_per_epoch, _max_r(rows[start:start + steps_per_epoch])))
        all_rows = _arm_rows(record, label)
        record.add_summary(label, 'final_acc', finals)
        record.add_summary(label, 'max_r', [_max_r(_arm_rows(record, label, seed)) for seed in config.seeds])
        record.add_summary(label, 'violations', [_violations(_arm_rows(record, label, seed)) for seed in config.seeds])
        if 'r_target' in options:
            exceedance = [row['r'] - options['r_target'] for row in all_rows if math.isfinite(row['r'])]
            record.add_summary(label, 'max_target_exceedance', [max(exceedance)] if exceedance else [])
    record.add_table('epochs', ('arm', 'seed', 'epoch', 'max_r'), epoch_rows)
    return record


def _require_sum(config):
    if len(config.logits) < 2:
        raise ConfigurationError('%s needs logits and slopes with at least two entries' % config.experiment)


def run_zeros(config):
    _require_sum(config)
    expsum = ExpSum.from_logits(config.logits, config.slopes)
    zero, modulus = nearest_zero(expsum)
    bound = math.pi / expsum.spread
    try:
        enclosed = count_zeros_in_disk(expsum, ZERO_COUNT_FACTOR * modulus)
    except ContourTooCloseError:
        enclosed = None
    record = RunRecord()
    record.add_table(
        'zeros', ('re', 'im', 'modulus', 'rho_a', 'ratio', 'zeros_in_disk'),
        [(zero.real, zero.imag, modulus, bound, modulus / bound, enclosed)],
    )
    return record


def run_radius(config):
    """
    With ``logits``/``slopes`` configured: the bounds for that one sample.
    Otherwise: batch radius along the descent direction of a converged
    network, in both JVP and finite-difference modes.
    """
    record = RunRecord()
    if config.logits:
        _require_sum(config)
        state, slopes = LogitState(config.logits, config.target), DirectionalSlopes(config.slopes)
        ghost, top2 = per_sample_ghost(state, slopes)
        exact = exact_radius(state, slopes) if config.exact else None
        record.add_table(
            'radius', ('rho_a', 'ghost_re', 'ghost_im', 'rho_top2', 'rho_exact'),
            [(lower_bound(slopes), ghost.real if ghost else None, ghost.imag if ghost else None, top2, exact)],
        )
        return record
    dataset = load_dataset(config)
    rows = []
    for seed in config.seeds:
        spec, params = build_network(config, dataset, seed)
        params, _steps = train_to_convergence(spec, params, dataset, config, seed)
        _loss, grad = autonet.loss_and_grad(spec, params, dataset.train)
        for mode in ('jvp', 'finite_diff'):
            report = rho_estimate(spec, params, dataset.train, -grad, mode=mode, exact=config.exact)
            rows.append((seed, mode, report.rho_a, report.delta_a_max, report.bottleneck_sample, report.rho_star))
    record.add_table('radius', ('seed', 'mode', 'rho_a', 'delta_a_max', 'bottleneck', 'rho_star'), rows)
    return record


def run_klcheck(config):
    report = kl_check(config.trials, config.seeds[0])
    record = RunRecord()
    record.add_table(
        'klcheck', ('trials', 'identity_failures', 'bound_violations', 'worst_identity_error', 'worst_slack'),
        [(report.trials, report.identity_failures, report.bound_violations,
          report.worst_identity_error, report.worst_slack)],
    )
    return record


def run_crossover(config):
    record = RunRecord()
    record.add_table('crossover', ('delta', 'curvature', 'tau_h', 'rho', 'ratio'),
                     crossover_sweep(config.slope_gap, config.delta_grid))
    record.add_table('crossover_margin', ('slope_gap', 'formula', 'numeric_rho_a', 'numeric_exact'), [(
        config.slope_gap, crossover_margin(config.slope_gap),
        crossover_margin_numeric(config.slope_gap, 'rho_a'), crossover_margin_numeric(config.slope_gap, 'exact'),
    )])
    return record


def build_direction(config, spec, params, dataset):
    kind, seed = parse_direction(config.direction)
    if kind == 'gradient':
        _loss, grad = autonet.loss_and_grad(spec, params, dataset.train)
        return -grad
    return np.random.default_rng(seed).normal(size=np.size(params))


def scan_layers(spec, params, batch, direction, config):
    """
    Per hidden layer: the smallest neuron radius, the kink quantile of
    |h|/|ḣ|, the layer's radius (the kink proxy for ReLU-type layers, the
    nearest pole otherwise) and ρ_net = min(ρ_out, ρ_layer) with its binding
    term. A closing ``network`` row combines every hidden layer.
    """
    rho_out = rho_estimate(spec, params, batch, direction, mode=config.rho_mode).rho_a
    rows = []
    for pair in autonet.hidden_preactivations_jvp(spec, params, batch.inputs, direction)[:-1]:
        min_radius = layer_radius(pair.h, pair.hdot, pair.kind)
        kink = ffn_kink_quantile(pair.h, pair.hdot, config.kink_quantile)
        rho_layer = kink if singular_set(pair.kind).variant == 'real_breakpoints' else min_radius
        rho_net, tag = network_radius(rho_out, rho_layer)
        rows.append((pair.layer, str(pair.kind), min_radius, kink, rho_layer, rho_out, rho_net, tag))
    rho_ffn = ffn_radius(spec, params, batch.inputs, direction, config.kink_quantile)
    rho_net, tag = network_radius(rho_out, rho_ffn)
    min_radius = min([row[2] for row in rows], default=math.inf)
    rows.append(('network', None, min_radius, None, rho_ffn, rho_out, rho_net, tag))
    return rows


def run_actscan(config):
    """
    Radius bottlenecks of a network along ``direction``: the network in
    ``checkpoint`` when one is given, otherwise one trained per seed (and
    kept in the record so it is written out as a checkpoint). The
    activation families' neuron radii at unit speed come alongside.
    """
    dataset = load_dataset(config)
    record = RunRecord()
    networks = []
    if config.checkpoint:
        spec, params = autonet.load_checkpoint(config.checkpoint)
        if (spec.input_dim, spec.n_classes) != (dataset.input_dim, dataset.n_classes):
            raise ConfigurationError('checkpoint maps %d inputs to %d classes, the dataset has %d and %d' % (
                spec.input_dim, spec.n_classes, dataset.input_dim, dataset.n_classes,
            ))
        networks.append((spec.seed, spec, params))
    else:
        for seed in config.seeds:
            spec, params = build_network(config, dataset, seed)
            params, _steps = train_to_convergence(spec, params, dataset, config, seed)
            record.add_checkpoint('seed%d' % seed, spec, params)
            networks.append((seed, spec, params))
    batch = cap_batch(dataset.train)
    rows = []
    for seed, spec, params in networks:
        direction = build_direction(config, spec, params, dataset)
        rows.extend((seed,) + row for row in scan_layers(spec, params, batch, direction, config))
    record.add_table('actscan', (
        'seed', 'layer', 'activation', 'min_neuron_radius', 'kink_quantile', 'rho_layer', 'rho_out', 'rho_net',
        'bottleneck',
    ), rows)
    families = []
    for kind in config.activations:
        variant = singular_set(kind).variant
        for h in ACTSCAN_OFFSETS:
            families.append((kind, variant, h, 1.0, neuron_radius(h, 1.0, kind)))
    record.add_table('activation_radii', ('activation', 'singular_set', 'h', 'hdot', 'radius'), families)
    return record


RUNNERS = {
    'spike': run_spike,
    'phase_sweep': run_phase_sweep,
    'random_dirs': run_random_dirs,
    'temperature': run_temperature,
    'target_r_train': run_target_r_train,
    'zeros': run_zeros,
    'radius': run_radius,
    'klcheck': run_klcheck,
    'crossover': run_crossover,
    'actscan': run_actscan,
}
TRAINING_EXPERIMENTS = ('spike', 'phase_sweep', 'random_dirs', 'temperature', 'target_r_train')


def run_experiment(config):
    logger.info('running %s with seeds %s', config.experiment, ', '.join(str(s) for s in config.seeds))
    return RUNNERS[config.experiment](config)
