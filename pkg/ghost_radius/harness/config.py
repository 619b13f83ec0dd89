# -*- coding: utf-8 -*-
"""
Experiment configuration: a flat ``key=value`` file, one entry per line.
Blank lines and ``#`` comments are ignored, comma-separated values become
lists, unknown keys are rejected.
"""
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

import numpy as np

from .. import settings
from ..exceptions import ConfigurationError


EXPERIMENTS = (
    'spike', 'phase_sweep', 'random_dirs', 'temperature', 'target_r_train',
    'zeros', 'radius', 'klcheck', 'crossover', 'actscan',
)
OPTIMIZERS = ('sgd', 'adam')
FORMATS = ('csv', 'jsonl')

LIST_ITEM_TYPES = {
    'seeds': int,
    'architectures': str,
    'arms': str,
    'spike_multipliers': float,
    'r_grid': float,
    't_grid': float,
    'tau_grid': float,
    'phase_steps': int,
    'r_targets': float,
    'fixed_lrs': float,
    'logits': float,
    'slopes': float,
    'delta_grid': float,
    'activations': str,
}
TRUE_VALUES = ('1', 'true', 'yes', 'on')
FALSE_VALUES = ('0', 'false', 'no', 'off')


def _grid(low, high, count):
    return tuple(float(x) for x in np.logspace(low, high, count))


@dataclass
class ExperimentConfig:
    experiment: str = 'spike'
    seeds: Tuple[int, ...] = field(default_factory=lambda: tuple(settings.DEFAULT_SEEDS))
    out_dir: str = 'ghost-out'
    format: str = 'csv'
    verbosity: int = 1

    # network and data
    architecture: str = 'mlp_tanh'
    architectures: Tuple[str, ...] = field(default_factory=lambda: tuple(settings.PHASE_SWEEP_ARCHITECTURES))
    dataset: str = 'blobs'
    n_classes: int = 10
    dim: int = 16
    per_class: int = 50
    blob_spread: float = 1.0
    csv_path: Optional[str] = None
    label_column: str = 'label'
    split: float = 0.8
    data_seed: int = 0

    # optimisation
    optimizer: str = 'sgd'
    lr: float = 0.05
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    rho_every: int = field(default_factory=lambda: settings.RHO_EVERY)
    rho_mode: str = 'jvp'
    clip_threshold: float = field(default_factory=lambda: settings.GRAD_CLIP_THRESHOLD)
    converged_loss: float = field(default_factory=lambda: settings.CONVERGED_LOSS)
    train_steps: int = field(default_factory=lambda: settings.CONVERGED_MAX_STEPS)

    # spike
    arms: Tuple[str, ...] = ('plain', 'grad_clip', 'rho_controller')
    spike_step: int = field(default_factory=lambda: settings.SPIKE_STEP)
    spike_hold: int = field(default_factory=lambda: settings.SPIKE_HOLD)
    spike_multipliers: Tuple[float, ...] = (10.0, 100.0, 1000.0, 10000.0)

    # sweeps
    r_grid: Tuple[float, ...] = field(default_factory=lambda: _grid(-2, 2, 17))
    n_random_dirs: int = 20
    phase_steps: Tuple[int, ...] = (20, 100, 500)
    transition_ratio: float = 1.5
    t_grid: Tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0)
    tau_grid: Tuple[float, ...] = field(default_factory=lambda: _grid(-3, 3, 49))
    collapse_threshold: float = field(default_factory=lambda: settings.COLLAPSE_THRESHOLD)

    # target-r training
    r_targets: Tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    fixed_lrs: Tuple[float, ...] = (0.01, 0.1, 1.0)
    target_steps: int = 500

    # analysis subcommands
    logits: Tuple[float, ...] = ()
    slopes: Tuple[float, ...] = ()
    exact: bool = False
    target: int = 0
    slope_gap: float = 1.0
    delta_grid: Tuple[float, ...] = tuple(float(d) for d in range(0, 21))
    trials: int = 10000
    activations: Tuple[str, ...] = ('relu', 'tanh', 'sigmoid', 'softplus', 'silu', 'gelu_exact', 'ria:1')

    # actscan
    checkpoint: Optional[str] = None
    direction: str = 'gradient'
    kink_quantile: float = field(default_factory=lambda: settings.KINK_QUANTILE)

    def clean(self):
        """
        Validate the configuration; returns it for chaining.
        """
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError('unknown experiment %r' % self.experiment)
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError('unknown optimizer %r' % self.optimizer)
        if self.format not in FORMATS:
            raise ConfigurationError('unknown format %r' % self.format)
        if self.dataset not in ('blobs', 'csv'):
            raise ConfigurationError('unknown dataset source %r' % self.dataset)
        if self.dataset == 'csv' and not self.csv_path:
            raise ConfigurationError('csv dataset needs csv_path')
        if self.rho_mode not in ('jvp', 'finite_diff'):
            raise ConfigurationError('rho_mode must be jvp or finite_diff')
        for name in ('seeds', 'arms', 'r_grid', 't_grid', 'tau_grid', 'spike_multipliers', 'r_targets'):
            if not getattr(self, name):
                raise ConfigurationError('%s must not be empty' % name)
        for name in ('spike_multipliers', 'r_grid', 't_grid', 'tau_grid', 'r_targets', 'fixed_lrs'):
            if any(value <= 0 for value in getattr(self, name)):
                raise ConfigurationError('%s must be positive' % name)
        if self.n_classes < 2:
            raise ConfigurationError('at least two classes are needed')
        if not 0 < self.split < 1:
            raise ConfigurationError('split must lie in (0, 1)')
        if self.lr <= 0 or self.batch_size < 1 or self.rho_every < 1:
            raise ConfigurationError('lr, batch_size and rho_every must be positive')
        if len(self.logits) != len(self.slopes):
            raise ConfigurationError('logits and slopes must have equal length')
        if not 0 < self.kink_quantile < 1:
            raise ConfigurationError('kink_quantile must lie in (0, 1)')
        parse_direction(self.direction)
        return self

    @classmethod
    def from_mapping(cls, mapping, base=None):
        known = {f.name: f for f in fields(cls)}
        base = base or cls()
        values = {}
        for key, raw in mapping.items():
            name = key.strip().replace('-', '_').lower()
            if name not in known:
                raise ConfigurationError('unknown config key %r' % key)
            values[name] = _convert(name, getattr(base, name), raw)
        return replace(base, **values)


def parse_direction(text):
    """
    ``'gradient'`` (steepest descent) or ``'random:<seed>'`` (a seeded
    Gaussian direction) -> (kind, seed).
    """
    kind, _, seed = str(text).partition(':')
    if kind == 'gradient' and not seed:
        return kind, None
    if kind == 'random':
        try:
            return kind, int(seed)
        except ValueError:
            pass
    raise ConfigurationError("direction must be 'gradient' or 'random:<seed>', got %r" % text)


def _convert(name, current, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if name in LIST_ITEM_TYPES:
            item = LIST_ITEM_TYPES[name]
            return tuple(item(part.strip()) for part in raw.split(',') if part.strip())
        if isinstance(current, bool):
            lowered = raw.lower()
            if lowered not in TRUE_VALUES + FALSE_VALUES:
                raise ValueError(raw)
            return lowered in TRUE_VALUES
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
    except ValueError:
        raise ConfigurationError('invalid value %r for %s' % (raw, name))
    return raw or None


def parse_config_text(text):
    mapping = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigurationError('line %d: expected key=value, got %r' % (number, line))
        key, value = line.split('=', 1)
        mapping[key.strip()] = value.strip()
    return mapping


def load_config(path=None, overrides=None):
    mapping = {}
    if path:
        with open(path) as handle:
            mapping.update(parse_config_text(handle.read()))
    mapping.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.from_mapping(mapping).clean()
