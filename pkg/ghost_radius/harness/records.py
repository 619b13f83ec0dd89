# -*- coding: utf-8 -*-
"""
Run records and their on-disk form.

Column schemas (stable):

* ``steps``: step, loss, test_acc, tau, rho_a, r, lr_effective, arm, seed,
  divergent
* ``sweep``: param, loss_ratio, retained_acc, flip_fraction, direction_id,
  seed, arm
* ``decisions``: step, tau_before, rho_a, scale, r_after, mode, eta, arm, seed
  (``eta`` is empty unless the target-r controller chose the step)
* ``summary``: arm, metric, median, q25, q75, n

A divergent step is written with a literal ``inf`` loss and
``divergent=true``. Analysis subcommands add free-form tables, written as
``<name>.csv`` next to the standard files; networks trained along the way
are saved as ``checkpoint_<name>.npz``.
"""
import csv
import json
import logging
import math
import os
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .. import settings
from ..autonet import save_checkpoint
from ..exceptions import GhostRadiusError
from ..utils import median_iqr


logger = logging.getLogger(__name__)

SCHEMAS = OrderedDict([
    ('steps', ('step', 'loss', 'test_acc', 'tau', 'rho_a', 'r', 'lr_effective', 'arm', 'seed', 'divergent')),
    ('sweep', ('param', 'loss_ratio', 'retained_acc', 'flip_fraction', 'direction_id', 'seed', 'arm')),
    ('decisions', ('step', 'tau_before', 'rho_a', 'scale', 'r_after', 'mode', 'eta', 'arm', 'seed')),
    ('summary', ('arm', 'metric', 'median', 'q25', 'q75', 'n')),
])
COLUMN_TYPES = {
    'step': int, 'seed': int, 'n': int,
    'arm': str, 'direction_id': str, 'mode': str, 'metric': str,
    'divergent': bool,
}


@dataclass
class RunRecord:
    steps: list = field(default_factory=list)
    sweep: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    tables: dict = field(default_factory=OrderedDict)
    checkpoints: dict = field(default_factory=OrderedDict)

    def add_step(self, step, loss, test_acc, tau, rho_a, r, lr_effective, arm, seed):
        previous = self._last_step(arm, seed)
        if previous is not None and step <= previous:
            raise GhostRadiusError('step %d does not follow step %d for arm %s seed %s' % (step, previous, arm, seed))
        divergent = not math.isfinite(loss) or loss > settings.DIVERGENCE_LOSS
        if not math.isfinite(loss):
            loss = math.inf
        row = OrderedDict(zip(SCHEMAS['steps'], (
            int(step), float(loss), float(test_acc), float(tau), float(rho_a), float(r), float(lr_effective),
            arm, int(seed), divergent,
        )))
        self.steps.append(row)
        return row

    def _last_step(self, arm, seed):
        for row in reversed(self.steps):
            if row['arm'] == arm and row['seed'] == seed:
                return row['step']
        return None

    def add_sweep(self, param, loss_ratio, retained_acc, flip_fraction, direction_id, seed, arm):
        self.sweep.append(OrderedDict(zip(SCHEMAS['sweep'], (
            float(param), float(loss_ratio), float(retained_acc), float(flip_fraction), direction_id, int(seed), arm,
        ))))

    def add_decision(self, step, decision, arm, seed):
        eta = None if decision.eta is None else float(decision.eta)
        self.decisions.append(OrderedDict(zip(SCHEMAS['decisions'], (
            int(step), float(decision.tau_before), float(decision.rho_a), float(decision.scale),
            float(decision.r_after), decision.mode, eta, arm, int(seed),
        ))))

    def add_summary(self, arm, metric, values):
        values = [v for v in values if v is not None]
        median, q25, q75 = median_iqr(values)
        self.summary.append(OrderedDict(zip(SCHEMAS['summary'], (arm, metric, median, q25, q75, len(values)))))

    def add_table(self, name, columns, rows):
        self.tables[name] = (tuple(columns), [tuple(_plain(value) for value in row) for row in rows])

    def add_checkpoint(self, name, spec, params):
        self.checkpoints[name] = (spec, np.array(params, dtype=float))

    @property
    def diverged(self):
        return any(row['divergent'] for row in self.steps)


def loss_ratio(loss_after, loss_before):
    if loss_before == 0:
        return math.inf if loss_after > 0 else 1.0
    return loss_after / loss_before


def retained_accuracy(acc_after, acc_before):
    if acc_before == 0:
        return math.nan
    return acc_after / acc_before


def flip_fraction(predictions_after, predictions_before):
    return float(np.mean(np.asarray(predictions_after) != np.asarray(predictions_before)))


def transition_point(rows, threshold):
    """
    First sweep parameter whose loss ratio exceeds ``threshold``; inf when
    none does.
    """
    for row in sorted(rows, key=lambda row: row['param']):
        if row['loss_ratio'] > threshold:
            return row['param']
    return math.inf


def _plain(value):
    return value.item() if isinstance(value, np.generic) else value


def _format(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _parse(column, text):
    kind = COLUMN_TYPES.get(column, float)
    if text == '' and kind is not bool:
        return None
    if kind is bool:
        return text == 'true'
    if kind is str:
        return text or None
    return kind(text)


def _write_csv(path, columns, rows):
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            values = row.values() if isinstance(row, dict) else row
            writer.writerow([_format(value) for value in values])


def _write_jsonl(path, columns, rows):
    with open(path, 'w') as handle:
        for row in rows:
            values = list(row.values()) if isinstance(row, dict) else list(row)
            handle.write(json.dumps(OrderedDict(zip(columns, values))) + '\n')


def emit(record, out_dir, format='csv'):
    """
    Write every file of ``record`` to ``out_dir`` and return their paths.
    Empty record sections still produce a header-only file.
    """
    if format not in ('csv', 'jsonl'):
        raise GhostRadiusError('unknown format %r' % format)
    os.makedirs(out_dir, exist_ok=True)
    writer = _write_csv if format == 'csv' else _write_jsonl
    paths = []
    for name, columns in SCHEMAS.items():
        path = os.path.join(out_dir, '%s.%s' % (name, format))
        writer(path, columns, getattr(record, name))
        paths.append(path)
    for name, (columns, rows) in record.tables.items():
        path = os.path.join(out_dir, '%s.%s' % (name, format))
        writer(path, columns, rows)
        paths.append(path)
    for name, (spec, params) in record.checkpoints.items():
        path = os.path.join(out_dir, 'checkpoint_%s.npz' % name)
        save_checkpoint(path, spec, params)
        paths.append(path)
    logger.info('wrote %d files to %s', len(paths), out_dir)
    return paths


def parse(out_dir, format='csv'):
    record = RunRecord()
    for name, columns in SCHEMAS.items():
        path = os.path.join(out_dir, '%s.%s' % (name, format))
        rows = getattr(record, name)
        with open(path, newline='') as handle:
            if format == 'csv':
                reader = csv.reader(handle)
                header = tuple(next(reader))
                if header != columns:
                    raise GhostRadiusError('%s: unexpected columns %r' % (path, header))
                for values in reader:
                    rows.append(OrderedDict((c, _parse(c, v)) for c, v in zip(columns, values)))
            else:
                for line in handle:
                    if line.strip():
                        data = json.loads(line)
                        rows.append(OrderedDict((c, data[c]) for c in columns))
    return record
