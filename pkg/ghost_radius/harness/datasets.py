# -*- coding: utf-8 -*-
import csv
import logging
from dataclasses import dataclass

import numpy as np

from ..autonet import Batch
from ..exceptions import DatasetError


logger = logging.getLogger(__name__)


@dataclass
class Dataset:
    train: Batch
    test: Batch
    n_classes: int
    source: str

    @property
    def input_dim(self):
        return self.train.inputs.shape[1]


def synthetic_blobs(n_classes=10, dim=16, per_class=50, spread=1.0, seed=0):
    """
    Isotropic Gaussian clusters around standard-normal centres, ``per_class``
    points each, labels in class order.
    """
    if n_classes < 2:
        raise DatasetError('at least two classes are needed')
    rng = np.random.default_rng(seed)
    centres = rng.normal(0.0, 1.0, size=(n_classes, dim))
    labels = np.repeat(np.arange(n_classes), per_class)
    inputs = centres[labels] + spread * rng.normal(size=(labels.size, dim))
    return inputs, labels


def load_csv(path, label_column='label', n_classes=None):
    with open(path, newline='') as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError('empty file', line=1)
        header = [name.strip() for name in header]
        if label_column not in header:
            raise DatasetError('no label column %r in header' % label_column, line=1)
        label_index = header.index(label_column)
        inputs, labels = [], []
        for row in reader:
            line = reader.line_num
            if not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DatasetError('expected %d fields, got %d' % (len(header), len(row)), line=line)
            try:
                values = [float(cell) for cell in row]
            except ValueError as error:
                raise DatasetError('malformed value (%s)' % error, line=line)
            label = values.pop(label_index)
            if not label.is_integer():
                raise DatasetError('label %r is not a class index' % label, line=line)
            if n_classes is not None and not 0 <= label < n_classes:
                raise DatasetError('label %d out of range for %d classes' % (label, n_classes), line=line)
            inputs.append(values)
            labels.append(int(label))
    if not labels:
        raise DatasetError('no data rows')
    return np.array(inputs), np.array(labels), [name for i, name in enumerate(header) if i != label_index]


def split_and_standardize(inputs, labels, split=0.8, seed=0):
    """
    Seeded shuffle, train/test split, then features standardised with the
    train mean and standard deviation (constant features are left centred).
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(labels.size)
    n_train = int(round(split * labels.size))
    if not 0 < n_train < labels.size:
        raise DatasetError('split %r leaves an empty train or test set' % split)
    train_ids, test_ids = order[:n_train], order[n_train:]
    mean = inputs[train_ids].mean(axis=0)
    std = inputs[train_ids].std(axis=0)
    std[std == 0] = 1.0
    scaled = (inputs - mean) / std
    return (
        Batch(scaled[train_ids], labels[train_ids], train_ids),
        Batch(scaled[test_ids], labels[test_ids], test_ids),
    )


def load_dataset(config):
    if config.dataset == 'csv':
        inputs, labels, _names = load_csv(config.csv_path, config.label_column, config.n_classes)
        source = 'csv:%s' % config.csv_path
    else:
        inputs, labels = synthetic_blobs(
            config.n_classes, config.dim, config.per_class, config.blob_spread, config.data_seed,
        )
        source = 'blobs'
    train, test = split_and_standardize(inputs, labels, config.split, config.data_seed)
    logger.info('dataset %s: %d train, %d test, %d classes', source, len(train), len(test), config.n_classes)
    return Dataset(train, test, config.n_classes, source)


def write_snapshot(dataset, path):
    """
    The standardised dataset as CSV (split, id, label, features...), with
    floats written by repr so equal datasets give equal bytes.
    """
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['split', 'id', 'label'] + ['x%d' % i for i in range(dataset.input_dim)])
        for name, batch in (('train', dataset.train), ('test', dataset.test)):
            for row_id, label, features in zip(batch.ids, batch.labels, batch.inputs):
                writer.writerow([name, int(row_id), int(label)] + [repr(float(x)) for x in features])
