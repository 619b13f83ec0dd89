# -*- coding: utf-8 -*-
import math
from pkgutil import resolve_name

import numpy as np

from .exceptions import ConfigurationError, ZeroDirectionError


INF = math.inf


def import_from_setting(registry, key):
    """
    Resolve ``registry[key]`` (a dotted path, as stored in settings) into
    the object it names.
    """
    try:
        dotted_path = registry[key]
    except KeyError:
        raise ConfigurationError(
            'unknown name %r, choose one of: %s' % (key, ', '.join(sorted(registry)))
        )
    if not isinstance(dotted_path, str):
        return dotted_path
    return resolve_name(dotted_path)


def unit_vector(vector):
    vector = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(vector)
    if norm == 0.0 or not np.isfinite(norm):
        raise ZeroDirectionError('zero direction')
    return vector / norm, norm


def extended_quantile(values, q):
    """
    Linear-interpolation quantile over extended reals; +inf entries sort
    last and only reach the result when the interpolation touches them.
    """
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        raise ValueError('empty population')
    position = q * (ordered.size - 1)
    lower = int(math.floor(position))
    upper = min(lower + 1, ordered.size - 1)
    fraction = position - lower
    low_value, high_value = ordered[lower], ordered[upper]
    if fraction == 0.0 or low_value == high_value:
        return float(low_value)
    if math.isinf(high_value):
        return INF
    return float(low_value + (high_value - low_value) * fraction)


def min_with_tag(candidates):
    # Ties resolve to the earliest candidate; min(x, inf) = x.
    best_value, best_tag = INF, None
    for tag, value in candidates:
        if best_tag is None or value < best_value:
            best_value, best_tag = value, tag
    return best_value, best_tag


def median_iqr(values):
    values = np.asarray([v for v in values if v is not None], dtype=float)
    if values.size == 0:
        return math.nan, math.nan, math.nan
    q25, median, q75 = np.percentile(values, [25, 50, 75])
    return float(median), float(q25), float(q75)
