# -*- coding: utf-8 -*-
"""
KL divergence along the softmax path p(τ) = softmax(z + τa).

KL(p(τ) ‖ p(0)) is the Bregman gap of the log-partition K(τ), its
quadratic part is ½τ²·Var_{p(0)}(a) and the cubic remainder is bounded by
|τ|³Δ_a³/(18√3).
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, logsumexp, softmax

from .exceptions import InvalidParameterError
from .utils import INF


logger = logging.getLogger(__name__)

REMAINDER_CONSTANT = 1.0 / (18.0 * math.sqrt(3.0))
WITNESS_P = (3.0 - math.sqrt(3.0)) / 6.0


@dataclass
class SoftmaxPath:
    z: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        if self.z.ndim != 1 or self.z.shape != self.a.shape or self.z.size < 2:
            raise InvalidParameterError('logits and slopes must be vectors of equal length, at least two')

    @property
    def spread(self):
        return float(self.a.max() - self.a.min())

    def probabilities(self, tau=0.0):
        return softmax(self.z + tau * self.a)


def kl_exact(path, tau):
    log_p = log_softmax(path.z + tau * path.a)
    log_p0 = log_softmax(path.z)
    value = math.fsum(np.exp(log_p) * (log_p - log_p0))
    # Rounding can leave a value of order -1e-17 near τ = 0.
    return max(value, 0.0)


def kl_bregman(path, tau):
    """
    K(τ) − K(0) − τ·K'(0) with K(τ) = log Σ e^{z_i + τ a_i} and
    K'(0) = E_{p(0)}[a].
    """
    mean = math.fsum(path.probabilities() * path.a)
    return float(logsumexp(path.z + tau * path.a) - logsumexp(path.z) - tau * mean)


def kl_variance(path):
    p0 = path.probabilities()
    mean = math.fsum(p0 * path.a)
    return math.fsum(p0 * (path.a - mean) ** 2)


def kl_quadratic(path, tau):
    return 0.5 * tau * tau * kl_variance(path)


def remainder_bound(tau, delta_a):
    return abs(tau) ** 3 * abs(delta_a) ** 3 * REMAINDER_CONSTANT


def two_point_third_moment(delta, p):
    return delta ** 3 * p * (1 - p) * (1 - 2 * p)


def third_moment_witness(delta):
    """
    The two-point law on {0, Δ} with P(Δ) = p* = (3 − √3)/6 maximises the
    third central moment, at Δ³/(6√3).
    """
    if not delta > 0:
        raise InvalidParameterError('delta must be positive')
    return WITNESS_P, two_point_third_moment(delta, WITNESS_P)


def quadratic_crossover(path):
    # |τ| where the cubic remainder bound overtakes ½τ²·Var.
    spread = path.spread
    if spread == 0:
        return INF
    return kl_variance(path) / (2.0 * REMAINDER_CONSTANT * spread ** 3)


def random_path(rng, max_classes=10):
    n = int(rng.integers(2, max_classes + 1))
    return SoftmaxPath(rng.normal(0.0, 3.0, size=n), rng.uniform(-5.0, 5.0, size=n))


@dataclass
class KLCheckReport:
    trials: int
    identity_failures: int
    bound_violations: int
    worst_identity_error: float
    worst_slack: float


def kl_check(trials=10000, seed=0, identity_tol=1e-12, max_step=2.0):
    """
    Random trials of the Bregman identity and the remainder bound, with
    |τ|·Δ_a drawn uniformly in [−max_step, max_step]. The slack is
    remainder_bound − |kl_exact − kl_quadratic|; negative means a violation.
    """
    rng = np.random.default_rng(seed)
    report = KLCheckReport(trials, 0, 0, 0.0, INF)
    for _ in range(trials):
        path = random_path(rng)
        spread = path.spread
        tau = rng.uniform(-max_step, max_step) / spread if spread > 0 else 0.0
        exact = kl_exact(path, tau)
        error = abs(exact - kl_bregman(path, tau))
        report.worst_identity_error = max(report.worst_identity_error, error)
        if error > identity_tol * max(1.0, exact):
            report.identity_failures += 1
        slack = remainder_bound(tau, spread) - abs(exact - kl_quadratic(path, tau))
        report.worst_slack = min(report.worst_slack, slack)
        if slack < 0:
            report.bound_violations += 1
    if report.identity_failures or report.bound_violations:
        logger.warning(
            'klcheck: %d identity failures, %d bound violations in %d trials',
            report.identity_failures, report.bound_violations, trials,
        )
    return report
