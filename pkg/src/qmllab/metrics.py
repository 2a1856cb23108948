"""Classical information measures and sample-size calculators.

Entropic quantities are in bits. ``l1`` means ``sum |p - q|``; total variation
is half of that.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.stats import beta

from .errors import InvalidDistribution, InvalidParameter

NORMALIZATION_TOL = 1e-9


def _as_distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or (p < 0).any() or abs(p.sum() - 1) > NORMALIZATION_TOL:
        raise InvalidDistribution("not a normalized probability vector")
    return p


def _pair(p, q):
    p, q = _as_distribution(p), _as_distribution(q)
    if p.shape != q.shape:
        raise InvalidDistribution(f"length mismatch: {p.size} vs {q.size}")
    return p, q


def kl_divergence(p, q) -> float:
    """``D(p||q)`` in bits; ``inf`` when ``p`` is not absolutely continuous w.r.t. ``q``."""
    p, q = _pair(p, q)
    s = p > 0
    if (q[s] == 0).any():
        return math.inf
    return max(0.0, float(np.sum(p[s] * np.log2(p[s] / q[s]))))


def total_variation(p, q) -> float:
    p, q = _pair(p, q)
    return 0.5 * float(np.abs(p - q).sum())


class PinskerCheck(NamedTuple):
    tv: float
    bound: float
    holds: bool


def pinsker_check(p, q) -> PinskerCheck:
    """Compare TV against ``sqrt(D_nats / 2)``; ``D`` is converted from bits."""
    tv = total_variation(p, q)
    kl = kl_divergence(p, q)
    bound = math.sqrt(0.5 * kl * math.log(2)) if math.isfinite(kl) else math.inf
    return PinskerCheck(tv, bound, tv <= bound + 1e-12)


def hoeffding_T(M: float, epsilon: float, family_size: int, delta_bits: float) -> int:
    """``ceil((M/eps)**2 * (log2|X| + delta_bits))`` samples for uniform ``eps``-concentration."""
    if M <= 0 or epsilon <= 0 or family_size < 1 or delta_bits < 0:
        raise InvalidParameter("need M, epsilon > 0, family_size >= 1, delta_bits >= 0")
    return math.ceil((M / epsilon) ** 2 * (math.log2(family_size) + delta_bits))


def empirical_tv(samples_a, samples_b, alphabet_size: int) -> float:
    a = np.asarray(samples_a, dtype=np.int64)
    b = np.asarray(samples_b, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        raise InvalidParameter("empirical_tv needs nonempty sample lists")
    ha = np.bincount(a, minlength=alphabet_size) / a.size
    hb = np.bincount(b, minlength=alphabet_size) / b.size
    return 0.5 * float(np.abs(ha - hb).sum())


def tv_to_distribution(samples, p) -> float:
    """TV between the empirical histogram of ``samples`` and a known law ``p``."""
    p = np.asarray(p, dtype=float)
    s = np.asarray(samples, dtype=np.int64)
    h = np.bincount(s, minlength=p.size) / s.size
    return 0.5 * float(np.abs(h - p).sum())


def clopper_pearson(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval."""
    if trials <= 0:
        return 0.0, 1.0
    a = 1 - confidence
    lo = 0.0 if successes == 0 else float(beta.ppf(a / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(beta.ppf(1 - a / 2, successes + 1, trials - successes))
    return lo, hi


def binomial_slack(p: float, trials: int, sigmas: float = 3.0) -> float:
    """``sigmas * sqrt(p / trials)``, a slightly generous binomial deviation allowance."""
    return sigmas * math.sqrt(max(p, 0.0) / trials)
