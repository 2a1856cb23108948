"""Posterior sampling for the quantum maximum-likelihood problem.

Given a batch ``Z`` and a keyed channel, the post-selected process draws a key
``h`` with probability ``w(h)**r / sum_x w(x)**r`` where ``w(x) = prod_i p(Z_i|x)``
and ``r`` is the number of post-selected repetitions. Classically it is
simulated bit by bit: bit ``i`` is set to ``b`` with probability
``marginal(prefix||b) / marginal(prefix)``, using exact prefix marginals.
"""
from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidParameter, NoSupport, TooLarge
from .oracle import ClassicalChannel, ObservationBatch
from .qcore import index_to_key

MAX_BRUTEFORCE_BITS = 20


def _log_weights(channel: ClassicalChannel, batch: ObservationBatch, repetitions: int) -> np.ndarray:
    if repetitions < 1:
        raise InvalidParameter("repetitions must be a positive integer")
    ll = channel.log_likelihoods(batch)
    if not np.isfinite(ll.max()):
        raise NoSupport("no key assigns nonzero likelihood to the batch")
    return repetitions * ll


def _prefix_tree(log_w: np.ndarray, key_bits: int) -> list[np.ndarray]:
    """``tree[i][p]`` is the log of the summed weight of keys with ``i``-bit prefix ``p``."""
    tree = [log_w]
    level = log_w
    for _ in range(key_bits):
        level = np.logaddexp(level[0::2], level[1::2])
        tree.append(level)
    return tree[::-1]


def _zero_branch_probability(tree, depth: int, prefixes: np.ndarray) -> np.ndarray:
    child = tree[depth + 1]
    l0 = child[2 * prefixes]
    l1 = child[2 * prefixes + 1]
    with np.errstate(invalid="ignore"):
        p0 = np.exp(l0 - np.logaddexp(l0, l1))
    p0 = np.where(l1 == -np.inf, 1.0, np.where(l0 == -np.inf, 0.0, p0))
    return np.clip(p0, 0.0, 1.0)


def qmlh_sample_index(channel: ClassicalChannel, batch: ObservationBatch,
                      rng: np.random.Generator, repetitions: int = 1) -> int:
    tree = _prefix_tree(_log_weights(channel, batch, repetitions), channel.key_bits)
    prefix = np.zeros(1, dtype=np.int64)
    for depth in range(channel.key_bits):
        p0 = _zero_branch_probability(tree, depth, prefix)[0]
        bit = 0 if rng.random() < p0 else 1
        prefix = 2 * prefix + bit
    return int(prefix[0])


def qmlh_sample(channel: ClassicalChannel, batch: ObservationBatch,
                rng: np.random.Generator, repetitions: int = 1) -> str:
    """Draw a hypothesis key from the post-selected posterior.

    Parameters
    ----------
    channel : ClassicalChannel
        Exact probability source for every ``p(z|x)``.
    batch : ObservationBatch
        The observed outcomes; must be nonempty.
    rng : numpy.random.Generator
        Consumed once per key bit.
    repetitions : int
        Number of post-selected copies of the batch; the posterior weight of
        ``h`` is raised to this power.

    Returns
    -------
    str
        The sampled key as a bitstring.

    Raises
    ------
    NoSupport
        If every key has zero likelihood.
    """
    if batch.T == 0:
        raise InvalidParameter("batch must be nonempty")
    return index_to_key(qmlh_sample_index(channel, batch, rng, repetitions), channel.key_bits)


def qmlh_sample_many(channel: ClassicalChannel, batch: ObservationBatch,
                     rng: np.random.Generator, size: int, repetitions: int = 1) -> np.ndarray:
    """Vectorized form of :func:`qmlh_sample` returning ``size`` key indices."""
    tree = _prefix_tree(_log_weights(channel, batch, repetitions), channel.key_bits)
    prefix = np.zeros(size, dtype=np.int64)
    u = rng.random((channel.key_bits, size))
    for depth in range(channel.key_bits):
        p0 = _zero_branch_probability(tree, depth, prefix)
        prefix = 2 * prefix + (u[depth] >= p0)
    return prefix


def sampler_distribution(channel: ClassicalChannel, batch: ObservationBatch,
                         repetitions: int = 1) -> np.ndarray:
    """Exact output law of the bitwise sampler: product of its conditional ratios."""
    tree = _prefix_tree(_log_weights(channel, batch, repetitions), channel.key_bits)
    probs = np.ones(1)
    for depth in range(channel.key_bits):
        prefixes = np.arange(probs.size)
        p0 = _zero_branch_probability(tree, depth, prefixes)
        probs = np.stack([probs * p0, probs * (1 - p0)], axis=1).ravel()
    return probs


def normalized_weights(channel: ClassicalChannel, batch: ObservationBatch,
                       repetitions: int = 1) -> np.ndarray:
    log_w = _log_weights(channel, batch, repetitions)
    return np.exp(log_w - logsumexp(log_w))


def qmlh_argmax_bruteforce(channel: ClassicalChannel, batch: ObservationBatch) -> tuple[str, float]:
    """Exhaustive maximum-likelihood key; ties go to the lexicographically smallest key."""
    if channel.key_bits > MAX_BRUTEFORCE_BITS:
        raise TooLarge(f"{channel.key_bits} key bits exceed the enumeration limit")
    ll = channel.log_likelihoods(batch)
    best = int(np.argmax(ll))
    return index_to_key(best, channel.key_bits), float(ll[best])


def qmlh_required_T(epsilon: float, delta_bits: float, key_bits: int) -> int:
    """Repetitions ``T`` with ``2**key_bits * (1 + 1/eps)**-T <= 2**-delta_bits``."""
    if epsilon <= 0 or delta_bits <= 0 or key_bits < 0:
        raise InvalidParameter("epsilon and delta_bits must be positive")
    return math.ceil((delta_bits + key_bits) / math.log2(1 + 1 / epsilon))


def is_bad_hypothesis(log_likelihoods: np.ndarray, h: int, epsilon: float) -> bool:
    """True when ``w(h) < max_x w(x) / (1 + 1/eps)``."""
    return bool(log_likelihoods[h] < log_likelihoods.max() - math.log1p(1 / epsilon))


def qmlh_failure_rate(channel: ClassicalChannel,
                      batch_generator: Callable[[np.random.Generator], ObservationBatch],
                      epsilon: float, trials: int, rng: np.random.Generator,
                      repetitions: int = 1) -> float:
    """Fraction of sampled hypotheses that miss the ``(1 + 1/eps)`` likelihood gap.

    Each trial draws a fresh batch, samples ``h`` with ``repetitions``
    post-selected copies and checks ``h`` against the single-copy weights.
    """
    if trials < 1:
        raise InvalidParameter("trials must be at least 1")
    bad = 0
    for _ in range(trials):
        batch = batch_generator(rng)
        h = qmlh_sample_index(channel, batch, rng, repetitions)
        bad += is_bad_hypothesis(channel.log_likelihoods(batch), h, epsilon)
    return bad / trials
