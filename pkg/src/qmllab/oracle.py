"""Exact outcome probabilities for keyed measurement channels.

This is the desk-scale replacement for a PP oracle: every probability the
learner or the post-selection sampler asks for is computed exactly from the
simulated state vectors instead of being extrapolated by a counting oracle.
"""
from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidParameter
from .measure import MeasurementDesign, Outcome, outcome_probabilities
from .qcore import CircuitFamily, family_states, key_to_index, parse_key

LN2 = math.log(2)


def _outcome_code(z, alphabet_size: int) -> int:
    if isinstance(z, Outcome):
        code = int(z.encoded, 2)
    elif isinstance(z, str):
        bits = alphabet_size.bit_length() - 1
        if len(z) != bits or any(c not in "01" for c in z):
            raise InvalidParameter(f"outcome {z!r} is not a {bits}-bit string")
        code = int(z, 2)
    else:
        code = int(z)
    if not 0 <= code < alphabet_size:
        raise InvalidParameter(f"outcome {z!r} outside alphabet of size {alphabet_size}")
    return code


@dataclass(frozen=True, eq=False)
class ObservationBatch:
    """A multiset of encoded outcomes ``Z_1..Z_T``.

    Likelihoods depend only on the outcome histogram, so ``counts`` is the
    canonical content. ``outcomes`` keeps the draw order when the batch was
    materialized copy by copy; very large batches are stored as counts only.
    """

    counts: np.ndarray
    outcome_bits: int
    outcomes: np.ndarray | None = None
    digest: str = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size != 2**self.outcome_bits or (counts < 0).any():
            raise InvalidParameter("counts must be a nonnegative histogram over the alphabet")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        if self.outcomes is not None:
            outs = np.asarray(self.outcomes, dtype=np.int64).copy()
            outs.flags.writeable = False
            object.__setattr__(self, "outcomes", outs)
        h = hashlib.sha256(counts.astype("<i8").tobytes())
        h.update(str(self.outcome_bits).encode())
        object.__setattr__(self, "digest", h.hexdigest()[:16])

    @classmethod
    def from_outcomes(cls, outcomes, outcome_bits: int) -> ObservationBatch:
        size = 2**outcome_bits
        codes = np.array([_outcome_code(z, size) for z in outcomes], dtype=np.int64)
        counts = np.bincount(codes, minlength=size)
        return cls(counts, outcome_bits, codes)

    @property
    def T(self) -> int:
        return int(self.counts.sum())

    def __len__(self):
        return self.T

    def to_dict(self, channel_digest: str | None = None) -> dict:
        width = max(1, math.ceil(self.outcome_bits / 4))
        d = {"T": self.T, "ell_z": self.outcome_bits, "channel_digest": channel_digest}
        if self.outcomes is not None:
            d["outcomes"] = [format(int(c), f"0{width}x") for c in self.outcomes]
        else:
            nz = np.flatnonzero(self.counts)
            d["counts"] = {format(int(c), f"0{width}x"): int(self.counts[c]) for c in nz}
        return d

    def to_json(self, channel_digest: str | None = None) -> str:
        return json.dumps(self.to_dict(channel_digest), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> ObservationBatch:
        try:
            bits = int(d["ell_z"])
            size = 2**bits
            if "outcomes" in d:
                batch = cls.from_outcomes([int(h, 16) for h in d["outcomes"]], bits)
            else:
                counts = np.zeros(size, dtype=np.int64)
                for h, c in d["counts"].items():
                    counts[_outcome_code(int(h, 16), size)] += int(c)
                batch = cls(counts, bits)
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise InvalidParameter(f"malformed observation batch: {exc}") from None
        if "T" in d and int(d["T"]) != batch.T:
            raise InvalidParameter(f"batch declares T={d['T']} but holds {batch.T} outcomes")
        return batch

    @classmethod
    def from_json(cls, text: str) -> ObservationBatch:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParameter(f"malformed observation batch: {exc}") from None
        if not isinstance(data, dict):
            raise InvalidParameter("observation batch must be a JSON object")
        return cls.from_dict(data)


class ClassicalChannel:
    """Measure ``|psi_x>`` with a design; replace the outcome by uniform noise w.p. ``mix_alpha``.

    ``p_alpha(z|x) = (1 - alpha) p_M(z|x) + alpha / 2**outcome_bits``.
    """

    def __init__(self, family: CircuitFamily, design: MeasurementDesign, mix_alpha: float = 0.5):
        if not 0.0 <= mix_alpha <= 1.0:
            raise InvalidParameter("mix_alpha must lie in [0, 1]")
        if family.num_qubits != design.num_qubits:
            raise InvalidParameter("family and design act on different qubit counts")
        self.family = family
        self.design = design
        self.mix_alpha = float(mix_alpha)
        self.outcome_bits = design.outcome_bits
        self.alphabet_size = design.alphabet_size
        measured = outcome_probabilities(design, family_states(family))
        probs = (1 - self.mix_alpha) * measured + self.mix_alpha / self.alphabet_size
        probs.flags.writeable = False
        self._measured = measured
        self._measured.flags.writeable = False
        self._probs = probs
        with np.errstate(divide="ignore"):
            self._log_probs = np.log(probs)
        self._log_probs.flags.writeable = False
        self._memo: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def key_bits(self) -> int:
        return self.family.key_bits

    @property
    def num_keys(self) -> int:
        return self.family.num_keys

    @property
    def probabilities(self) -> np.ndarray:
        """Row ``x`` is ``p_alpha(.|x)`` over the encoded alphabet."""
        return self._probs

    @property
    def measured_probabilities(self) -> np.ndarray:
        """Row ``x`` is the unmixed ``p_0(.|x)``."""
        return self._measured

    def with_alpha(self, mix_alpha: float) -> ClassicalChannel:
        return ClassicalChannel(self.family, self.design, mix_alpha)

    @property
    def digest(self) -> str:
        payload = json.dumps(
            {"family": self.family.to_dict(), "design": self.design.to_dict(),
             "mix_alpha": repr(self.mix_alpha)},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def _compute_log_likelihoods(self, batch: ObservationBatch) -> np.ndarray:
        if batch.outcome_bits != self.outcome_bits:
            raise InvalidParameter("batch was drawn over a different outcome alphabet")
        cols = np.flatnonzero(batch.counts)
        if cols.size == 0:
            return np.zeros(self.num_keys)
        return (self._log_probs[:, cols] * batch.counts[cols]).sum(axis=1)

    def log_likelihoods(self, batch: ObservationBatch, use_cache: bool = True) -> np.ndarray:
        """``sum_i ln p_alpha(Z_i|x)`` for every key ``x`` (``-inf`` marks zero likelihood)."""
        if not use_cache:
            return self._compute_log_likelihoods(batch)
        with self._lock:
            hit = self._memo.get(batch.digest)
        if hit is None:
            hit = self._compute_log_likelihoods(batch)
            hit.flags.writeable = False
            with self._lock:
                hit = self._memo.setdefault(batch.digest, hit)
        return hit


def exact_probability(channel: ClassicalChannel, key, z) -> float:
    """``p_alpha(z|key)``, computed exactly from the simulated state."""
    x = key_to_index(key, channel.key_bits)
    return float(channel.probabilities[x, _outcome_code(z, channel.alphabet_size)])


def batch_log_likelihood(channel: ClassicalChannel, key, batch: ObservationBatch) -> float:
    """Natural-log likelihood of the whole batch; ``-inf`` if any factor vanishes."""
    x = key_to_index(key, channel.key_bits)
    return float(channel.log_likelihoods(batch)[x])


def _prefix_bits(prefix, key_bits: int) -> tuple[int, ...]:
    if len(prefix) > key_bits:
        raise InvalidParameter(f"prefix of length {len(prefix)} exceeds {key_bits} key bits")
    return parse_key(prefix, len(prefix))


def log_prefix_marginal(channel: ClassicalChannel, prefix, batch: ObservationBatch,
                        repetitions: int = 1) -> float:
    """Log of ``sum_{suffix} 2**-l * prod_i p_alpha(Z_i|prefix||suffix)**repetitions``.

    Keys sharing a prefix form one contiguous block of key indices, so the sum
    is a log-sum-exp over that block.
    """
    bits = _prefix_bits(prefix, channel.key_bits)
    rest = channel.key_bits - len(bits)
    start = 0
    for b in bits:
        start = (start << 1) | b
    start <<= rest
    block = repetitions * channel.log_likelihoods(batch)[start:start + (1 << rest)]
    top = block.max()
    if top == -np.inf:
        return -np.inf
    return float(logsumexp(block) - channel.key_bits * LN2)


def prefix_marginal(channel: ClassicalChannel, prefix, batch: ObservationBatch,
                    repetitions: int = 1) -> float:
    return math.exp(log_prefix_marginal(channel, prefix, batch, repetitions))
