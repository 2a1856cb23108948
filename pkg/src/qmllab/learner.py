"""End-to-end proper learner for keyed pure-state families.

The learner sees only measurement records: every copy of the unknown state is
measured with a random-unitary design, the outcome is replaced by uniform noise
with probability ``mix_alpha``, and the posterior sampler picks a key whose
likelihood is close to the best. Scoring against the true key happens in the
harness, outside the algorithmic path.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, InvalidParameter
from .families import family_from_config
from .measure import (
    CONSTRUCTIONS,
    Calibration,
    MeasurementDesign,
    calibrate_distortion,
    default_K,
    outcome_distribution,
)
from .metrics import clopper_pearson, kl_divergence, pinsker_check
from .oracle import ClassicalChannel, ObservationBatch
from .qcore import (
    CircuitFamily,
    PureState,
    family_states,
    generate_state,
    index_to_key,
    key_to_index,
)
from .qmlh import qmlh_sample_index
from .reports import SCHEMA_VERSION, ExperimentReport

# per-copy sampling above this many copies switches to one multinomial draw
COPY_SAMPLING_LIMIT = 100_000
DEFAULT_CALIBRATION_PAIRS = 200
MIN_FROBENIUS_FOR_BOUND = 0.1


@dataclass(frozen=True)
class LearnerParams:
    """Knobs of the learner.

    ``epsilon`` is the target: success means trace distance at most
    ``1/epsilon``. Failure probability is targeted at ``2**-delta_bits``.
    ``T`` and ``qmlh_repetitions`` are derived from the design constant when
    left as ``None``.
    """

    epsilon: float
    delta_bits: float
    mix_alpha: float = 0.5
    T: int | None = None
    qmlh_repetitions: int | None = None
    B_hat: float | None = None
    sampling: str = "auto"

    def __post_init__(self):
        if self.epsilon <= 0 or self.delta_bits < 0:
            raise InvalidParameter("epsilon must be positive and delta_bits nonnegative")
        if not 0 <= self.mix_alpha <= 1:
            raise InvalidParameter("mix_alpha must lie in [0, 1]")
        if self.T is not None and self.T < 1:
            raise InvalidParameter("explicit T must be at least 1")
        if self.qmlh_repetitions is not None and self.qmlh_repetitions < 1:
            raise InvalidParameter("qmlh_repetitions must be at least 1")
        if self.B_hat is not None and self.B_hat <= 0:
            raise InvalidParameter("B_hat must be positive")
        if self.sampling not in ("auto", "copies", "counts"):
            raise InvalidParameter("sampling must be auto, copies or counts")


@dataclass(frozen=True)
class LearnResult:
    hypothesis: str
    trace_distance: float
    batch_digest: str
    T: int
    qmlh_repetitions: int
    elapsed_s: float = field(compare=False)


def epsilon_star(epsilon: float, B_hat: float) -> float:
    return 4 * epsilon**2 / B_hat**2


def learning_sample_count(epsilon: float, delta_bits: float, ell_z: int, key_bits: int,
                          B_hat: float) -> int:
    """Copies demanded by the worst-case analysis.

    ``eps* = 4 eps^2 / B^2`` and ``T = ceil(eps*^2 (ell_z + 1)^2 (key_bits + delta_bits + 3))``;
    the ``+3`` is ``log2 8``.
    """
    if epsilon <= 0 or B_hat <= 0 or ell_z < 1 or key_bits < 0 or delta_bits < 0:
        raise InvalidParameter("epsilon, B_hat, ell_z must be positive; bit counts nonnegative")
    es = epsilon_star(epsilon, B_hat)
    return math.ceil(es**2 * (ell_z + 1) ** 2 * (key_bits + delta_bits + 3))


def qmlh_repetitions_for(T: int, eps_star: float, delta_bits: float, key_bits: int) -> int:
    """Post-selected repetitions so the sampler meets a ``2**(T / (2 eps*))`` likelihood gap.

    The gap allowed on the ``T``-outcome likelihood is ``1 + 1/p <= 2**(T/(2 eps*))``;
    the repetition count then follows the sampler's own requirement
    ``(delta_bits + key_bits) / log2(1 + 1/p)``.
    """
    if T == 0:
        return 1
    gap_bits = T / (2 * eps_star)
    return max(1, math.ceil((delta_bits + key_bits) / gap_bits))


@lru_cache(maxsize=64)
def _calibrate_cached(design: MeasurementDesign, pairs: int) -> Calibration:
    rng = np.random.default_rng([design.seed & (2**63 - 1), pairs, 0xCA1])
    return calibrate_distortion(design, pairs, rng)


def calibrated_B_hat(design: MeasurementDesign,
                     pairs: int = DEFAULT_CALIBRATION_PAIRS) -> Calibration:
    """Distortion calibration seeded from the design itself, so it is reproducible."""
    return _calibrate_cached(design, pairs)


class StateCopies:
    """``T`` copies of an unknown state, accessible only by measuring them.

    The generating key is kept private; the learner and adversaries interact
    with this object, never with the key.
    """

    def __init__(self, family: CircuitFamily, key, T: int):
        self.__state = generate_state(family, key)
        self.family = family
        self.T = int(T)

    def measure_and_mix(self, design: MeasurementDesign, mix_alpha: float,
                        rng: np.random.Generator, sampling: str = "auto") -> ObservationBatch:
        """Consume all copies; see :func:`measure_and_mix`."""
        return _measure_state(self.__state, design, self.T, mix_alpha, rng, sampling)


def _measure_state(state: PureState, design: MeasurementDesign, T: int, mix_alpha: float,
                   rng: np.random.Generator, sampling: str) -> ObservationBatch:
    if T < 0:
        raise InvalidParameter("T must be nonnegative")
    if not 0 <= mix_alpha <= 1:
        raise InvalidParameter("mix_alpha must lie in [0, 1]")
    size = design.alphabet_size
    if sampling == "counts" or (sampling == "auto" and T > COPY_SAMPLING_LIMIT):
        p = (1 - mix_alpha) * outcome_distribution(design, state) + mix_alpha / size
        return ObservationBatch(rng.multinomial(T, p / p.sum()), design.outcome_bits)
    noisy = rng.random(T) < mix_alpha
    out = np.empty(T, dtype=np.int64)
    out[noisy] = rng.integers(size, size=int(noisy.sum()))
    m = int((~noisy).sum())
    ks = rng.integers(design.K, size=m)
    basis_probs = np.abs(design.unitaries @ state.amplitudes) ** 2  # (K, d)
    cdf = np.cumsum(basis_probs, axis=1)
    u = rng.random(m) * cdf[ks, -1]
    ys = np.minimum((u[:, None] >= cdf[ks]).sum(axis=1), design.dim - 1)
    out[~noisy] = (ks << design.num_qubits) | ys
    return ObservationBatch(np.bincount(out, minlength=size), design.outcome_bits, out)


def measure_and_mix(family: CircuitFamily, key, design: MeasurementDesign, T: int,
                    mix_alpha: float, rng: np.random.Generator,
                    sampling: str = "copies") -> ObservationBatch:
    """Measure ``T`` copies of ``|psi_key>``; each outcome is uniform noise w.p. ``mix_alpha``.

    Each ``Z_i`` is distributed as ``p_alpha(.|key)``. With ``sampling="counts"``
    only the histogram is drawn (one multinomial), which is the same law for
    the batch as a multiset.
    """
    return _measure_state(generate_state(family, key), design, T, mix_alpha, rng, sampling)


def resolve_T(params: LearnerParams, channel: ClassicalChannel, B_hat: float) -> int:
    if params.T is not None:
        return params.T
    return learning_sample_count(params.epsilon, params.delta_bits, channel.outcome_bits,
                                 channel.key_bits, B_hat)


def learn_from_copies(copies: StateCopies, channel: ClassicalChannel, params: LearnerParams,
                      B_hat: float, rng: np.random.Generator) -> tuple[int, ObservationBatch, int]:
    """The algorithmic path: measure, mix, post-selection sample.

    Returns ``(hypothesis index, batch, repetitions)``.
    """
    batch = copies.measure_and_mix(channel.design, channel.mix_alpha, rng, params.sampling)
    reps = params.qmlh_repetitions or qmlh_repetitions_for(
        batch.T, epsilon_star(params.epsilon, B_hat), params.delta_bits, channel.key_bits)
    return qmlh_sample_index(channel, batch, rng, reps), batch, reps


@lru_cache(maxsize=32)
def _channel(family: CircuitFamily, design: MeasurementDesign, mix_alpha: float) -> ClassicalChannel:
    return ClassicalChannel(family, design, mix_alpha)


def get_channel(family: CircuitFamily, design: MeasurementDesign, mix_alpha: float) -> ClassicalChannel:
    """Shared, cached channel instance for a (family, design, alpha) triple."""
    return _channel(family, design, float(mix_alpha))


def learn(family: CircuitFamily, design: MeasurementDesign, unknown_key, params: LearnerParams,
          rng: np.random.Generator) -> LearnResult:
    """Learn ``unknown_key`` from copies of its state and score the hypothesis.

    Raises
    ------
    NoSupport
        If no key explains the observed batch.
    """
    start = time.perf_counter()
    channel = get_channel(family, design, params.mix_alpha)
    B_hat = params.B_hat if params.B_hat is not None else calibrated_B_hat(design).B_hat
    T = resolve_T(params, channel, B_hat)
    copies = StateCopies(family, unknown_key, T)
    h, batch, reps = learn_from_copies(copies, channel, params, B_hat, rng)
    h_key = index_to_key(h, family.key_bits)
    td = math.sqrt(max(0.0, 1 - _fid(family, key_to_index(unknown_key, family.key_bits), h)))
    return LearnResult(h_key, td, batch.digest, T, reps, time.perf_counter() - start)


def _fid(family: CircuitFamily, x: int, h: int) -> float:
    s = family_states(family)
    return min(1.0, float(abs(np.vdot(s[x], s[h])) ** 2))


def chain_diagnostics(channel: ClassicalChannel, x: int, h: int, B_hat: float) -> dict:
    """Quantities along the proof chain from likelihood to trace distance for the pair ``(x, h)``."""
    p_mix = channel.probabilities
    p0 = channel.measured_probabilities
    kl = kl_divergence(p_mix[x], p_mix[h])
    pk = pinsker_check(p_mix[x], p_mix[h])
    l1_mix = float(np.abs(p_mix[x] - p_mix[h]).sum())
    l1_0 = float(np.abs(p0[x] - p0[h]).sum())
    fid = _fid(channel.family, x, h)
    td = math.sqrt(max(0.0, 1 - fid))
    fro = math.sqrt(2 * max(0.0, 1 - fid))
    td_bound = l1_0 / (B_hat * math.sqrt(2))
    return {
        "kl_bits": kl,
        "tv_mixed": pk.tv,
        "pinsker_bound": pk.bound,
        "pinsker_holds": pk.holds,
        "l1_mixed": l1_mix,
        "l1_measured": l1_0,
        "mixing_identity_holds": abs(l1_mix - (1 - channel.mix_alpha) * l1_0) <= 1e-9,
        "frobenius": fro,
        "td_bound": td_bound,
        "td_bound_holds": (td <= td_bound + 1e-6) if fro >= MIN_FROBENIUS_FOR_BOUND else None,
    }


@dataclass(frozen=True)
class DesignConfig:
    K: int
    construction: str = "haar_random"
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    family: dict
    design: DesignConfig
    epsilon: float
    delta_bits: float
    mode: str = "worst"
    key_distribution: tuple | None = None
    mix_alpha: float = 0.5
    trials: int = 200
    master_seed: int = 0
    T_override: int | None = None
    qmlh_repetitions: int | None = None
    calibration_pairs: int = DEFAULT_CALIBRATION_PAIRS

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        """Validate every field and report all problems in one :class:`ConfigError`."""
        errors: dict[str, str] = {}
        if not isinstance(d, dict):
            raise ConfigError({"<root>": "config must be a JSON object"})
        known = {f for f in cls.__dataclass_fields__}
        for k in d:
            if k not in known:
                errors[k] = "unknown field"
        family = d.get("family")
        fam_obj = None
        if not isinstance(family, dict):
            errors["family"] = "required object"
        else:
            try:
                fam_obj = family_from_config(family)
            except Exception as exc:  # noqa: BLE001 - any builder failure is a config error
                errors["family"] = f"cannot build family: {exc}"
        des = d.get("design")
        design = None
        if not isinstance(des, dict):
            errors["design"] = "required object {K, construction, seed}"
        else:
            K = des.get("K", default_K(fam_obj.num_qubits) if fam_obj else None)
            if not isinstance(K, int) or isinstance(K, bool) or K < 1:
                errors["design.K"] = "positive integer required"
            if des.get("construction", "haar_random") not in CONSTRUCTIONS:
                errors["design.construction"] = f"one of {CONSTRUCTIONS}"
            if not isinstance(des.get("seed", 0), int):
                errors["design.seed"] = "integer required"
            design = DesignConfig(K, des.get("construction", "haar_random"), des.get("seed", 0))

        def num(name, positive=True, required=True, default=None):
            v = d.get(name, default)
            if v is None:
                if required:
                    errors[name] = "required number"
                return v
            if not isinstance(v, (int, float)) or isinstance(v, bool) or (
                    v <= 0 if positive else v < 0):
                errors[name] = "positive number required" if positive else "nonnegative number required"
            return v

        def integer(name, default, minimum, allow_none=False):
            v = d.get(name, default)
            if v is None and allow_none:
                return None
            if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
                errors[name] = f"integer >= {minimum} required"
            return v

        epsilon = num("epsilon")
        delta_bits = num("delta_bits", positive=False)
        mix_alpha = d.get("mix_alpha", 0.5)
        if not isinstance(mix_alpha, (int, float)) or not 0 <= mix_alpha <= 1:
            errors["mix_alpha"] = "number in [0, 1] required"
        mode = d.get("mode", "worst")
        if mode not in ("worst", "average"):
            errors["mode"] = "'worst' or 'average'"
        kd = d.get("key_distribution")
        if kd is not None:
            ok = isinstance(kd, list) and all(isinstance(w, (int, float)) and w >= 0 for w in kd)
            if not ok or (fam_obj is not None and len(kd) != fam_obj.num_keys) or not sum(kd or [0]) > 0:
                errors["key_distribution"] = "list of nonnegative weights, one per key"
            else:
                kd = tuple(float(w) for w in kd)
        trials = integer("trials", 200, 0)
        master_seed = integer("master_seed", 0, 0)
        T_override = integer("T_override", None, 1, allow_none=True)
        reps = integer("qmlh_repetitions", None, 1, allow_none=True)
        pairs = integer("calibration_pairs", DEFAULT_CALIBRATION_PAIRS, 1)
        if errors:
            raise ConfigError(errors)
        return cls(family=family, design=design, epsilon=float(epsilon),
                   delta_bits=float(delta_bits), mode=mode, key_distribution=kd,
                   mix_alpha=float(mix_alpha), trials=trials, master_seed=master_seed,
                   T_override=T_override, qmlh_repetitions=reps, calibration_pairs=pairs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["key_distribution"] = list(self.key_distribution) if self.key_distribution else None
        return d

    def build_family(self) -> CircuitFamily:
        return family_from_config(self.family)

    def build_design(self, num_qubits: int) -> MeasurementDesign:
        return MeasurementDesign(num_qubits, self.design.K, self.design.construction, self.design.seed)


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent stream per trial; identical regardless of scheduling."""
    return np.random.default_rng([master_seed, trial_index])


def run_learning_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Run the learner over keys and aggregate trace-distance statistics.

    ``mode="worst"`` runs ``config.trials`` rounds, each covering every key once
    (trial ``r * |X| + x`` uses key ``x``). ``mode="average"`` runs
    ``config.trials`` trials with keys drawn from ``key_distribution`` (uniform
    if unset) using the trial's own generator.
    """
    family = config.build_family()
    design = config.build_design(family.num_qubits)
    cal = calibrated_B_hat(design, config.calibration_pairs)
    channel = get_channel(family, design, config.mix_alpha)
    params = LearnerParams(config.epsilon, config.delta_bits, config.mix_alpha,
                           T=config.T_override, qmlh_repetitions=config.qmlh_repetitions,
                           B_hat=cal.B_hat)
    T = resolve_T(params, channel, cal.B_hat)
    params = LearnerParams(**{**asdict(params), "T": T})
    eps_star = epsilon_star(config.epsilon, cal.B_hat)
    n_keys = family.num_keys
    if config.key_distribution is not None:
        weights = np.array(config.key_distribution) / sum(config.key_distribution)
    else:
        weights = np.full(n_keys, 1 / n_keys)
    n_trials = config.trials * n_keys if config.mode == "worst" else config.trials
    threshold = 1 / config.epsilon

    def run_trial(i: int) -> dict:
        rng = trial_rng(config.master_seed, i)
        x = i % n_keys if config.mode == "worst" else int(rng.choice(n_keys, p=weights))
        copies = StateCopies(family, index_to_key(x, family.key_bits), T)
        h, batch, reps = learn_from_copies(copies, channel, params, cal.B_hat, rng)
        diag = chain_diagnostics(channel, x, h, cal.B_hat)
        td = math.sqrt(max(0.0, 1 - _fid(family, x, h)))
        return {
            "trial_index": i,
            "key": index_to_key(x, family.key_bits),
            "hypothesis": index_to_key(h, family.key_bits),
            "trace_distance": td,
            "success": td <= threshold,
            "batch_digest": batch.digest,
            "qmlh_repetitions": reps,
            "diagnostics": diag,
        }

    if threads > 1 and n_trials > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run_trial, range(n_trials)))
    else:
        records = [run_trial(i) for i in range(n_trials)]
    records.sort(key=lambda r: r["trial_index"])

    per_key: dict[str, dict] = {}
    for r in records:
        pk = per_key.setdefault(r["key"], {"trials": 0, "successes": 0})
        pk["trials"] += 1
        pk["successes"] += int(r["success"])
    for pk in per_key.values():
        pk["success_rate"] = pk["successes"] / pk["trials"]
    successes = sum(int(r["success"]) for r in records)
    lo, hi = clopper_pearson(successes, len(records))
    aggregate = {
        "trials": len(records),
        "successes": successes,
        "success_rate": successes / len(records) if records else None,
        "ci_low": lo,
        "ci_high": hi,
        "mean_trace_distance": (float(np.mean([r["trace_distance"] for r in records]))
                                if records else None),
        "min_per_key_success_rate": (min(pk["success_rate"] for pk in per_key.values())
                                     if per_key else None),
        "per_key": dict(sorted(per_key.items())),
        "pinsker_violations": sum(not r["diagnostics"]["pinsker_holds"] for r in records),
        "mixing_violations": sum(not r["diagnostics"]["mixing_identity_holds"] for r in records),
        "td_bound_violations": sum(r["diagnostics"]["td_bound_holds"] is False for r in records),
    }
    parameters = {
        "T": T,
        "T_source": "override" if config.T_override is not None else "formula",
        "B_hat": cal.B_hat,
        "worst_ratio": cal.worst_ratio,
        "epsilon_star": eps_star,
        "success_threshold_td": threshold,
        "outcome_bits": channel.outcome_bits,
        "key_bits": family.key_bits,
        "num_qubits": family.num_qubits,
        "K": design.K,
        "channel_digest": channel.digest,
    }
    return ExperimentReport(kind="learn", config=config.to_dict(), parameters=parameters,
                            trials=records, aggregate=aggregate, schema_version=SCHEMA_VERSION)
