"""Security games for one-way state generators with pure outputs.

The challenger samples ``k``, hands the adversary ``T`` copies of ``|psi_k>``
and accepts a guess ``k*`` with probability ``|<psi_k|psi_k*>|^2``, which is the
acceptance probability of the projective test onto ``|psi_k*>``. Both
reductions between OWSG breakers and average-case learners are provided as
runnable wrappers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BoundVacuous, InvalidParameter
from .learner import (
    LearnerParams,
    StateCopies,
    calibrated_B_hat,
    get_channel,
    learn_from_copies,
    trial_rng,
)
from .measure import FixedDesign, MeasurementDesign
from .metrics import clopper_pearson
from .qcore import (
    CircuitFamily,
    family_states,
    fidelity_matrix,
    index_to_key,
    key_to_index,
)


@dataclass(frozen=True)
class OwsgScheme:
    """``KeyGen`` draws from ``key_weights`` (uniform if ``None``); ``StateGen`` is the family."""

    stategen: CircuitFamily
    key_weights: tuple | None = None

    def __post_init__(self):
        if self.key_weights is not None:
            w = np.asarray(self.key_weights, dtype=float)
            if w.size != self.stategen.num_keys or (w < 0).any() or abs(w.sum() - 1) > 1e-9:
                raise InvalidParameter("key_weights must be a distribution over all keys")

    def keygen_probabilities(self) -> np.ndarray:
        if self.key_weights is None:
            n = self.stategen.num_keys
            return np.full(n, 1 / n)
        return np.asarray(self.key_weights, dtype=float)

    def keygen(self, rng: np.random.Generator) -> int:
        if self.key_weights is None:
            return int(rng.integers(self.stategen.num_keys))
        return int(rng.choice(self.stategen.num_keys, p=self.keygen_probabilities()))

    def fidelities(self) -> np.ndarray:
        s = family_states(self.stategen)
        return np.minimum(fidelity_matrix(s, s), 1.0)


class Adversary:
    """Maps ``(scheme, copies, rng)`` to a key guess.

    ``copies`` is a :class:`~qmllab.learner.StateCopies`; the challenge key is
    not reachable through it. Subclasses that know their own response law may
    override :meth:`response_distribution` so the harness can compute the
    exact expected success.
    """

    name = "adversary"

    def __call__(self, scheme: OwsgScheme, copies: StateCopies, rng: np.random.Generator):
        raise NotImplementedError

    def response_distribution(self, scheme: OwsgScheme, key_index: int) -> np.ndarray | None:
        return None


class FixedKeyAdversary(Adversary):
    name = "fixed_key"

    def __init__(self, key):
        self.key = key

    def __call__(self, scheme, copies, rng):
        return self.key

    def response_distribution(self, scheme, key_index):
        p = np.zeros(scheme.stategen.num_keys)
        p[key_to_index(self.key, scheme.stategen.key_bits)] = 1
        return p


class RandomGuessAdversary(Adversary):
    name = "random_guess"

    def __call__(self, scheme, copies, rng):
        return index_to_key(int(rng.integers(scheme.stategen.num_keys)), scheme.stategen.key_bits)

    def response_distribution(self, scheme, key_index):
        n = scheme.stategen.num_keys
        return np.full(n, 1 / n)


class BasisReadoutAdversary(Adversary):
    """With probability ``p_answer``, read one copy in the computational basis; else guess.

    The readout string is taken as the key, so this is only meaningful when the
    family has one qubit per key bit.
    """

    name = "basis_readout"

    def __init__(self, p_answer: float):
        self.p_answer = p_answer

    def _check(self, scheme):
        fam = scheme.stategen
        if fam.num_qubits != fam.key_bits:
            raise InvalidParameter("basis readout needs num_qubits == key_bits")

    def __call__(self, scheme, copies, rng):
        self._check(scheme)
        fam = scheme.stategen
        if copies.T < 1 or rng.random() >= self.p_answer:
            return index_to_key(int(rng.integers(fam.num_keys)), fam.key_bits)
        identity = FixedDesign(np.eye(fam.dim))
        batch = copies.measure_and_mix(identity, 0.0, rng, sampling="copies")
        return index_to_key(int(batch.outcomes[0]), fam.key_bits)

    def response_distribution(self, scheme, key_index):
        self._check(scheme)
        fam = scheme.stategen
        readout = np.abs(family_states(fam)[key_index]) ** 2
        return self.p_answer * readout + (1 - self.p_answer) / fam.num_keys


class LearnerAdversary(Adversary):
    """Pass the copies to the learner and submit its hypothesis."""

    name = "learner"

    def __init__(self, params: LearnerParams, design: MeasurementDesign):
        self.params = params
        self.design = design

    def __call__(self, scheme, copies, rng):
        channel = get_channel(scheme.stategen, self.design, self.params.mix_alpha)
        B_hat = self.params.B_hat or calibrated_B_hat(self.design).B_hat
        h, _, _ = learn_from_copies(copies, channel, self.params, B_hat, rng)
        return index_to_key(h, scheme.stategen.key_bits)


def learner_to_breaker(params: LearnerParams, design: MeasurementDesign) -> LearnerAdversary:
    """Wrap the learner as an OWSG adversary."""
    return LearnerAdversary(params, design)


@dataclass
class OwsgResult:
    trials: int
    successes: int
    success_rate: float
    ci_low: float
    ci_high: float
    exact_expected: float | None
    good_threshold: float | None
    good_count: int | None
    good_successes: int | None
    bad_successes: int | None
    min_good_fidelity: float | None
    mean_fidelity: float
    records: list

    @property
    def ci_width(self) -> float:
        return self.ci_high - self.ci_low

    @property
    def good_rate(self) -> float | None:
        return None if self.good_count is None else self.good_count / self.trials

    def summary(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "records"}
        d["good_rate"] = self.good_rate
        d["ci_width"] = self.ci_width
        return d


def exact_success(scheme: OwsgScheme, adversary: Adversary) -> float | None:
    """``sum_k Pr[k] sum_k* Pr[k*|k] F(k, k*)`` when the adversary exposes its response law."""
    fid = scheme.fidelities()
    total = 0.0
    for k, pk in enumerate(scheme.keygen_probabilities()):
        if pk == 0:
            continue
        resp = adversary.response_distribution(scheme, k)
        if resp is None:
            return None
        total += pk * float(resp @ fid[k])
    return total


def owsg_experiment(scheme: OwsgScheme, adversary: Adversary, trials: int, T: int,
                    seed: int = 0, good_threshold: float | None = None,
                    threads: int = 1) -> OwsgResult:
    """Estimate the adversary's winning probability.

    Trial ``i`` draws everything from its own generator seeded by ``(seed, i)``.
    ``good_threshold`` (e.g. ``1 - 1/eps``) enables the Good/Bad split: a trial
    is Good when ``F(k, k*) >= good_threshold``.
    """
    if trials < 1 or T < 0:
        raise InvalidParameter("trials must be >= 1 and T >= 0")
    fam = scheme.stategen
    fid = scheme.fidelities()

    def run(i):
        rng = trial_rng(seed, i)
        k = scheme.keygen(rng)
        guess = adversary(scheme, StateCopies(fam, index_to_key(k, fam.key_bits), T), rng)
        g = key_to_index(guess, fam.key_bits)
        f = float(fid[k, g])
        rec = {"trial_index": i, "key": index_to_key(k, fam.key_bits),
               "guess": index_to_key(g, fam.key_bits), "fidelity": f,
               "accepted": bool(rng.random() < f)}
        if good_threshold is not None:
            rec["good"] = f >= good_threshold
        return rec

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run, range(trials)))
    else:
        records = [run(i) for i in range(trials)]

    successes = sum(r["accepted"] for r in records)
    lo, hi = clopper_pearson(successes, trials)
    good_count = good_succ = bad_succ = min_good = None
    if good_threshold is not None:
        good = [r for r in records if r["good"]]
        good_count = len(good)
        good_succ = sum(r["accepted"] for r in good)
        bad_succ = successes - good_succ
        min_good = min((r["fidelity"] for r in good), default=None)
    return OwsgResult(
        trials=trials, successes=successes, success_rate=successes / trials,
        ci_low=lo, ci_high=hi, exact_expected=exact_success(scheme, adversary),
        good_threshold=good_threshold, good_count=good_count, good_successes=good_succ,
        bad_successes=bad_succ, min_good_fidelity=min_good,
        mean_fidelity=float(np.mean([r["fidelity"] for r in records])), records=records,
    )


def reverse_reduction_bound(success: float, epsilon: float) -> float:
    """Lower bound ``(p - 1/eps) / (1 - 1/eps)`` on ``Pr[F > 1/eps]`` implied by success ``p``."""
    if epsilon <= 1:
        raise InvalidParameter("epsilon must exceed 1")
    if success <= 1 / epsilon:
        raise BoundVacuous(f"success {success:.4g} does not exceed 1/eps = {1 / epsilon:.4g}")
    return (success - 1 / epsilon) / (1 - 1 / epsilon)


@dataclass
class ReverseReductionResult:
    p_hat: float
    p_ci_low: float
    p_ci_high: float
    vacuous: bool
    bound: float | None
    good_rate: float
    good_ci_low: float
    good_ci_high: float
    fidelity_bound: float | None
    holds: bool | None

    def summary(self) -> dict:
        return dict(self.__dict__)


class AverageCaseLearner:
    """An OWSG breaker read as a learner: its key guess is the hypothesis."""

    def __init__(self, adversary: Adversary, epsilon: float):
        if epsilon <= 1:
            raise InvalidParameter("epsilon must exceed 1")
        self.adversary = adversary
        self.epsilon = epsilon

    def __call__(self, scheme: OwsgScheme, copies: StateCopies, rng: np.random.Generator):
        return self.adversary(scheme, copies, rng)

    def evaluate(self, scheme: OwsgScheme, trials: int, T: int, seed: int = 0,
                 threads: int = 1) -> ReverseReductionResult:
        """Measure the breaker, derive the learning bound, and compare with the Good rate."""
        res = owsg_experiment(scheme, self.adversary, trials, T, seed=seed, threads=threads)
        return reverse_reduction_report(res, self.epsilon)


def reverse_reduction_report(res: OwsgResult, epsilon: float) -> ReverseReductionResult:
    """Read an OWSG run as a learning run.

    Good here means ``F(k, k*) > 1/eps``. The bound is reported as vacuous
    (not an error) when the measured success does not exceed ``1/eps``.
    """
    if epsilon <= 1:
        raise InvalidParameter("epsilon must exceed 1")
    inv = 1 / epsilon
    good = sum(r["fidelity"] > inv for r in res.records)
    g_lo, g_hi = clopper_pearson(good, res.trials)
    try:
        bound = reverse_reduction_bound(res.success_rate, epsilon)
        vacuous = False
    except BoundVacuous:
        bound, vacuous = None, True
    # the same inequality applied to the mean fidelity holds deterministically
    fid_bound = (res.mean_fidelity - inv) / (1 - inv)
    return ReverseReductionResult(
        p_hat=res.success_rate, p_ci_low=res.ci_low, p_ci_high=res.ci_high,
        vacuous=vacuous, bound=bound, good_rate=good / res.trials, good_ci_low=g_lo,
        good_ci_high=g_hi, fidelity_bound=fid_bound,
        holds=None if vacuous else g_hi >= bound,
    )


def breaker_to_learner(adversary: Adversary, epsilon: float) -> AverageCaseLearner:
    return AverageCaseLearner(adversary, epsilon)
