"""Sampling a key from the likelihood posterior one bit at a time.

The sampler never enumerates the posterior directly: it walks the key prefix
tree, choosing each bit with the ratio of prefix marginals. Here we compare
its exact law with the normalized likelihoods and with Monte Carlo draws.
"""
# %%
import numpy as np

from qmllab.families import conditional_phase_family
from qmllab.learner import measure_and_mix
from qmllab.measure import build_design
from qmllab.metrics import tv_to_distribution
from qmllab.oracle import ClassicalChannel, prefix_marginal
from qmllab.qcore import index_to_key
from qmllab.qmlh import (
    is_bad_hypothesis,
    normalized_weights,
    qmlh_required_T,
    qmlh_sample,
    qmlh_sample_index,
    qmlh_sample_many,
    sampler_distribution,
)

# %%
fam = conditional_phase_family(3, 4)
ch = ClassicalChannel(fam, build_design(3, 16, seed=0), 0.5)
rng = np.random.default_rng(0)
batch = measure_and_mix(fam, "1011", ch.design, 6, 0.5, rng)

print("marginal of prefix '1' :", prefix_marginal(ch, "1", batch))
print("marginal of prefix '10':", prefix_marginal(ch, "10", batch))

# %%
law = sampler_distribution(ch, batch)
print("max |law - weights| =", np.abs(law - normalized_weights(ch, batch)).max())
draws = qmlh_sample_many(ch, batch, rng, 100_000)
print("TV to Monte Carlo    =", tv_to_distribution(draws, law))
print("one draw:", qmlh_sample(ch, batch, rng))

# %% [markdown]
# With enough observations a draw is an epsilon-good hypothesis: its
# likelihood is within a factor (1 + 1/epsilon) of the best. Count failures.

# %%
eps, delta = 4, 7
T = qmlh_required_T(eps, delta, fam.key_bits)
bad = 0
for i in range(500):
    r = np.random.default_rng([3, i])
    b = measure_and_mix(fam, index_to_key(int(r.integers(16)), 4), ch.design, 4, 0.5, r)
    bad += is_bad_hypothesis(ch.log_likelihoods(b), qmlh_sample_index(ch, b, r, T), eps)
print(f"T={T}: {bad} bad hypotheses in 500 trials (target rate {2.0**-delta:.4f})")
