"""Breaking a one-way state generator with a learner.

The challenger draws a key, hands out T copies of its state, and accepts a
guess k* with probability F(k, k*). A learner wins often; a zero-copy
adversary on orthogonal states cannot beat 1/|keys|.
"""
# %%

from qmllab.families import basis_family, conditional_phase_family
from qmllab.learner import LearnerParams, calibrated_B_hat
from qmllab.measure import build_design
from qmllab.owsg import (
    BasisReadoutAdversary,
    OwsgScheme,
    RandomGuessAdversary,
    exact_success,
    learner_to_breaker,
    owsg_experiment,
    reverse_reduction_report,
)

# %%
scheme = OwsgScheme(conditional_phase_family(3, 4))
design = build_design(3, 32, seed=0)
breaker = learner_to_breaker(LearnerParams(4, 7, B_hat=calibrated_B_hat(design).B_hat, T=128), design)
res = owsg_experiment(scheme, breaker, trials=400, T=128, seed=0, good_threshold=0.75)
print(f"learner wins {res.success_rate:.3f}  CI [{res.ci_low:.3f}, {res.ci_high:.3f}]")
print("reverse direction:", reverse_reduction_report(res, 2.0))

# %%
guess = RandomGuessAdversary()
print("random guess exact:", exact_success(scheme, guess))
print("random guess MC   :", owsg_experiment(scheme, guess, trials=2000, T=0, seed=1).success_rate)

# %% [markdown]
# Orthogonal basis states: one copy reveals the key, zero copies reveal nothing.

# %%
orth = OwsgScheme(basis_family(4))
for T in (0, 1):
    r = owsg_experiment(orth, BasisReadoutAdversary(p_answer=1.0), trials=1000, T=T, seed=2)
    print(f"T={T}: success {r.success_rate:.3f}  (1/16 = {1 / 16:.4f})")
