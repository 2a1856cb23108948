"""Random-basis measurements and how much distance they keep.

A design of K random unitaries followed by a computational-basis readout
turns each state into a distribution over (k, y). We estimate the constant
B_hat with ||P_a - P_b||_1 >= B_hat ||a - b||_F and check it on fresh pairs.
"""
# %%
import math

import numpy as np

from qmllab.measure import (
    build_design,
    calibrate_distortion,
    decode_outcome,
    is_valid_design,
    measured_l1,
    pure_frobenius,
    random_state_pairs,
    sample_outcome,
)
from qmllab.qcore import random_pure_state

# %%
design = build_design(3, 32, "haar_random", seed=0)
print("valid POVM:", is_valid_design(design), " outcome bits:", design.outcome_bits)

rng = np.random.default_rng(1)
psi = random_pure_state(3, rng)
o = sample_outcome(design, psi, rng)
print("one outcome:", o.encoded, "->", decode_outcome(design, o.encoded))

# %% [markdown]
# Calibrate on 200 random pairs, then hold out 200 more.

# %%
cal = calibrate_distortion(design, 200, np.random.default_rng(2))
print(f"worst ratio {cal.worst_ratio:.4f}, B_hat {cal.B_hat:.4f}")

a, b = random_state_pairs(3, 200, np.random.default_rng(3), min_frobenius=0.1)
l1, fro = measured_l1(design, a, b), pure_frobenius(a, b)
print(f"lower bound holds on {np.mean(l1 >= 0.9 * cal.B_hat * fro):.1%} of held-out pairs")
print("upper bound sqrt(2)*F everywhere:", bool(np.all(l1 <= math.sqrt(2) * fro + 1e-9)))

# %% [markdown]
# Clifford-circuit designs are cheaper to describe; compare their constants.

# %%
for construction in ("haar_random", "random_clifford_circuit"):
    for K in (8, 32, 128):
        d = build_design(3, K, construction, seed=0)
        c = calibrate_distortion(d, 200, np.random.default_rng(4))
        print(f"{construction:24s} K={K:4d}  B_hat={c.B_hat:.3f}")
