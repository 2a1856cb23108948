"""Distances between keyed pure states.

Builds a small keyed family, looks at pairwise fidelities, and checks that
the trace norm of a pure-state difference is sqrt(2) times its Frobenius norm.
"""
# %%
import math

import numpy as np

from qmllab.families import conditional_phase_family
from qmllab.metrics import kl_divergence, pinsker_check, total_variation
from qmllab.qcore import (
    family_states,
    fidelity_matrix,
    frobenius_distance,
    generate_state,
    random_pure_state,
    trace_distance_mixed,
    trace_distance_pure,
    trace_norm,
)

# %% [markdown]
# Sixteen keys on three qubits. Keys that differ in one bit give states with
# fidelity 1/2, so the family is well separated.

# %%
fam = conditional_phase_family(3, 4)
F = fidelity_matrix(family_states(fam), family_states(fam))
np.set_printoptions(precision=2, suppress=True)
print("fidelities against key 0000:", F[0])

# %%
a, b = generate_state(fam, "0000"), generate_state(fam, "0110")
print("trace distance", trace_distance_pure(a, b))
print("mixed-state formula", trace_distance_mixed(a.density_matrix(), b.density_matrix()))

# %% [markdown]
# For pure states the difference of projectors has rank two, so its trace
# norm is fixed by its Frobenius norm.

# %%
rng = np.random.default_rng(0)
worst = 0.0
for n in range(1, 7):
    for _ in range(20):
        ra = random_pure_state(n, rng).density_matrix()
        rb = random_pure_state(n, rng).density_matrix()
        gap = trace_norm(ra.entries - rb.entries) - math.sqrt(2) * frobenius_distance(ra, rb)
        worst = max(worst, abs(gap))
print(f"largest deviation over 120 pairs: {worst:.1e}")

# %% [markdown]
# Classical side: KL divergence always dominates 2 TV^2 in nats.

# %%
p, q = rng.dirichlet(np.ones(32)), rng.dirichlet(np.ones(32))
chk = pinsker_check(p, q)
print(f"KL={kl_divergence(p, q):.4f}  TV={total_variation(p, q):.4f}  holds={chk.holds}")
