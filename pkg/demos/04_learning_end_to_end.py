"""Learning an unknown key from copies of its state.

Measure T copies, mix with uniform noise, then sample from the sharpened
posterior. Success means the learned state is within trace distance
1/epsilon of the true one.
"""
# %%
import numpy as np

from qmllab.families import conditional_phase_family
from qmllab.learner import (
    ExperimentConfig,
    LearnerParams,
    calibrated_B_hat,
    epsilon_star,
    learn,
    learning_sample_count,
    run_learning_experiment,
)
from qmllab.measure import build_design

# %%
fam = conditional_phase_family(3, 4)
design = build_design(3, 32, seed=0)
B_hat = calibrated_B_hat(design).B_hat
print(f"B_hat={B_hat:.4f}  epsilon*={epsilon_star(4, B_hat):.3f}")
print("worst-case sample count:", learning_sample_count(4, 7, design.outcome_bits, fam.key_bits, B_hat))

# %%
res = learn(fam, design, "0110", LearnerParams(4, 7, T=128), np.random.default_rng(0))
print(f"learned {res.hypothesis} with trace distance {res.trace_distance:.3f} from T={res.T}")

# %% [markdown]
# Success rate against T. Small T fails often, the worst-case formula never.

# %%
for T in (8, 32, 128, None):
    cfg = {"family": {"name": "conditional_phase", "num_qubits": 3, "key_bits": 4},
           "design": {"K": 32, "seed": 0}, "epsilon": 4, "delta_bits": 7,
           "trials": 20, "master_seed": 0}
    if T is not None:
        cfg["T_override"] = T
    rep = run_learning_experiment(ExperimentConfig.from_dict(cfg))
    agg = rep.aggregate
    print(f"T={rep.parameters['T']:>10}  success={agg['success_rate']:.3f}  "
          f"worst key={agg['min_per_key_success_rate']:.3f}")
