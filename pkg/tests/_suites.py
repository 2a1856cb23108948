"""Fixed channel/batch collections shared by several test modules."""
from functools import lru_cache

import numpy as np

from qmllab.families import (
    basis_family,
    conditional_phase_family,
    constant_family,
    entangled_rotation_family,
)
from qmllab.learner import measure_and_mix
from qmllab.measure import build_design
from qmllab.oracle import ClassicalChannel
from qmllab.qcore import index_to_key


@lru_cache(maxsize=1)
def sampler_suite():
    """Twenty (channel, batch) pairs with at most four key bits."""
    specs = [
        (conditional_phase_family(3, 4), 3, 32, "haar_random", 0.5),
        (conditional_phase_family(2, 3), 2, 4, "random_clifford_circuit", 0.5),
        (entangled_rotation_family(2, 4, seed=1), 2, 16, "haar_random", 0.25),
        (entangled_rotation_family(3, 4, seed=2), 3, 8, "random_clifford_circuit", 0.5),
        (basis_family(2), 2, 4, "haar_random", 0.0),
        (constant_family(2, 2), 2, 4, "haar_random", 0.5),
        (entangled_rotation_family(1, 2, seed=3), 1, 2, "haar_random", 0.75),
    ]
    sizes = [1, 3, 8]
    cases = []
    rng = np.random.default_rng(99)
    for i in range(20):
        fam, n, K, construction, alpha = specs[i % len(specs)]
        design = build_design(n, K, construction, seed=i)
        ch = ClassicalChannel(fam, design, alpha)
        key = index_to_key(int(rng.integers(fam.num_keys)), fam.key_bits)
        batch = measure_and_mix(fam, key, design, sizes[i % 3], alpha, rng)
        cases.append((ch, batch))
    return tuple(cases)


def qmlh_family_suite():
    """Default eight-key-bit families for the failure-rate experiment."""
    return [
        ClassicalChannel(conditional_phase_family(4, 8), build_design(4, 16, seed=0), 0.5),
        ClassicalChannel(entangled_rotation_family(3, 8, seed=4), build_design(3, 32, seed=1), 0.5),
    ]
