# shared/utils/rng.py
"""
Deterministic random streams.

Every stochastic job (a model fit, a predictive simulation, a synthetic
bundle) draws from its own ``numpy`` generator whose ``SeedSequence`` entropy
is the master seed followed by the job's identifying components. Distinct
component tuples give independent streams, so parallel scheduling never
changes a draw.
"""
import hashlib
from typing import Union

import numpy as np

Component = Union[int, str]


def component_key(component: Component) -> int:
    """Map a stream component to a non-negative integer."""
    if isinstance(component, (bool, np.bool_)):
        return int(component)
    if isinstance(component, (int, np.integer)):
        value = int(component)
        # keep negative ints distinct from positive ones
        return value * 2 if value >= 0 else (-value) * 2 - 1
    digest = hashlib.sha256(str(component).encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little')


def derive_seed_sequence(master_seed: int, *components: Component) -> np.random.SeedSequence:
    entropy = [component_key(master_seed)] + [component_key(c) for c in components]
    return np.random.SeedSequence(entropy)


def derive_rng(master_seed: int, *components: Component) -> np.random.Generator:
    """Generator for the stream identified by (master seed, components...)"""
    return np.random.default_rng(derive_seed_sequence(master_seed, *components))


def derive_seed(master_seed: int, *components: Component) -> int:
    """Integer seed for APIs that take one (stored in posterior summaries)"""
    state = derive_seed_sequence(master_seed, *components).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])
