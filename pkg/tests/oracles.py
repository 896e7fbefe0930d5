"""Independent test oracles, kept deliberately naive."""

import itertools

from chaconlab.cocycle import FinAbGroup, combine_pairs


def brute_reachable(gens, group: FinAbGroup, bound: int) -> set:
    """All (z, coords) hit by integer combinations with coefficients in [-bound, bound]."""
    reach = set()
    for coeffs in itertools.product(range(-bound, bound + 1), repeat=len(gens)):
        z, g = combine_pairs(coeffs, gens, group)
        reach.add((z, g.coords))
    return reach


def random_span_instance(rng, max_order: int = 8, max_gens: int = 3, z_bound: int = 4):
    """A small random group, generator pairs, and a target pair."""
    factor_menu = [(2,), (3,), (4,), (5,), (6,), (7,), (8,), (2, 2), (2, 4), (2, 3), (1,)]
    factors = factor_menu[int(rng.integers(0, len(factor_menu)))]
    group = FinAbGroup(factors)
    assert group.order <= max_order
    n_gens = int(rng.integers(1, max_gens + 1))
    gens = [
        (int(rng.integers(-z_bound, z_bound + 1)), group.sample(rng))
        for _ in range(n_gens)
    ]
    target = (int(rng.integers(-z_bound, z_bound + 1)), group.sample(rng))
    return group, gens, target
