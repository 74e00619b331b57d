"""Random small connected graphs for construction-vs-oracle comparisons."""

import numpy as np

from tapscout.network import FaultFamily, Network
from tapscout.tomography import brute_force_minmax


def random_connected_network(rng: np.random.Generator, max_edges: int = 6) -> Network:
    nv = int(rng.integers(3, 7))
    edges = set()
    for v in range(1, nv):
        u = int(rng.integers(0, v))
        edges.add((min(u, v), max(u, v)))
    limit = min(max_edges, nv * (nv - 1) // 2)
    while len(edges) < limit and rng.random() < 0.7:
        u, v = sorted(int(x) for x in rng.choice(nv, size=2, replace=False))
        edges.add((u, v))
    n_mon = int(rng.integers(2, 4))
    monitors = sorted(int(x) for x in rng.choice(nv, size=min(n_mon, nv), replace=False))
    return Network(
        range(nv),
        [(u, v, float(rng.uniform(0.5, 0.95))) for u, v in sorted(edges)],
        monitors,
    )


def random_identifiable_case(rng: np.random.Generator, max_edges: int = 6):
    """(network, single-link family, optimal min-max length) with the optimum
    certified by the walk-enumeration oracle; resamples until identifiable."""
    while True:
        network = random_connected_network(rng, max_edges)
        family = FaultFamily.single_link(network)
        cap = 2 * len(network.vertices) + 2
        try:
            optimum = brute_force_minmax(network, family, cap)
        except Exception:
            continue
        return network, family, optimum
