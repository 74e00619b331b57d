"""Probe construction: build a probe set under which every pair of fault sets
is distinguishable while minimizing the length of the longest probe.

The construction sweeps fault-set pairs in a fixed canonical order and, for
each still-ambiguous pair, adds the shortest walk crossing one side of the
pair while avoiding the other. Local optimality of each added walk suffices
for the final set to achieve the global min-max probe length, which
``brute_force_minmax`` verifies independently on small graphs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np

from .network import (
    EdgeKey,
    FaultFamily,
    IdentifiabilityError,
    Network,
    Probe,
    edge_key,
    probe_length,
)


@dataclass(frozen=True, eq=False)
class ShortestPathTables:
    """All-pairs shortest distances (nats) plus predecessors for path rebuild.

    Unreachable pairs carry ``+inf`` distance and predecessor -1, never a
    sentinel number that could alias a real length.
    """

    vertex_order: tuple[int, ...]
    dist: np.ndarray
    pred: np.ndarray
    _vidx: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(
            self, "_vidx", {v: i for i, v in enumerate(self.vertex_order)}
        )

    def distance(self, u: int, v: int) -> float:
        return float(self.dist[self._vidx[u], self._vidx[v]])

    def path(self, u: int, v: int) -> list[int]:
        """Vertex sequence of one shortest path ``u -> v``; ``[]`` if unreachable."""
        i, j = self._vidx[u], self._vidx[v]
        if i == j:
            return [u]
        if not math.isfinite(self.dist[i, j]):
            return []
        rev = [j]
        while j != i:
            j = int(self.pred[i, j])
            rev.append(j)
        return [self.vertex_order[k] for k in reversed(rev)]


def floyd_warshall_with_paths(
    network: Network, excluded_edges: Iterable[tuple[int, int]] = ()
) -> ShortestPathTables:
    """All-pairs shortest paths in the subgraph with ``excluded_edges`` removed."""
    order = network.vertices
    vidx = {v: i for i, v in enumerate(order)}
    nv = len(order)
    excluded = {edge_key(*e) for e in excluded_edges}

    dist = np.full((nv, nv), math.inf)
    pred = np.full((nv, nv), -1, dtype=np.int64)
    np.fill_diagonal(dist, 0.0)
    for i in range(nv):
        pred[i, i] = i
    for ln in network.edges:
        if ln.key in excluded:
            continue
        i, j = vidx[ln.u], vidx[ln.v]
        dist[i, j] = dist[j, i] = ln.weight
        pred[i, j] = i
        pred[j, i] = j

    for k in range(nv):
        via = dist[:, k, None] + dist[None, k, :]
        better = via < dist
        dist = np.where(better, via, dist)
        pred = np.where(better, pred[k, None, :], pred)
    return ShortestPathTables(order, dist, pred)


def find_opt_probe(
    network: Network,
    monitors: Iterable[int],
    target_edges: Iterable[tuple[int, int]],
    tables: ShortestPathTables,
) -> Optional[Probe]:
    """Minimum-length probe traversing at least one target edge.

    Built as shortest-monitor-path + target edge + shortest-monitor-path on
    the same subgraph the tables were computed on. Ties are broken
    deterministically by (length, edge index, orientation, monitor ids).
    ``None`` when every candidate has infinite length.
    """
    monitors = sorted(monitors)
    if not monitors:
        return None
    targets = sorted(
        (network.edge_index(e) for e in target_edges)
    )
    best_key = None
    best_parts = None
    for eidx in targets:
        ln = network.edges[eidx]
        for orient, (a, b) in enumerate(((ln.u, ln.v), (ln.v, ln.u))):
            m_a = min(monitors, key=lambda m: (tables.distance(m, a), m))
            m_b = min(monitors, key=lambda m: (tables.distance(b, m), m))
            d_a = tables.distance(m_a, a)
            d_b = tables.distance(b, m_b)
            if not (math.isfinite(d_a) and math.isfinite(d_b)):
                continue
            length = d_a + ln.weight + d_b
            key = (length, eidx, orient, m_a, m_b)
            if best_key is None or key < best_key:
                best_key = key
                best_parts = (m_a, a, b, m_b)
    if best_parts is None:
        return None
    m_a, a, b, m_b = best_parts
    walk = tables.path(m_a, a) + tables.path(b, m_b)
    return Probe(tuple(walk))


def find_probe(
    network: Network,
    monitors: Iterable[int],
    f1: Iterable[tuple[int, int]],
    f2: Iterable[tuple[int, int]],
) -> Probe:
    """Shortest probe telling fault sets ``f1`` and ``f2`` apart.

    Considers walks through ``f1 - f2`` avoiding ``f2`` and walks through
    ``f2 - f1`` avoiding ``f1``, and returns the shorter candidate. Raises
    ``IdentifiabilityError`` when neither side admits a finite-length probe.
    """
    set1 = frozenset(edge_key(*e) for e in f1)
    set2 = frozenset(edge_key(*e) for e in f2)
    if set1 == set2:
        raise ValueError("fault sets are equal; nothing to distinguish")

    candidates: list[tuple[float, int, Probe]] = []
    for side, (through, avoid) in enumerate(
        ((set1 - set2, set2), (set2 - set1, set1))
    ):
        if not through:
            continue
        tables = floyd_warshall_with_paths(network, avoid)
        probe = find_opt_probe(network, monitors, through, tables)
        if probe is not None:
            candidates.append((probe_length(network, probe), side, probe))
    if not candidates:
        raise IdentifiabilityError(
            f"fault sets {sorted(set1)} and {sorted(set2)} are indistinguishable",
            pair=(set1, set2),
        )
    return min(candidates, key=lambda c: (c[0], c[1]))[2]


@dataclass
class ConstructionState:
    """Running tags of the construction sweep.

    Bit ``i`` of ``tags[F]`` is set exactly when probe ``i`` traverses some
    edge of ``F``; once two tags differ they differ forever, since later
    probes only touch higher bits.
    """

    tags: dict[frozenset[EdgeKey], int]
    probes: list[Probe] = field(default_factory=list)

    def register(self, probe: Probe) -> None:
        bit = 1 << len(self.probes)
        for fs in self.tags:
            if probe.covers_any(fs):
                self.tags[fs] |= bit
        self.probes.append(probe)


def construct_probes(
    network: Network,
    family: FaultFamily,
    *,
    drop_indistinguishable: bool = False,
) -> list[Probe]:
    """Probe set distinguishing every pair in ``family`` with optimal max length.

    Fault sets are visited sorted by (cardinality, edge ids) and pairs in
    lexicographic order, so identical inputs always yield identical probe
    lists. With ``drop_indistinguishable`` the later member of each
    impossible pair is discarded with a warning instead of raising.
    """
    family.validate(network)
    members = family.sorted_members()
    state = ConstructionState(tags={fs: 0 for fs in members})
    dropped: set[frozenset[EdgeKey]] = set()

    for fa, fb in combinations(members, 2):
        if fa in dropped or fb in dropped:
            continue
        if state.tags[fa] != state.tags[fb]:
            continue
        try:
            probe = find_probe(network, network.monitors, fa, fb)
        except IdentifiabilityError:
            if drop_indistinguishable:
                dropped.add(fb)
                warnings.warn(
                    f"dropping fault set {sorted(fb)}: indistinguishable from "
                    f"{sorted(fa)}",
                    stacklevel=2,
                )
                continue
            raise
        state.register(probe)
    return state.probes


def _signatures_by_length(
    network: Network, cap: int
) -> list[tuple[float, frozenset[int]]]:
    """Minimal length per reachable edge-set signature of monitor-to-monitor
    walks with at most ``cap`` traversals.

    Exact dynamic program over (traversal count, endpoint, used-edge set)
    states; revisiting an edge extends the walk without changing its
    signature, so arbitrary detours are covered.
    """
    weights = [ln.weight for ln in network.edges]
    best: dict[tuple[int, int], float] = {
        (m, 0): 0.0 for m in network.monitors
    }
    frontier = dict(best)
    sig_len: dict[int, float] = {}
    for _ in range(cap):
        nxt: dict[tuple[int, int], float] = {}
        for (v, mask), length in frontier.items():
            for nbr, eidx in network.neighbors(v):
                cand = length + weights[eidx]
                key = (nbr, mask | (1 << eidx))
                if cand < best.get(key, math.inf):
                    best[key] = cand
                    nxt[key] = cand
        frontier = nxt
        if not frontier:
            break
        for (v, mask), length in frontier.items():
            if v in network.monitors and mask:
                if length < sig_len.get(mask, math.inf):
                    sig_len[mask] = length

    out = []
    for mask, length in sig_len.items():
        sig = frozenset(i for i in range(len(network.edges)) if mask >> i & 1)
        out.append((length, sig))
    out.sort(key=lambda t: (t[0], sorted(t[1])))
    return out


def brute_force_minmax(
    network: Network, family: FaultFamily, walk_length_cap: int
) -> float:
    """Optimal min-max probe length by exhausting walks up to the traversal cap.

    Test oracle for ``construct_probes``: enumerates every achievable probe
    signature, then finds the smallest length L such that the walks of length
    <= L already identify the family. Intended for small networks only.
    """
    family.validate(network)
    if len(network.edges) > 20:
        raise ValueError("brute_force_minmax is an enumeration oracle for small networks")
    members = family.sorted_members()
    if len(members) <= 1:
        return 0.0

    fault_masks = []
    for fs in members:
        mask = 0
        for e in fs:
            mask |= 1 << network.edge_index(e)
        fault_masks.append(mask)

    sigs = _signatures_by_length(network, walk_length_cap)

    # Syndrome of a fault set = which active signatures intersect it.
    edge_mask_of_sig = []
    for _, sig in sigs:
        m = 0
        for i in sig:
            m |= 1 << i
        edge_mask_of_sig.append(m)

    active_count = 0
    syndromes: list[int] = [0 for _ in fault_masks]
    last_length = None
    idx = 0
    while idx < len(sigs):
        # Activate all signatures sharing the next length value, then test.
        length = sigs[idx][0]
        while idx < len(sigs) and sigs[idx][0] <= length + 1e-15:
            smask = edge_mask_of_sig[idx]
            bit = 1 << active_count
            for fi, fmask in enumerate(fault_masks):
                if fmask & smask:
                    syndromes[fi] |= bit
            active_count += 1
            idx += 1
        if len(set(syndromes)) == len(syndromes):
            return length
        last_length = length
    raise IdentifiabilityError(
        f"walk cap {walk_length_cap} exhausted before the family became "
        f"identifiable (last length tried: {last_length})"
    )


def max_probe_length(network: Network, probes: Sequence[Probe]) -> float:
    return max((probe_length(network, p) for p in probes), default=0.0)


def max_traversal_count(probes: Sequence[Probe]) -> int:
    return max((len(p.hops) for p in probes), default=0)


def recheck_identifiable(
    network: Network, probes: Sequence[Probe], family: FaultFamily
) -> None:
    """Re-verify a constructed probe set via signature comparison."""
    from .network import check_identifiable

    ok, pair = check_identifiable(network, probes, family)
    if not ok:
        raise IdentifiabilityError(
            f"probe set fails to distinguish {sorted(pair[0])} and {sorted(pair[1])}",
            pair=pair,
        )
