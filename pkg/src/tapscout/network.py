"""Optical network model: transmissivity-weighted graphs, monitor-anchored
probe walks, fault sets, and the identifiability relation between them.

Link weights are natural logs, ``w(e) = -ln(eta_e)``, so weights add along a
walk while transmissivities multiply. All types here are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

EdgeKey = tuple[int, int]


class TopologyError(ValueError):
    """Malformed network, probe, or topology file (carries a line number when parsing)."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IdentifiabilityError(ValueError):
    """A pair of fault sets cannot be told apart by any admissible probe."""

    def __init__(self, message: str, pair=None):
        super().__init__(message)
        self.pair = pair


def edge_key(u: int, v: int) -> EdgeKey:
    """Canonical unordered key for the link between ``u`` and ``v``."""
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class Link:
    """One undirected link with transmissivity ``eta`` in the open interval (0, 1)."""

    u: int
    v: int
    eta: float

    @property
    def key(self) -> EdgeKey:
        return (self.u, self.v)

    @property
    def weight(self) -> float:
        return -math.log(self.eta)


class Network:
    """Undirected graph with per-link transmissivity and a set of monitor nodes.

    Monitors are the nodes able to send and receive probes; every other node
    is a passive switch. Degenerate transmissivities (0 or 1) are rejected so
    that every weight is positive and finite.
    """

    def __init__(
        self,
        vertices: Iterable[int],
        edges: Iterable[tuple[int, int, float]],
        monitors: Iterable[int],
    ):
        self.vertices: tuple[int, ...] = tuple(vertices)
        if len(set(self.vertices)) != len(self.vertices):
            raise TopologyError("duplicate vertex ids")
        vset = set(self.vertices)

        links: list[Link] = []
        index: dict[EdgeKey, int] = {}
        for u, v, eta in edges:
            if u not in vset or v not in vset:
                raise TopologyError(f"edge ({u},{v}) references an unknown vertex")
            if u == v:
                raise TopologyError(f"self-loop at vertex {u}")
            if not 0.0 < eta < 1.0:
                raise TopologyError(
                    f"edge ({u},{v}) has transmissivity {eta}; must lie strictly in (0,1)"
                )
            key = edge_key(u, v)
            if key in index:
                raise TopologyError(f"duplicate edge ({u},{v})")
            index[key] = len(links)
            links.append(Link(key[0], key[1], float(eta)))
        self.edges: tuple[Link, ...] = tuple(links)
        self._index = index

        self.monitors: frozenset[int] = frozenset(monitors)
        if not self.monitors:
            raise TopologyError("monitor set is empty")
        if not self.monitors <= vset:
            bad = sorted(self.monitors - vset)
            raise TopologyError(f"monitors {bad} are not vertices")

        adj: dict[int, list[tuple[int, int]]] = {v: [] for v in self.vertices}
        for i, ln in enumerate(self.edges):
            adj[ln.u].append((ln.v, i))
            adj[ln.v].append((ln.u, i))
        self._adj = {v: tuple(nbrs) for v, nbrs in adj.items()}

    # -- lookups ---------------------------------------------------------

    def edge_index(self, e: tuple[int, int]) -> int:
        key = edge_key(*e)
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"no edge {key} in network") from None

    def has_edge(self, e: tuple[int, int]) -> bool:
        return edge_key(*e) in self._index

    def link(self, e: tuple[int, int]) -> Link:
        return self.edges[self.edge_index(e)]

    def eta(self, e: tuple[int, int]) -> float:
        return self.link(e).eta

    def weight(self, e: tuple[int, int]) -> float:
        """Link weight ``-ln(eta_e)`` in nats."""
        return self.link(e).weight

    def neighbors(self, v: int) -> tuple[tuple[int, int], ...]:
        """Pairs ``(neighbor, edge_index)`` incident to ``v``."""
        return self._adj[v]

    def edge_keys(self) -> tuple[EdgeKey, ...]:
        return tuple(ln.key for ln in self.edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.vertices == other.vertices
            and self.edges == other.edges
            and self.monitors == other.monitors
        )

    def __repr__(self) -> str:
        return (
            f"Network(|V|={len(self.vertices)}, |E|={len(self.edges)}, "
            f"monitors={sorted(self.monitors)})"
        )


def edge_weight(network: Network, e: tuple[int, int]) -> float:
    """Weight of one link in nats; raises ``KeyError`` for unknown edges."""
    return network.weight(e)


@dataclass(frozen=True)
class Probe:
    """A walk between monitors, stored as its vertex sequence.

    Cycles and repeated edges are allowed; loop-backs (equal endpoints) are
    common. Each traversal of an edge counts separately toward the probe's
    length and end-to-end transmissivity.
    """

    walk: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "walk", tuple(self.walk))
        if len(self.walk) < 2:
            raise TopologyError(f"probe walk {self.walk} has no edges")

    @cached_property
    def hops(self) -> tuple[EdgeKey, ...]:
        """Edge keys in traversal order."""
        return tuple(edge_key(a, b) for a, b in zip(self.walk, self.walk[1:]))

    @cached_property
    def edge_multiplicity(self) -> dict[EdgeKey, int]:
        """Map edge -> number of traversals (>= 1 for edges on the walk)."""
        return dict(Counter(self.hops))

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.walk[0], self.walk[-1])

    def traversals(self, e: tuple[int, int]) -> int:
        return self.edge_multiplicity.get(edge_key(*e), 0)

    def covers(self, e: tuple[int, int]) -> bool:
        return self.traversals(e) >= 1

    def covers_any(self, edges: Iterable[tuple[int, int]]) -> bool:
        return any(self.covers(e) for e in edges)

    def __repr__(self) -> str:
        return "Probe(" + "-".join(str(v) for v in self.walk) + ")"


def validate_probe(network: Network, probe: Probe) -> None:
    """Check incidence and monitor endpoints; raises ``TopologyError``."""
    for a, b in zip(probe.walk, probe.walk[1:]):
        if not network.has_edge((a, b)):
            raise TopologyError(f"probe {probe} uses missing edge ({a},{b})")
    for v in probe.endpoints:
        if v not in network.monitors:
            raise TopologyError(f"probe {probe} endpoint {v} is not a monitor")


def probe_length(network: Network, probe: Probe) -> float:
    """Walk length in nats, counting every traversal."""
    return sum(m * network.weight(e) for e, m in probe.edge_multiplicity.items())


def probe_transmissivity(
    network: Network,
    probe: Probe,
    fault: Optional[tuple[tuple[int, int], float]] = None,
) -> float:
    """End-to-end transmissivity of a probe, optionally under a faulted link.

    A fault ``(e, eta_d)`` multiplies the result by ``eta_d ** m`` where ``m``
    is the number of times the walk traverses ``e``; a fault off the walk
    leaves the value unchanged.
    """
    out = 1.0
    for e, m in probe.edge_multiplicity.items():
        out *= network.eta(e) ** m
    if fault is not None:
        e_star, eta_d = fault
        if not 0.0 < eta_d < 1.0:
            raise ValueError(f"drop factor {eta_d} must lie strictly in (0,1)")
        out *= eta_d ** probe.traversals(e_star)
    return out


def probes_covering(probes: Iterable[Probe], e: tuple[int, int]) -> list[Probe]:
    """The probes whose walk traverses ``e`` at least once, in input order."""
    return [p for p in probes if p.covers(e)]


@dataclass(frozen=True)
class FaultFamily:
    """The candidate fault sets to be told apart (the empty set is legal)."""

    faults: tuple[frozenset[EdgeKey], ...]

    @classmethod
    def of(cls, fault_sets: Iterable[Iterable[tuple[int, int]]]) -> "FaultFamily":
        canon = tuple(frozenset(edge_key(*e) for e in fs) for fs in fault_sets)
        if len(set(canon)) != len(canon):
            raise ValueError("fault family contains duplicate members")
        return cls(canon)

    @classmethod
    def single_link(cls, network: Network) -> "FaultFamily":
        """All singleton link faults plus the no-fault member."""
        members: list[frozenset[EdgeKey]] = [frozenset()]
        members.extend(frozenset([ln.key]) for ln in network.edges)
        return cls(tuple(members))

    def validate(self, network: Network) -> None:
        for fs in self.faults:
            for e in fs:
                if not network.has_edge(e):
                    raise TopologyError(f"fault set {sorted(fs)} uses missing edge {e}")

    def sorted_members(self) -> list[frozenset[EdgeKey]]:
        """Canonical order: by cardinality, then lexicographic edge ids."""
        return sorted(self.faults, key=lambda fs: (len(fs), sorted(fs)))

    def __len__(self) -> int:
        return len(self.faults)


def fault_signature(probes: Sequence[Probe], fault: frozenset[EdgeKey]) -> frozenset[int]:
    """Indices of the probes that traverse some edge of ``fault``."""
    return frozenset(i for i, p in enumerate(probes) if p.covers_any(fault))


def check_identifiable(
    network: Network, probes: Sequence[Probe], family: FaultFamily
) -> tuple[bool, Optional[tuple[frozenset[EdgeKey], frozenset[EdgeKey]]]]:
    """Whether every pair of distinct fault sets maps to distinct probe subsets.

    Returns ``(True, None)`` when identifiable, else ``(False, (f1, f2))``
    with the first colliding pair in canonical member order.
    """
    family.validate(network)
    probes = list(probes)
    seen: dict[frozenset[int], frozenset[EdgeKey]] = {}
    for fs in family.sorted_members():
        sig = fault_signature(probes, fs)
        if sig in seen:
            return False, (seen[sig], fs)
        seen[sig] = fs
    return True, None


# -- topology builders ----------------------------------------------------


def build_line_topology(num_links: int, eta: float) -> Network:
    """Path graph ``0 - 1 - ... - num_links`` with uniform transmissivity and
    monitors at both ends."""
    if num_links < 1:
        raise ValueError("num_links must be >= 1")
    vertices = range(num_links + 1)
    edges = [(i, i + 1, eta) for i in range(num_links)]
    return Network(vertices, edges, {0, num_links})


def build_fattree_topology(eta: float) -> tuple[Network, list[Probe]]:
    """48-link 3-tier fat-tree with 16 monitor qNICs and its 48 loop-back probes.

    Vertices: qNICs 0-15 (monitors), aggregation 16-23, spine 24-31, core
    32-35. Each qNIC q contributes three nested loop-backs (2, 4 and 6
    traversals) through its aggregation/spine/core column, which together
    identify every single-link fault.
    """
    vertices = range(36)
    edges: list[tuple[int, int, float]] = []
    for q in range(16):
        edges.append((q, 16 + q // 2, eta))
    for pod in range(4):
        for agg in (16 + 2 * pod, 17 + 2 * pod):
            for spine in (24 + 2 * pod, 25 + 2 * pod):
                edges.append((agg, spine, eta))
    for spine in (24, 26, 28, 30):
        for core in (32, 33):
            edges.append((spine, core, eta))
    for spine in (25, 27, 29, 31):
        for core in (34, 35):
            edges.append((spine, core, eta))
    network = Network(vertices, edges, set(range(16)))

    probes: list[Probe] = []
    core_of = {0: 32, 1: 34, 2: 33, 3: 35}
    for q in range(16):
        pod, slot = divmod(q, 4)
        agg = 16 + q // 2
        spine = (24 + 2 * pod) if slot in (0, 2) else (25 + 2 * pod)
        core = core_of[slot]
        probes.append(Probe((q, agg, q)))
        probes.append(Probe((q, agg, spine, agg, q)))
        probes.append(Probe((q, agg, spine, core, spine, agg, q)))
    for p in probes:
        validate_probe(network, p)
    return network, probes


# -- line-oriented topology text format ------------------------------------


def parse_topology(text: str) -> tuple[Network, list[Probe]]:
    """Parse the ``node`` / ``edge`` / ``probe`` text format.

    Parsing is strict: unknown keywords, dangling vertices, malformed values,
    and non-monitor probe endpoints all raise ``TopologyError`` carrying the
    offending line number.
    """
    vertices: list[int] = []
    monitors: set[int] = set()
    edges: list[tuple[int, int, float]] = []
    probe_walks: list[tuple[list[int], int]] = []

    def parse_int(tok: str, lineno: int, what: str) -> int:
        try:
            return int(tok)
        except ValueError:
            raise TopologyError(f"invalid {what} {tok!r}", lineno) from None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind, args = tokens[0], tokens[1:]
        if kind == "node":
            if len(args) not in (1, 2) or (len(args) == 2 and args[1] != "monitor"):
                raise TopologyError("expected 'node <id> [monitor]'", lineno)
            vid = parse_int(args[0], lineno, "vertex id")
            if vid in vertices:
                raise TopologyError(f"duplicate node {vid}", lineno)
            vertices.append(vid)
            if len(args) == 2:
                monitors.add(vid)
        elif kind == "edge":
            if len(args) != 3:
                raise TopologyError("expected 'edge <u> <v> <eta>'", lineno)
            u = parse_int(args[0], lineno, "vertex id")
            v = parse_int(args[1], lineno, "vertex id")
            try:
                eta = float(args[2])
            except ValueError:
                raise TopologyError(f"invalid transmissivity {args[2]!r}", lineno) from None
            for w in (u, v):
                if w not in vertices:
                    raise TopologyError(f"edge references undeclared node {w}", lineno)
            if not 0.0 < eta < 1.0:
                raise TopologyError(f"transmissivity {eta} outside (0,1)", lineno)
            if any(edge_key(u, v) == edge_key(a, b) for a, b, _ in edges):
                raise TopologyError(f"duplicate edge ({u},{v})", lineno)
            if u == v:
                raise TopologyError(f"self-loop at node {u}", lineno)
            edges.append((u, v, eta))
        elif kind == "probe":
            if len(args) < 2:
                raise TopologyError("probe needs at least two vertices", lineno)
            walk = [parse_int(t, lineno, "vertex id") for t in args]
            probe_walks.append((walk, lineno))
        else:
            raise TopologyError(f"unknown keyword {kind!r}", lineno)

    if not monitors:
        raise TopologyError("no monitors declared")
    network = Network(vertices, edges, monitors)

    probes: list[Probe] = []
    for walk, lineno in probe_walks:
        probe = Probe(tuple(walk))
        try:
            validate_probe(network, probe)
        except TopologyError as exc:
            raise TopologyError(str(exc), lineno) from None
        probes.append(probe)
    return network, probes


def format_topology(network: Network, probes: Sequence[Probe] = ()) -> str:
    """Serialize to the line-oriented text format (round-trips with parse)."""
    lines = []
    for v in network.vertices:
        lines.append(f"node {v} monitor" if v in network.monitors else f"node {v}")
    for ln in network.edges:
        lines.append(f"edge {ln.u} {ln.v} {ln.eta!r}")
    for p in probes:
        lines.append("probe " + " ".join(str(v) for v in p.walk))
    return "\n".join(lines) + "\n"


def load_topology(path) -> tuple[Network, list[Probe]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_topology(fh.read())


def save_topology(path, network: Network, probes: Sequence[Probe] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_topology(network, probes))
