"""Per-link CUSUM bank for quickest detection and localization of a single
transmissivity drop, plus the brute-force GLR statistic that serves as its
correctness oracle and the analytic delay bounds.

The bank keeps one recursive CUSUM statistic per link hypothesis. Each step
it adds the joint log-likelihood ratio of that hypothesis (the sum over
covering probes; probes off the link contribute exactly zero) and clips at
zero. It stops the first time any statistic reaches the threshold and
localizes to the link with the largest statistic at that step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .network import (
    EdgeKey,
    IdentifiabilityError,
    Network,
    Probe,
    edge_key,
    probe_transmissivity,
    probes_covering,
)
from .probe_stats import (
    ObsModel,
    ProbeParams,
    build_obs_models,
    classical_kl,
    llr_coefficients,
    quantum_kl_per_pulse,
)


def cusum_step(stat: float, llr: float) -> float:
    """One recursive CUSUM update: max(0, stat + llr)."""
    return max(0.0, stat + llr)


def threshold_from_gamma(gamma: float, num_edges: int) -> float:
    """Threshold ln((|E|+1) * gamma) guaranteeing mean run length >= gamma."""
    if gamma < 1.0:
        raise ValueError("gamma must be >= 1")
    if num_edges < 1:
        raise ValueError("num_edges must be >= 1")
    return math.log((num_edges + 1) * gamma)


def gamma_from_threshold(h: float, num_edges: int) -> float:
    return math.exp(h) / (num_edges + 1)


@dataclass(frozen=True)
class ProbeTerm:
    """Per-(edge, probe) LLR contribution: a + b*S + d*S^2 of S = sum(obs)."""

    probe_index: int
    a: float
    b: float
    d: float


class LlrTables:
    """Precomputed per-(edge, probe) model pairs for every single-link hypothesis.

    Models are built once from probe geometry (end-to-end transmissivity and
    traversal multiplicity); they are time-invariant and shareable across
    engines and trials.
    """

    def __init__(
        self,
        network: Network,
        probes: Sequence[Probe],
        params: ProbeParams,
        eta_d: float,
    ):
        if not 0.0 < eta_d < 1.0:
            raise ValueError(f"drop factor {eta_d} must lie strictly in (0,1)")
        self.network = network
        self.probes: tuple[Probe, ...] = tuple(probes)
        self.params = params
        self.eta_d = eta_d
        self.block_size = params.n

        self.pre_models: tuple[ObsModel, ...] = tuple(
            build_obs_models(network, p, params)[0] for p in self.probes
        )
        self._post: dict[tuple[EdgeKey, int], ObsModel] = {}
        terms: list[tuple[ProbeTerm, ...]] = []
        for ln in network.edges:
            per_edge: list[ProbeTerm] = []
            for i, p in enumerate(self.probes):
                if not p.covers(ln.key):
                    continue
                pre, post = build_obs_models(network, p, params, (ln.key, eta_d))
                self._post[(ln.key, i)] = post
                a, b, d = llr_coefficients(pre, post)
                per_edge.append(ProbeTerm(i, a, b, d))
            terms.append(tuple(per_edge))
        self.terms: tuple[tuple[ProbeTerm, ...], ...] = tuple(terms)
        self._kernel_arrays = None

    def post_model(self, probe_index: int, e: tuple[int, int]) -> ObsModel:
        """Post-change model of one probe under a fault on ``e`` (pre if off-walk)."""
        return self._post.get(
            (edge_key(*e), probe_index), self.pre_models[probe_index]
        )

    def step_kl(self, e: tuple[int, int]) -> float:
        """Per-step divergence the bank accrues on the true-fault hypothesis."""
        key = edge_key(*e)
        total = 0.0
        for p in probes_covering(self.probes, key):
            eta_p = probe_transmissivity(self.network, p)
            drop = self.eta_d ** p.traversals(key)
            if self.params.kind == "classical":
                total += classical_kl(self.params, eta_p, drop)
            else:
                total += self.params.n * quantum_kl_per_pulse(self.params, eta_p, drop)
        return total

    def kernel_arrays(self) -> dict[str, np.ndarray]:
        """CSR-packed coefficients for the trial kernel (cached)."""
        if self._kernel_arrays is None:
            indptr = [0]
            pidx: list[int] = []
            ca: list[float] = []
            cb: list[float] = []
            cd: list[float] = []
            for per_edge in self.terms:
                for t in per_edge:
                    pidx.append(t.probe_index)
                    ca.append(t.a)
                    cb.append(t.b)
                    cd.append(t.d)
                indptr.append(len(pidx))
            self._kernel_arrays = {
                "indptr": np.asarray(indptr, dtype=np.int64),
                "pidx": np.asarray(pidx, dtype=np.int64),
                "ca": np.asarray(ca, dtype=np.float64),
                "cb": np.asarray(cb, dtype=np.float64),
                "cd": np.asarray(cd, dtype=np.float64),
            }
        return self._kernel_arrays


def build_llr_tables(
    network: Network, probes: Sequence[Probe], params: ProbeParams, eta_d: float
) -> LlrTables:
    return LlrTables(network, probes, params, eta_d)


@dataclass(frozen=True)
class StoppingResult:
    """First threshold crossing: stopping step, localized link, optional trace."""

    tau: int
    edge: EdgeKey
    stat_trace: Optional[tuple[float, ...]] = None


class CusumBank:
    """Bank of per-link CUSUM statistics driven by joint probe observations.

    Single-writer: ``step`` mutates state and must not be called concurrently
    on one instance. Distinct instances are independent.
    """

    def __init__(self, tables: LlrTables, threshold: float, record_trace: bool = False):
        if threshold <= 0.0:
            raise ValueError("threshold must be positive")
        self.tables = tables
        self.threshold = threshold
        self.stats = np.zeros(len(tables.network.edges))
        self.t = 0
        self._trace: Optional[list[float]] = [] if record_trace else None

    @property
    def statistics(self) -> dict[EdgeKey, float]:
        return {
            ln.key: float(self.stats[i])
            for i, ln in enumerate(self.tables.network.edges)
        }

    def _probe_sums(self, observations: Mapping[Probe, object]) -> list[float]:
        sums = []
        n = self.tables.block_size
        for p in self.tables.probes:
            if p not in observations:
                raise ValueError(f"missing observation for {p}")
            x = np.asarray(observations[p], dtype=float).reshape(-1)
            if x.size != n:
                raise ValueError(
                    f"observation for {p} has dim {x.size}, expected {n}"
                )
            sums.append(float(x.sum()))
        return sums

    def step(self, observations: Mapping[Probe, object]) -> Optional[StoppingResult]:
        """Advance one time step; returns a result at the first crossing."""
        sums = self._probe_sums(observations)
        self.t += 1
        best = -1.0
        best_edge = -1
        for e, per_edge in enumerate(self.tables.terms):
            llr = 0.0
            for term in per_edge:
                s = sums[term.probe_index]
                llr += term.a + term.b * s + term.d * s * s
            v = self.stats[e] + llr
            if v < 0.0:
                v = 0.0
            self.stats[e] = v
            if v > best:
                best = v
                best_edge = e
        if self._trace is not None:
            self._trace.append(best)
        if best >= self.threshold:
            return StoppingResult(
                tau=self.t,
                edge=self.tables.network.edges[best_edge].key,
                stat_trace=tuple(self._trace) if self._trace is not None else None,
            )
        return None


def glr_statistic(
    history: Sequence[Mapping[Probe, object]], tables: LlrTables
) -> tuple[float, Optional[EdgeKey], Optional[int]]:
    """Brute-force GLR: max over change points j and links e of the windowed
    LLR sum from j to now.

    Recomputed from the whole history each call (O(t^2 |E|)); this is the
    reference the recursive bank is checked against, not a production path.
    Returns (statistic floored at 0, best link, best start step); the link
    and start are None when every window sum is negative or history is empty.
    """
    if not history:
        return 0.0, None, None
    n = tables.block_size
    probe_sums = []
    for obs in history:
        row = []
        for p in tables.probes:
            x = np.asarray(obs[p], dtype=float).reshape(-1)
            if x.size != n:
                raise ValueError(f"observation for {p} has dim {x.size}, expected {n}")
            row.append(float(x.sum()))
        probe_sums.append(row)

    t_max = len(history)
    best = -math.inf
    best_edge: Optional[EdgeKey] = None
    best_start: Optional[int] = None
    for e, per_edge in enumerate(tables.terms):
        llr_series = []
        for row in probe_sums:
            llr = 0.0
            for term in per_edge:
                s = row[term.probe_index]
                llr += term.a + term.b * s + term.d * s * s
            llr_series.append(llr)
        for j in range(t_max):
            window = 0.0
            for i in range(j, t_max):
                window += llr_series[i]
            if window > best:
                best = window
                best_edge = tables.network.edges[e].key
                best_start = j + 1
    if best <= 0.0:
        return 0.0, None, None
    return best, best_edge, best_start


@dataclass(frozen=True)
class DelayBounds:
    """First-order detection-delay bracket at mean false-alarm time gamma.

    Asymptotic values: the (1 + o(1)) corrections that sharpen as gamma
    grows are omitted.
    """

    lower: float
    upper: float
    kl_per_step: float


def delay_bounds(
    network: Network,
    probes: Sequence[Probe],
    fault_edge: tuple[int, int],
    params: ProbeParams,
    eta_d: float,
    gamma: float,
) -> DelayBounds:
    """Universal lower bound ln(gamma)/sum(KL) and the bank's upper bound
    ln((|E|+1) gamma)/sum(KL) over the fault's covering probes."""
    tables = LlrTables(network, probes, params, eta_d)
    kl = tables.step_kl(fault_edge)
    if kl <= 0.0:
        raise IdentifiabilityError(
            f"unidentifiable edge {edge_key(*fault_edge)}: no probe covers it"
        )
    return DelayBounds(
        lower=math.log(gamma) / kl,
        upper=threshold_from_gamma(gamma, len(network.edges)) / kl,
        kl_per_step=kl,
    )
