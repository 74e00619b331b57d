"""Seeded Monte Carlo harness: probe observation streams, trial execution,
and the latency / localization-error metrics.

Each trial owns an independent RNG stream derived from (seed, family,
trial index), so enlarging a sweep never perturbs earlier trials, and the
same trial stream is replayed across thresholds (common random numbers).
Trials run through the selected kernel backend; aggregation is order
independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import _kernel
from .network import EdgeKey, FaultFamily, Network, Probe, edge_key
from .probe_stats import ObsModel, ProbeParams
from .qcd import LlrTables, gamma_from_threshold
from .tomography import construct_probes

CHUNK_STEPS = 1024

FAMILY_CODES = {"quantum": 0, "classical": 1}


def sample_observation(model: ObsModel, rng: np.random.Generator) -> np.ndarray:
    """One draw from the structured Gaussian in O(n).

    Uses the closed-form factorization of the covariance: independent
    residuals at scale 1/2 plus one shared component along the all-ones
    direction.
    """
    z = rng.standard_normal(model.dim)
    iso, shared = model.factor_coeffs()
    return model.mean + iso * z + shared * z.sum()


@dataclass(frozen=True)
class FaultSpec:
    """The injected ground truth: faulted link, drop factor, change step."""

    edge: EdgeKey
    eta_d: float
    nu: int

    def __post_init__(self):
        object.__setattr__(self, "edge", edge_key(*self.edge))
        if not 0.0 < self.eta_d < 1.0:
            raise ValueError(f"drop factor {self.eta_d} outside (0,1)")
        if self.nu < 1:
            raise ValueError("change step nu must be >= 1")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one experiment."""

    network: Network
    probes: tuple[Probe, ...]
    params: Mapping[str, ProbeParams]
    fault: Optional[FaultSpec]
    thresholds: tuple[float, ...]
    trials: int
    seed: int
    horizon: int
    eta_d: float  # drop hypothesis used by the detector's models

    def __post_init__(self):
        object.__setattr__(self, "probes", tuple(self.probes))
        object.__setattr__(self, "thresholds", tuple(float(h) for h in self.thresholds))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.thresholds:
            raise ValueError("need at least one threshold")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("threshold grid must be strictly increasing")
        for name in self.params:
            if name not in FAMILY_CODES:
                raise ValueError(f"unknown probe family {name!r}")


def default_horizon(nu: int) -> int:
    """Default trial cap: 50x the change point."""
    return 50 * nu


@dataclass(frozen=True)
class TrialOutcome:
    """One trial's result under the error rule: an error is an early stop
    (before the change), a wrong localized link, or no stop at all."""

    stopped: bool
    tau: Optional[int]
    edge: Optional[EdgeKey]
    error: bool
    reason: Optional[str]  # "early" | "wrong-edge" | "horizon" | None


@dataclass(frozen=True)
class AggregateMetrics:
    """Per-(family, threshold) aggregate over a batch of trials."""

    family: str
    h: float
    gamma: float
    trials: int
    errorfree: int
    mean_latency: Optional[float]
    error_prob: float
    mean_stop_time: float  # stopped trials count the stop, censored ones the horizon


class _FamilyRuntime:
    """Kernel-ready arrays for one (scenario, family): model tables, LLR
    coefficients, and pre/post sampling coefficients."""

    def __init__(self, config: ScenarioConfig, family: str):
        self.family = family
        self.params = config.params[family]
        self.tables = LlrTables(
            config.network, config.probes, self.params, config.eta_d
        )
        arrays = self.tables.kernel_arrays()
        self.indptr = arrays["indptr"]
        self.pidx = arrays["pidx"]
        self.ca = arrays["ca"]
        self.cb = arrays["cb"]
        self.cd = arrays["cd"]

        n = self.tables.block_size
        pre = self.tables.pre_models
        self.base_pre = np.array([n * m.mean for m in pre])
        self.scale_pre = np.array([m.sum_scale() for m in pre])
        if config.fault is not None:
            post = [
                self.tables.post_model(i, config.fault.edge)
                for i in range(len(pre))
            ]
            self.base_post = np.array([n * m.mean for m in post])
            self.scale_post = np.array([m.sum_scale() for m in post])
            self.nu = config.fault.nu
        else:
            self.base_post = self.base_pre
            self.scale_post = self.scale_pre
            self.nu = config.horizon + 1  # change never arrives
        self.n_block = n
        self.step_dims = len(pre) * n
        self.n_edges = len(config.network.edges)


def trial_rng(seed: int, family: str, trial_index: int) -> np.random.Generator:
    """Independent, reproducible stream for one (seed, family, trial)."""
    ss = np.random.SeedSequence(
        entropy=seed, spawn_key=(FAMILY_CODES[family], trial_index)
    )
    return np.random.Generator(np.random.PCG64(ss))


def _drive_kernel(
    runtime: _FamilyRuntime,
    h: float,
    horizon: int,
    rng: np.random.Generator,
    trace: Optional[list] = None,
) -> tuple[bool, int, int]:
    """Run one trial; returns (stopped, tau, lam_index)."""
    stats = np.zeros(runtime.n_edges)
    t = 1
    while t <= horizon:
        rows = min(CHUNK_STEPS, horizon - t + 1)
        z = rng.standard_normal((rows, runtime.step_dims))
        chunk_trace = None
        if trace is not None:
            chunk_trace = np.empty((rows, runtime.n_edges))
        stopped, used, tau, lam = _kernel.run_steps(
            stats,
            z,
            t,
            runtime.nu,
            h,
            runtime.base_pre,
            runtime.scale_pre,
            runtime.base_post,
            runtime.scale_post,
            runtime.n_block,
            runtime.indptr,
            runtime.pidx,
            runtime.ca,
            runtime.cb,
            runtime.cd,
            chunk_trace,
        )
        if trace is not None:
            trace.append(chunk_trace[:used].copy())
        if stopped:
            return True, tau, lam
        t += used
    return False, 0, -1


def _classify(
    config: ScenarioConfig, stopped: bool, tau: int, lam_index: int
) -> TrialOutcome:
    if not stopped:
        return TrialOutcome(False, None, None, True, "horizon")
    edge = config.network.edges[lam_index].key
    if config.fault is None or tau < config.fault.nu:
        return TrialOutcome(True, tau, edge, True, "early")
    if edge != config.fault.edge:
        return TrialOutcome(True, tau, edge, True, "wrong-edge")
    return TrialOutcome(True, tau, edge, False, None)


def run_trial(
    config: ScenarioConfig, family: str, trial_index: int, h: Optional[float] = None
) -> TrialOutcome:
    """Execute one seeded trial at threshold ``h`` (default: first of the grid)."""
    runtime = _FamilyRuntime(config, family)
    if h is None:
        h = config.thresholds[0]
    rng = trial_rng(config.seed, family, trial_index)
    stopped, tau, lam = _drive_kernel(runtime, h, config.horizon, rng)
    return _classify(config, stopped, tau, lam)


def _aggregate(
    config: ScenarioConfig, family: str, h: float, outcomes: Sequence[TrialOutcome]
) -> AggregateMetrics:
    errors = sum(1 for o in outcomes if o.error)
    good = [o for o in outcomes if not o.error]
    nu = config.fault.nu if config.fault is not None else None
    mean_latency = (
        sum(o.tau - nu for o in good) / len(good) if good and nu is not None else None
    )
    stops = [o.tau if o.stopped else config.horizon for o in outcomes]
    return AggregateMetrics(
        family=family,
        h=h,
        gamma=gamma_from_threshold(h, len(config.network.edges)),
        trials=len(outcomes),
        errorfree=len(good),
        mean_latency=mean_latency,
        error_prob=errors / len(outcomes),
        mean_stop_time=sum(stops) / len(outcomes),
    )


def run_sweep(
    config: ScenarioConfig, families: Iterable[str] = ("quantum", "classical")
) -> list[AggregateMetrics]:
    """Full (family x threshold x trial) grid, deterministic row order."""
    rows: list[AggregateMetrics] = []
    for family in sorted(families):
        if family not in config.params:
            raise ValueError(f"scenario has no parameters for family {family!r}")
        runtime = _FamilyRuntime(config, family)
        for h in config.thresholds:
            outcomes = []
            for trial_index in range(config.trials):
                rng = trial_rng(config.seed, family, trial_index)
                stopped, tau, lam = _drive_kernel(runtime, h, config.horizon, rng)
                outcomes.append(_classify(config, stopped, tau, lam))
            rows.append(_aggregate(config, family, h, outcomes))
    return rows


CSV_HEADER = "family,h,gamma,trials,errorfree,mean_latency,error_prob"


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def metrics_to_csv(rows: Sequence[AggregateMetrics]) -> str:
    """Fixed-schema CSV, floats at 6 significant digits, byte-deterministic."""
    lines = [CSV_HEADER]
    for r in sorted(rows, key=lambda r: (r.family, r.h)):
        latency = "" if r.mean_latency is None else _fmt(r.mean_latency)
        lines.append(
            ",".join(
                [
                    r.family,
                    _fmt(r.h),
                    _fmt(r.gamma),
                    str(r.trials),
                    str(r.errorfree),
                    latency,
                    _fmt(r.error_prob),
                ]
            )
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float


def fit_latency_slope(rows: Sequence[AggregateMetrics], family: str) -> SlopeFit:
    """Least-squares line of mean latency against threshold for one family."""
    pts = [
        (r.h, r.mean_latency)
        for r in rows
        if r.family == family and r.mean_latency is not None
    ]
    if len(pts) < 2:
        raise ValueError(f"need >= 2 latency points for family {family!r}")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), r2)


# -- scenario presets -------------------------------------------------------


def _family_params(N: float, squeeze_db: float) -> dict[str, ProbeParams]:
    quantum = ProbeParams.squeezed_db(N, squeeze_db)
    return {
        "quantum": quantum,
        "classical": ProbeParams.classical(N, quantum.N_a),
    }


def make_line_scenario(
    *,
    num_links: int = 5,
    eta: float = 0.9,
    fault_edge: Optional[tuple[int, int]] = (1, 2),
    eta_d: float = 0.95,
    nu: int = 1000,
    N: float = 100.0,
    squeeze_db: float = 6.0,
    thresholds: Sequence[float] = (10.0, 20.0, 30.0, 40.0, 50.0),
    trials: int = 1000,
    seed: int = 0,
    horizon: Optional[int] = None,
) -> ScenarioConfig:
    """Line-network scenario: uniform transmissivity, constructed probes."""
    from .network import build_line_topology

    network = build_line_topology(num_links, eta)
    probes = construct_probes(network, FaultFamily.single_link(network))
    fault = FaultSpec(fault_edge, eta_d, nu) if fault_edge is not None else None
    return ScenarioConfig(
        network=network,
        probes=tuple(probes),
        params=_family_params(N, squeeze_db),
        fault=fault,
        thresholds=tuple(thresholds),
        trials=trials,
        seed=seed,
        horizon=horizon if horizon is not None else default_horizon(nu),
        eta_d=eta_d,
    )


def make_fattree_scenario(
    *,
    eta: float = 0.9,
    fault_edge: Optional[tuple[int, int]] = (1, 16),
    eta_d: float = 0.95,
    nu: int = 1000,
    N: float = 100.0,
    squeeze_db: float = 10.0,
    thresholds: Sequence[float] = (10.0, 20.0, 30.0, 40.0, 50.0),
    trials: int = 1000,
    seed: int = 0,
    horizon: Optional[int] = None,
) -> ScenarioConfig:
    """Fat-tree scenario with its built-in loop-back probes.

    Defaults to 10 dB augmentation: the deeper loop-backs lose more light, so
    a stronger squeeze is needed for a clearly super-classical speedup.
    """
    from .network import build_fattree_topology

    network, probes = build_fattree_topology(eta)
    fault = FaultSpec(fault_edge, eta_d, nu) if fault_edge is not None else None
    return ScenarioConfig(
        network=network,
        probes=tuple(probes),
        params=_family_params(N, squeeze_db),
        fault=fault,
        thresholds=tuple(thresholds),
        trials=trials,
        seed=seed,
        horizon=horizon if horizon is not None else default_horizon(nu),
        eta_d=eta_d,
    )
