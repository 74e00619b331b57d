"""tapscout: probe routing and per-link CUSUM localization of transmissivity
drops in optical networks."""

from ._kernel import BACKEND as KERNEL_BACKEND
from .network import (
    FaultFamily,
    IdentifiabilityError,
    Network,
    Probe,
    TopologyError,
    build_fattree_topology,
    build_line_topology,
    check_identifiable,
    edge_weight,
    load_topology,
    parse_topology,
    probe_length,
    probe_transmissivity,
    probes_covering,
    save_topology,
)
from .probe_stats import (
    ChannelCondition,
    ObsModel,
    ProbeParams,
    build_obs_models,
    classical_kl,
    gaussian_kl,
    log_likelihood_ratio,
    network_speedup,
    quantum_kl_per_pulse,
    speedup_limits,
    speedup_ratio,
)
from .qcd import (
    CusumBank,
    DelayBounds,
    LlrTables,
    StoppingResult,
    build_llr_tables,
    cusum_step,
    delay_bounds,
    glr_statistic,
    threshold_from_gamma,
)
from .sim import (
    AggregateMetrics,
    FaultSpec,
    ScenarioConfig,
    TrialOutcome,
    fit_latency_slope,
    make_fattree_scenario,
    make_line_scenario,
    metrics_to_csv,
    run_sweep,
    run_trial,
    sample_observation,
)
from .tomography import (
    ShortestPathTables,
    brute_force_minmax,
    construct_probes,
    find_opt_probe,
    find_probe,
    floyd_warshall_with_paths,
)

__version__ = "0.1.0"
