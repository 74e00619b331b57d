"""Command-line front end.

Subcommands: ``topology`` (emit preset topology files), ``build-probes``,
``analyze-kl``, and ``simulate``. Data goes to standard output or files;
diagnostics go to standard error; the exit code is non-zero on any error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

from . import __version__
from .network import (
    build_fattree_topology,
    build_line_topology,
    FaultFamily,
    format_topology,
    load_topology,
)
from .probe_stats import (
    ProbeParams,
    classical_kl,
    quantum_kl_per_pulse,
    speedup_limits,
    speedup_ratio,
)
from .qcd import threshold_from_gamma
from .sim import (
    default_horizon,
    FaultSpec,
    make_fattree_scenario,
    make_line_scenario,
    metrics_to_csv,
    run_sweep,
    ScenarioConfig,
)
from .tomography import (
    construct_probes,
    max_probe_length,
    max_traversal_count,
    recheck_identifiable,
)


def _read_config_file(path: str) -> dict[str, str]:
    """key=value per line, '#' comments; values stay strings."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _merge_config(args: argparse.Namespace, keys: dict[str, type]) -> None:
    """Fill unset (None) options from the optional config file; flags win."""
    if not getattr(args, "config", None):
        return
    values = _read_config_file(args.config)
    for key, caster in keys.items():
        if getattr(args, key, None) is None and key in values:
            setattr(args, key, caster(values[key]))


def _grid(spec: str) -> list[float]:
    """Parse 'lo:hi:steps' into an inclusive evenly spaced grid, or a
    comma/single value list."""
    if ":" in spec:
        lo_s, hi_s, n_s = spec.split(":")
        lo, hi, n = float(lo_s), float(hi_s), int(n_s)
        if n < 1:
            raise ValueError("grid needs at least one step")
        if n == 1:
            return [lo]
        return [lo + (hi - lo) * i / (n - 1) for i in range(n)]
    return [float(tok) for tok in spec.split(",")]


def _parse_edge(spec: str) -> tuple[int, int]:
    try:
        u, v = spec.split("-")
        return int(u), int(v)
    except ValueError:
        raise ValueError(f"bad edge {spec!r}; expected 'u-v'") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- topology ---------------------------------------------------------------


def cmd_topology(args) -> int:
    if args.preset == "line5":
        network = build_line_topology(args.links, args.eta)
        probes = []
    elif args.preset == "fattree3":
        network, probes = build_fattree_topology(args.eta)
    else:
        raise ValueError(f"unknown preset {args.preset!r}")
    _emit(format_topology(network, probes), args.out)
    return 0


# -- build-probes -------------------------------------------------------------


def _builtin_probes_for(network):
    etas = {ln.eta for ln in network.edges}
    if len(etas) != 1:
        raise ValueError("builtin probes need a uniform-transmissivity fat-tree")
    reference, probes = build_fattree_topology(etas.pop())
    if network != reference:
        raise ValueError("builtin probes are only defined for the fat-tree preset")
    return probes


def cmd_build_probes(args) -> int:
    network, _ = load_topology(args.topology)
    family = FaultFamily.single_link(network)
    if args.probes == "builtin":
        probes = _builtin_probes_for(network)
    else:
        probes = construct_probes(network, family)
    recheck_identifiable(network, probes, family)

    lines = "".join("probe " + " ".join(map(str, p.walk)) + "\n" for p in probes)
    summary = (
        f"probes={len(probes)} max_length_nats={max_probe_length(network, probes):.6g} "
        f"max_traversals={max_traversal_count(probes)}"
    )
    if args.out:
        Path(args.out).write_text(lines)
        print(summary)
    else:
        sys.stdout.write(lines)
        print(summary, file=sys.stderr)
    return 0


# -- analyze-kl ---------------------------------------------------------------


_ANALYZE_KEYS = {
    "N": float,
    "Na": float,
    "squeeze_db": float,
    "n": int,
    "eta": float,
    "eta_d": float,
}


def _analyze_params(args) -> ProbeParams:
    if args.Na is not None and args.squeeze_db is not None:
        raise ValueError("give either --Na or --squeeze-db, not both")
    if args.Na is not None:
        return ProbeParams.quantum(args.N, args.Na, args.n)
    if args.squeeze_db is not None:
        if args.n != 1:
            raise ValueError("--squeeze-db describes the n=1 family; use --Na for n>1")
        return ProbeParams.squeezed_db(args.N, args.squeeze_db)
    raise ValueError("need --Na or --squeeze-db")


def _analyze_row(params: ProbeParams, eta: float, eta_d: float) -> dict[str, float]:
    comparator = ProbeParams.classical(params.N, params.N_a)
    return {
        "classical_kl": classical_kl(comparator, eta, eta_d),
        "quantum_kl_per_pulse": quantum_kl_per_pulse(params, eta, eta_d),
        "speedup_ratio": speedup_ratio(params, eta, eta_d),
    }


def cmd_analyze_kl(args) -> int:
    _merge_config(args, _ANALYZE_KEYS)
    for key in ("N", "n", "eta", "eta_d"):
        if getattr(args, key) is None:
            raise ValueError(f"missing --{key.replace('_', '-')}")
    params = _analyze_params(args)

    if args.sweep:
        var, _, grid_spec = args.sweep.partition("=")
        var = var.strip().replace("-", "_")
        if var not in _ANALYZE_KEYS or var == "squeeze_db":
            raise ValueError(f"cannot sweep {var!r}")
        values = _grid(grid_spec)
        print("N,N_a,n,eta,eta_d,classical_kl,quantum_kl_per_pulse,speedup_ratio")
        for value in values:
            point = {
                "N": params.N,
                "Na": params.N_a,
                "n": params.n,
                "eta": args.eta,
                "eta_d": args.eta_d,
            }
            point[var] = int(value) if var == "n" else value
            p = ProbeParams.quantum(point["N"], point["Na"], point["n"])
            row = _analyze_row(p, point["eta"], point["eta_d"])
            print(
                f"{point['N']:.6g},{point['Na']:.6g},{point['n']},"
                f"{point['eta']:.6g},{point['eta_d']:.6g},"
                f"{row['classical_kl']:.6g},{row['quantum_kl_per_pulse']:.6g},"
                f"{row['speedup_ratio']:.6g}"
            )
        return 0

    row = _analyze_row(params, args.eta, args.eta_d)
    print(f"N                    {params.N:.6g}")
    print(f"N_a                  {params.N_a:.6g}")
    print(f"n                    {params.n}")
    print(f"eta                  {args.eta:.6g}")
    print(f"eta_d                {args.eta_d:.6g}")
    for key, value in row.items():
        print(f"{key:<20} {value:.6g}")
    try:
        limits = speedup_limits(params, args.eta, args.eta_d)
        print(f"drop_contrast        {limits.drop_contrast:.6g}")
        print(f"block_size_floor     {limits.block_size_floor:.6g}")
        print(f"aug_photon_knee      {limits.aug_photon_knee:.6g}")
        print(f"low_eta_limit        {limits.low_eta_limit:.6g}")
        print(f"small_drop_limit     {limits.small_drop_limit:.6g}")
        print(f"large_signal_limit   {limits.large_signal_limit:.6g}")
        print(f"large_block_limit    {limits.large_block_limit:.6g}")
    except ValueError as exc:
        print(f"limits               n/a ({exc})", file=sys.stderr)
    return 0


# -- simulate -----------------------------------------------------------------


_SIMULATE_KEYS = {
    "scenario": str,
    "topology": str,
    "probes": str,
    "families": str,
    "h": str,
    "gamma": str,
    "trials": int,
    "seed": int,
    "fault_edge": str,
    "eta": float,
    "eta_d": float,
    "nu": int,
    "N": float,
    "squeeze_db": float,
    "horizon": int,
}


def _build_scenario(args) -> ScenarioConfig:
    thresholds = None
    if args.h is not None:
        thresholds = sorted(_grid(args.h))

    def pick(value, default):
        return default if value is None else value

    if args.scenario in ("line5", "fattree3"):
        maker = make_line_scenario if args.scenario == "line5" else make_fattree_scenario
        kwargs = dict(
            eta=pick(args.eta, 0.9),
            eta_d=pick(args.eta_d, 0.95),
            nu=pick(args.nu, 1000),
            N=pick(args.N, 100.0),
            trials=pick(args.trials, 1000),
            seed=pick(args.seed, 0),
            horizon=args.horizon,
        )
        if args.squeeze_db is not None:
            kwargs["squeeze_db"] = args.squeeze_db
        if args.fault_edge is not None:
            kwargs["fault_edge"] = _parse_edge(args.fault_edge)
        if thresholds is not None:
            kwargs["thresholds"] = thresholds
        config = maker(**kwargs)
    elif args.topology is not None:
        network, file_probes = load_topology(args.topology)
        probe_mode = pick(args.probes, "constructed")
        if probe_mode == "builtin":
            probes = _builtin_probes_for(network)
        elif probe_mode == "constructed":
            probes = construct_probes(network, FaultFamily.single_link(network))
        elif probe_mode == "file":
            if not file_probes:
                raise ValueError("topology file carries no probe lines")
            probes = file_probes
        else:
            raise ValueError(f"unknown probe mode {probe_mode!r}")
        quantum = (
            ProbeParams.squeezed_db(pick(args.N, 100.0), pick(args.squeeze_db, 6.0))
        )
        nu = pick(args.nu, 1000)
        fault = None
        if args.fault_edge is not None:
            fault = FaultSpec(_parse_edge(args.fault_edge), pick(args.eta_d, 0.95), nu)
        config = ScenarioConfig(
            network=network,
            probes=tuple(probes),
            params={
                "quantum": quantum,
                "classical": ProbeParams.classical(quantum.N, quantum.N_a),
            },
            fault=fault,
            thresholds=tuple(thresholds or (10.0, 20.0, 30.0, 40.0, 50.0)),
            trials=pick(args.trials, 1000),
            seed=pick(args.seed, 0),
            horizon=pick(args.horizon, default_horizon(nu)),
            eta_d=pick(args.eta_d, 0.95),
        )
    else:
        raise ValueError("need --scenario or --topology")
    return config


def _config_echo(args, config: ScenarioConfig) -> dict:
    return {
        "scenario": args.scenario,
        "topology": args.topology,
        "probes": len(config.probes),
        "families": sorted(args.families.split(",")) if args.families else ["classical", "quantum"],
        "thresholds": list(config.thresholds),
        "trials": config.trials,
        "seed": config.seed,
        "horizon": config.horizon,
        "eta_d": config.eta_d,
        "fault": None
        if config.fault is None
        else {
            "edge": list(config.fault.edge),
            "eta_d": config.fault.eta_d,
            "nu": config.fault.nu,
        },
        "params": {
            name: {"kind": p.kind, "N": p.N, "N_a": p.N_a, "n": p.n}
            for name, p in sorted(config.params.items())
        },
    }


def cmd_simulate(args) -> int:
    _merge_config(args, _SIMULATE_KEYS)
    if args.gamma is not None:
        if args.h is not None:
            raise ValueError("give either --h or --gamma, not both")
        # converted after the network size is known, below

    config = _build_scenario(args)
    if args.gamma is not None:
        n_edges = len(config.network.edges)
        hs = sorted(threshold_from_gamma(g, n_edges) for g in _grid(args.gamma))
        config = ScenarioConfig(
            network=config.network,
            probes=config.probes,
            params=config.params,
            fault=config.fault,
            thresholds=tuple(hs),
            trials=config.trials,
            seed=config.seed,
            horizon=config.horizon,
            eta_d=config.eta_d,
        )

    families = (
        tuple(sorted(args.families.split(","))) if args.families else ("classical", "quantum")
    )
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    rows = run_sweep(config, families)
    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
    csv_text = metrics_to_csv(rows)

    if args.out:
        Path(args.out).write_text(csv_text)
        manifest_path = args.manifest or (args.out + ".manifest.json")
        manifest = {
            "tool": "tapscout",
            "version": __version__,
            "subcommand": "simulate",
            "config": _config_echo(args, config),
            "seed": config.seed,
            "started": started,
            "finished": finished,
            "outputs": [str(Path(args.out).resolve())],
        }
        Path(manifest_path).write_text(json.dumps(manifest, indent=2) + "\n")
    else:
        sys.stdout.write(csv_text)
    return 0


# -- parser wiring ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tapscout",
        description="Probe routing and per-link CUSUM localization of "
        "transmissivity drops in optical networks.",
    )
    parser.add_argument("--version", action="version", version=f"tapscout {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_topo = sub.add_parser("topology", help="emit a preset topology file")
    p_topo.add_argument("--preset", required=True, choices=("line5", "fattree3"))
    p_topo.add_argument("--links", type=int, default=5, help="line preset link count")
    p_topo.add_argument("--eta", type=float, default=0.9)
    p_topo.add_argument("-o", "--out")
    p_topo.set_defaults(func=cmd_topology)

    p_build = sub.add_parser("build-probes", help="construct identifying probes")
    p_build.add_argument("topology")
    p_build.add_argument(
        "--probes", choices=("constructed", "builtin"), default="constructed"
    )
    p_build.add_argument("-o", "--out")
    p_build.set_defaults(func=cmd_build_probes)

    p_kl = sub.add_parser("analyze-kl", help="closed-form divergence analytics")
    p_kl.add_argument("--N", type=float)
    p_kl.add_argument("--Na", type=float)
    p_kl.add_argument("--squeeze-db", dest="squeeze_db", type=float)
    p_kl.add_argument("--n", type=int)
    p_kl.add_argument("--eta", type=float)
    p_kl.add_argument("--eta-d", dest="eta_d", type=float)
    p_kl.add_argument("--sweep", help="var=lo:hi:steps, emits CSV")
    p_kl.add_argument("--config", help="key=value defaults file")
    p_kl.set_defaults(func=cmd_analyze_kl)

    p_sim = sub.add_parser("simulate", help="Monte Carlo latency/error sweep")
    p_sim.add_argument("--scenario", choices=("line5", "fattree3"))
    p_sim.add_argument("--topology")
    p_sim.add_argument("--probes", help="constructed | builtin | file")
    p_sim.add_argument("--families", help="comma list: quantum,classical")
    p_sim.add_argument("--h", help="threshold grid lo:hi:steps or comma list")
    p_sim.add_argument("--gamma", help="false-alarm grid, converted to thresholds")
    p_sim.add_argument("--trials", type=int)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--fault-edge", dest="fault_edge", help="u-v")
    p_sim.add_argument("--eta", type=float)
    p_sim.add_argument("--eta-d", dest="eta_d", type=float)
    p_sim.add_argument("--nu", type=int)
    p_sim.add_argument("--N", type=float)
    p_sim.add_argument("--squeeze-db", dest="squeeze_db", type=float)
    p_sim.add_argument("--horizon", type=int)
    p_sim.add_argument("-o", "--out")
    p_sim.add_argument("--manifest")
    p_sim.add_argument("--config", help="key=value defaults file")
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
