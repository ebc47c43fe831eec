"""Experiment orchestration and command-line interface.

Ties the solvers together: runs simulation sweeps against the deterministic
flow, traces criticality along recorded trajectories, compares frozen-mass
type composition to the flow's eigen-direction, and persists everything as
CSV/JSON so the plotting layer never touches live objects.

Every artifact is reproducible byte-for-byte from (config, seed): replica
seeds are derived as seed + 1000003 * N_index + replica, worker results are
assembled in submission order regardless of completion order, and floats are
written with 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .branching import expected_progeny, progeny_exact
from .exceptions import ConfigError, NumericError
from .fpsim import SimConfig, SimOutput, run_simulation, write_sim_output
from .perron import as_kernel, as_type_mass, perron_root
from .smol import SizeSpectrum, integrate_smol
from .typeflow import FlowTrajectory, critical_time, integrate_flow

logger = logging.getLogger(__name__)

_SEED_STRIDE = 1000003  # distinct replica streams across N values


@dataclass(frozen=True)
class ExperimentConfig:
    """One convergence sweep: which system, which sizes, how many replicas."""

    kappa0: np.ndarray
    pi0: np.ndarray
    N_list: tuple[int, ...]
    T: float
    replicas: int
    seed: int
    out_dir: Path
    lambda_exponent: float = 0.6
    flow_step: float = 1e-3
    sup_l1_tolerance: float = 0.05
    rho_band: float = 0.1
    rho_window_delta: float = 0.2
    workers: int = 1


@dataclass(frozen=True)
class ReplicaResult:
    N: int
    replica: int
    seed: int
    sup_l1: float
    max_rho_dev: float
    error: str | None = None


@dataclass(frozen=True)
class ConvergenceReport:
    """Assembled sweep results plus the per-tolerance verdicts."""

    config: ExperimentConfig
    flow: FlowTrajectory
    results: list[ReplicaResult]
    identity_gap: float
    overlay_sup_gap: float
    checks: dict


def _validate_experiment(config: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    kap = as_kernel(config.kappa0)
    mass = as_type_mass(config.pi0, kap.shape[0])
    if not config.N_list:
        raise ConfigError("N_list must be non-empty")
    if any(b <= a for a, b in zip(config.N_list, config.N_list[1:])):
        raise ConfigError("N_list must be strictly increasing")
    if config.replicas < 1:
        raise ConfigError("replicas must be at least 1")
    if abs(float(mass.sum()) - 1.0) > 1e-9:
        raise ConfigError("pi0 must sum to 1 for simulation experiments")
    if config.workers < 1:
        raise ConfigError("workers must be at least 1")
    return kap, mass


def counts_from_fractions(pi0, N: int) -> tuple[int, ...]:
    """Integer type counts with sum N, by largest-remainder apportionment."""
    mass = np.asarray(pi0, dtype=float)
    raw = mass * N
    counts = np.floor(raw).astype(np.int64)
    short = N - int(counts.sum())
    if short:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return tuple(int(c) for c in counts)


def _replica_metrics(payload: dict) -> dict:
    """Worker body: run one replica, reduce it to scalar deviations."""
    cfg = SimConfig(
        N=payload["N"],
        p=payload["p"],
        kappa0=payload["kappa"],
        T=payload["T"],
        seed=payload["seed"],
        lambda_exponent=payload["lambda_exponent"],
    )
    out: dict = {
        "N": payload["N"],
        "replica": payload["replica"],
        "seed": payload["seed"],
        "sup_l1": math.nan,
        "max_rho_dev": math.nan,
        "error": None,
    }
    try:
        sim = run_simulation(cfg)
    except Exception as exc:  # recorded, sweep continues
        out["error"] = repr(exc)
        return out
    times = sim.trajectory.times
    flow_times = payload["flow_times"]
    flow_pi = payload["flow_pi"]
    k = flow_pi.shape[1]
    target = np.stack(
        [np.interp(times, flow_times, flow_pi[:, i]) for i in range(k)], axis=1
    )
    out["sup_l1"] = float(np.abs(sim.trajectory.pi - target).sum(axis=1).max())
    window = times >= payload["t_c"] + payload["delta"]
    if window.any():
        kap = payload["kappa"]
        devs = [
            abs(perron_root(kap + t, pi_row) - 1.0)
            for t, pi_row in zip(times[window], sim.trajectory.pi[window])
        ]
        out["max_rho_dev"] = float(max(devs))
    if payload.get("return_trajectory"):
        out["trajectory"] = (times, sim.trajectory.phi, sim.trajectory.pi)
    return out


def _check_gel_time_identity(kap: np.ndarray, mass: np.ndarray) -> float:
    """Cross-module guard: flow critical time vs branching mean progeny."""
    t_c = critical_time(kap, mass)
    mean = expected_progeny(kap, mass)
    reciprocal = 0.0 if math.isinf(mean) else 1.0 / mean
    gap = abs(t_c - reciprocal)
    if gap > 1e-8:
        raise NumericError(
            f"critical time {t_c} and reciprocal mean progeny {reciprocal} "
            f"disagree by {gap:.3e}; refusing to launch the sweep"
        )
    return gap


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_flow_csv(flow: FlowTrajectory, path: Path) -> None:
    k = flow.states[0].pi.size
    header = (
        ["t", "phi"]
        + [f"pi_{i + 1}" for i in range(k)]
        + [f"mu_{i + 1}" for i in range(k)]
        + ["rho", "freeze_rate"]
    )
    rows = [",".join(header)]
    for t, state in zip(flow.grid, flow.states):
        cells = [_fmt(t), _fmt(state.pi.sum())]
        cells += [_fmt(x) for x in state.pi]
        cells += [_fmt(x) for x in state.mu]
        cells += [_fmt(state.rho), _fmt(state.phi)]
        rows.append(",".join(cells))
    path.write_text("\n".join(rows) + "\n")


def _read_csv_columns(path: Path) -> dict[str, np.ndarray]:
    lines = path.read_text().strip().split("\n")
    if len(lines) < 2:
        raise ConfigError(f"{path} has no data rows")
    names = lines[0].split(",")
    table = np.array([[float(c) for c in line.split(",")] for line in lines[1:]])
    return {name: table[:, j] for j, name in enumerate(names)}


def overlay_sup_gap(trajectory_csv: Path, flow_csv: Path) -> float:
    """Sup |Phi^N - Phi| between two written CSVs, by nearest-time pairing.

    For each simulation row the flow row with the nearest time is used (ties
    resolved toward the earlier row).  Working from the serialised values —
    not the in-memory ones — makes the number exactly reproducible by any
    other reader of the same files.
    """
    sim = _read_csv_columns(Path(trajectory_csv))
    flow = _read_csv_columns(Path(flow_csv))
    ft, fphi = flow["t"], flow["phi"]
    worst = 0.0
    idx = np.searchsorted(ft, sim["t"])
    for t, phi, pos in zip(sim["t"], sim["phi"], idx):
        lo = max(pos - 1, 0)
        hi = min(pos, ft.size - 1)
        pick = lo if abs(ft[lo] - t) <= abs(ft[hi] - t) else hi
        worst = max(worst, abs(phi - fphi[pick]))
    return worst


def run_convergence_experiment(config: ExperimentConfig) -> ConvergenceReport:
    """Flow once, then an N x replica simulation sweep against it.

    Writes convergence.csv (one row per replica), flow.csv, trajectory.csv
    (first replica at the largest N, for the overlay figure) and report.json
    into config.out_dir.  Replica failures are recorded in their rows as NaN
    deviations; the sweep itself never aborts on them.
    """
    kap, mass = _validate_experiment(config)
    identity_gap = _check_gel_time_identity(kap, mass)
    flow = integrate_flow(kap, mass, config.T, config.flow_step)
    flow_times = flow.grid
    flow_pi = np.stack([s.pi for s in flow.states])

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_flow_csv(flow, out_dir / "flow.csv")

    payloads = []
    for n_idx, N in enumerate(config.N_list):
        p = counts_from_fractions(mass, N)
        for replica in range(config.replicas):
            payloads.append(
                {
                    "N": N,
                    "p": p,
                    "kappa": kap,
                    "T": config.T,
                    "replica": replica,
                    "seed": config.seed + _SEED_STRIDE * n_idx + replica,
                    "lambda_exponent": config.lambda_exponent,
                    "flow_times": flow_times,
                    "flow_pi": flow_pi,
                    "t_c": flow.t_c,
                    "delta": config.rho_window_delta,
                    "return_trajectory": (
                        N == config.N_list[-1] and replica == 0
                    ),
                }
            )

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            raw = list(pool.map(_replica_metrics, payloads))
    else:
        raw = [_replica_metrics(p) for p in payloads]

    results = []
    reference_trajectory = None
    for row in raw:
        if "trajectory" in row:
            reference_trajectory = row.pop("trajectory")
        results.append(ReplicaResult(**row))

    rows = ["N,replica,sup_l1,max_rho_dev"]
    for r in results:
        rows.append(f"{r.N},{r.replica},{_fmt(r.sup_l1)},{_fmt(r.max_rho_dev)}")
    (out_dir / "convergence.csv").write_text("\n".join(rows) + "\n")

    if reference_trajectory is not None:
        times, phi, pi = reference_trajectory
        k = pi.shape[1]
        header = ",".join(["t", "phi"] + [f"pi_{i + 1}" for i in range(k)])
        lines = [header]
        for j in range(times.size):
            lines.append(
                ",".join([_fmt(times[j]), _fmt(phi[j])] + [_fmt(x) for x in pi[j]])
            )
        (out_dir / "trajectory.csv").write_text("\n".join(lines) + "\n")

    gap = overlay_sup_gap(out_dir / "trajectory.csv", out_dir / "flow.csv")
    checks = _build_checks(config, results, identity_gap, gap)
    report = {
        "config": {
            "kappa0": kap.tolist(),
            "pi0": mass.tolist(),
            "N_list": list(config.N_list),
            "T": config.T,
            "replicas": config.replicas,
            "seed": config.seed,
            "lambda_exponent": config.lambda_exponent,
        },
        "critical_time": flow.t_c,
        "identity_gap": identity_gap,
        "overlay_sup_gap": gap,
        "results": [
            {
                "N": r.N,
                "replica": r.replica,
                "seed": r.seed,
                "sup_l1": None if math.isnan(r.sup_l1) else r.sup_l1,
                "max_rho_dev": None if math.isnan(r.max_rho_dev) else r.max_rho_dev,
                "error": r.error,
            }
            for r in results
        ],
        "checks": checks,
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return ConvergenceReport(
        config=config,
        flow=flow,
        results=results,
        identity_gap=identity_gap,
        overlay_sup_gap=gap,
        checks=checks,
    )


def _build_checks(config, results, identity_gap, overlay_gap) -> dict:
    largest = config.N_list[-1]
    at_largest = [r for r in results if r.N == largest and r.error is None]
    sup_ok = sum(1 for r in at_largest if r.sup_l1 <= config.sup_l1_tolerance)
    rho_ok = sum(
        1
        for r in at_largest
        if not math.isnan(r.max_rho_dev) and r.max_rho_dev <= config.rho_band
    )
    medians: list[float | None] = []
    for N in config.N_list:
        vals = [r.sup_l1 for r in results if r.N == N and not math.isnan(r.sup_l1)]
        medians.append(float(np.median(vals)) if vals else None)
    trend = None
    if len(medians) >= 2 and all(m is not None for m in medians):
        trend = all(b <= a for a, b in zip(medians, medians[1:]))
    return {
        "gel_time_identity": {"gap": identity_gap, "tolerance": 1e-8, "pass": True},
        "sup_l1_at_largest_N": {
            "tolerance": config.sup_l1_tolerance,
            "passing": sup_ok,
            "total": len(at_largest),
            "pass": len(at_largest) > 0 and sup_ok >= math.ceil(0.8 * len(at_largest)),
        },
        "rho_band_at_largest_N": {
            "band": config.rho_band,
            "passing": rho_ok,
            "total": len(at_largest),
            "pass": len(at_largest) > 0 and rho_ok >= math.ceil(0.8 * len(at_largest)),
        },
        "median_sup_l1_by_N": {"values": medians, "non_increasing": trend},
        "overlay_sup_gap": {"value": overlay_gap},
    }


def criticality_trace(output: SimOutput, kappa0=None) -> np.ndarray:
    """rho(kappa(t) o pi^N(t)) at every recorded trajectory time."""
    kap = as_kernel(output.config.kappa0 if kappa0 is None else kappa0)
    return np.array(
        [
            perron_root(kap + t, pi_row)
            for t, pi_row in zip(output.trajectory.times, output.trajectory.pi)
        ]
    )


@dataclass(frozen=True)
class CompositionBin:
    """One time window of the frozen-composition comparison.

    composition and l1_deviation are None when the window contains no large
    freeze (n/a bins); small_mass counts vertices lost to sub-threshold
    freezes as a fraction of N.
    """

    t_lo: float
    t_hi: float
    t_mid: float
    n_large: int
    large_mass: float
    small_mass: float
    composition: np.ndarray | None
    mu_flow: np.ndarray
    l1_deviation: float | None


def frozen_composition_report(
    output: SimOutput,
    flow: FlowTrajectory,
    size_threshold_fraction: float = 1.0,
    bins: int = 12,
) -> list[CompositionBin]:
    """Type composition of large frozen components vs the flow direction.

    Freezes are bucketed into `bins` uniform windows over [0, T]; within each
    window the type counts of freezes of size >= threshold * N^(2/3) are
    pooled, normalised and compared (l1) against the flow's left eigenvector
    at the window midpoint.
    """
    if not output.freeze_log:
        raise ValueError("freeze log is empty; nothing to bin")
    if bins < 1:
        raise ValueError("bins must be at least 1")
    N = output.config.N
    T = output.config.T
    threshold = size_threshold_fraction * N ** (2.0 / 3.0)
    k = len(output.config.p)
    edges = np.linspace(0.0, T, bins + 1)
    report = []
    for b in range(bins):
        lo, hi = float(edges[b]), float(edges[b + 1])
        mid = 0.5 * (lo + hi)
        pooled = np.zeros(k, dtype=np.int64)
        n_large = 0
        small_vertices = 0
        for rec in output.freeze_log:
            inside = lo <= rec.time < hi or (b == bins - 1 and rec.time == hi)
            if not inside:
                continue
            if rec.size >= threshold:
                pooled += rec.type_counts
                n_large += 1
            else:
                small_vertices += rec.size
        state = flow.states[int(np.argmin(np.abs(flow.grid - mid)))]
        if n_large:
            composition = pooled / pooled.sum()
            l1 = float(np.abs(composition - state.mu).sum())
        else:
            composition = None
            l1 = None
        report.append(
            CompositionBin(
                t_lo=lo,
                t_hi=hi,
                t_mid=mid,
                n_large=n_large,
                large_mass=float(pooled.sum()) / N,
                small_mass=small_vertices / N,
                composition=composition,
                mu_flow=state.mu,
                l1_deviation=l1,
            )
        )
    return report


def write_composition_csv(report: list[CompositionBin], path: Path) -> None:
    k = report[0].mu_flow.size
    header = (
        ["bin_lo", "bin_mid", "bin_hi", "n_large", "large_mass", "small_mass"]
        + [f"comp_{i + 1}" for i in range(k)]
        + [f"mu_{i + 1}" for i in range(k)]
        + ["l1_dev"]
    )
    rows = [",".join(header)]
    for b in report:
        cells = [
            _fmt(b.t_lo),
            _fmt(b.t_mid),
            _fmt(b.t_hi),
            str(b.n_large),
            _fmt(b.large_mass),
            _fmt(b.small_mass),
        ]
        if b.composition is None:
            cells += [""] * k
        else:
            cells += [_fmt(x) for x in b.composition]
        cells += [_fmt(x) for x in b.mu_flow]
        cells.append("" if b.l1_deviation is None else _fmt(b.l1_deviation))
        rows.append(",".join(cells))
    Path(path).write_text("\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# command line


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config key '{key}' is required")
    return cfg[key]


def _out_dir(cfg: dict) -> Path:
    out = Path(_require(cfg, "out_dir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _kernel_from(cfg: dict) -> np.ndarray:
    kap = np.asarray(_require(cfg, "kappa"), dtype=float)
    if kap.ndim == 0:
        kap = kap.reshape(1, 1)
    return kap


def _sim_config_from(cfg: dict, seed_override: int | None) -> SimConfig:
    kap = _kernel_from(cfg)
    N = int(cfg.get("N") or _require(cfg, "N_list")[0])
    if "p" in cfg:
        p = tuple(int(x) for x in cfg["p"])
    else:
        p = counts_from_fractions(_require(cfg, "pi0"), N)
    return SimConfig(
        N=N,
        p=p,
        kappa0=kap,
        T=float(_require(cfg, "T")),
        seed=int(seed_override if seed_override is not None else cfg.get("seed", 0)),
        lambda_exponent=float(cfg.get("lambda_exponent", 0.6)),
        snapshot_times=tuple(cfg.get("snapshot_times", ())),
        record_radius=bool(cfg.get("record_radius", False)),
    )


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    out = run_simulation(_sim_config_from(cfg, args.seed))
    write_sim_output(out, _out_dir(cfg))
    print(f"simulation finished: {len(out.freeze_log)} freezes, "
          f"{out.rng_draw_count} draws")
    return 0


def _cmd_flow(args) -> int:
    cfg = _load_config(args.config)
    flow = integrate_flow(
        _kernel_from(cfg),
        np.asarray(_require(cfg, "pi0"), dtype=float),
        float(_require(cfg, "T")),
        float(cfg.get("step", 1e-3)),
    )
    out = _out_dir(cfg)
    write_flow_csv(flow, out / "flow.csv")
    print(f"flow written: t_c={flow.t_c:.12g}, {len(flow.grid)} grid points")
    return 0


def _cmd_smol(args) -> int:
    cfg = _load_config(args.config)
    if "v0" in cfg:
        v0 = SizeSpectrum(np.asarray(cfg["v0"], dtype=float))
    else:
        L = int(cfg.get("monodisperse_L", 400))
        start = np.zeros(L)
        start[0] = 1.0
        v0 = SizeSpectrum(start)
    traj = integrate_smol(v0, float(_require(cfg, "T")), float(cfg.get("step", 1e-3)))
    out = _out_dir(cfg)
    L = v0.L
    header = ",".join(["t", "total_mass", "leaked"] + [f"v_{i + 1}" for i in range(L)])
    rows = [header]
    for t, state in zip(traj.times, traj.states):
        rows.append(
            ",".join(
                [_fmt(t), _fmt(state.total_mass()), _fmt(state.leaked)]
                + [_fmt(x) for x in state.v]
            )
        )
    (out / "smol.csv").write_text("\n".join(rows) + "\n")
    print(f"coagulation written: gel time {traj.t_gel:.12g}, {len(traj.times)} rows")
    return 0


def _cmd_bp(args) -> int:
    kap = np.asarray(json.loads(args.kappa), dtype=float)
    if kap.ndim == 0:
        kap = kap.reshape(1, 1)
    pi = np.atleast_1d(np.asarray(json.loads(args.pi), dtype=float))
    value = progeny_exact(kap, pi, args.ell)
    print(f"{value:.6f}")
    return 0


def _cmd_converge(args) -> int:
    cfg = _load_config(args.config)
    experiment = ExperimentConfig(
        kappa0=_kernel_from(cfg),
        pi0=np.asarray(_require(cfg, "pi0"), dtype=float),
        N_list=tuple(int(n) for n in _require(cfg, "N_list")),
        T=float(_require(cfg, "T")),
        replicas=int(cfg.get("replicas", 1)),
        seed=int(args.seed if args.seed is not None else cfg.get("seed", 0)),
        out_dir=_out_dir(cfg),
        lambda_exponent=float(cfg.get("lambda_exponent", 0.6)),
        flow_step=float(cfg.get("step", 1e-3)),
        sup_l1_tolerance=float(cfg.get("sup_l1_tolerance", 0.05)),
        rho_band=float(cfg.get("rho_band", 0.1)),
        rho_window_delta=float(cfg.get("rho_window_delta", 0.2)),
        workers=int(cfg.get("workers", 1)),
    )
    report = run_convergence_experiment(experiment)
    n_err = sum(1 for r in report.results if r.error is not None)
    print(
        f"sweep finished: {len(report.results)} replicas, {n_err} failures, "
        f"overlay gap {report.overlay_sup_gap:.6g}"
    )
    return 0


def _cmd_composition(args) -> int:
    cfg = _load_config(args.config)
    sim_cfg = _sim_config_from(cfg, args.seed)
    out = run_simulation(sim_cfg)
    kap = as_kernel(sim_cfg.kappa0)
    pi0 = np.asarray(sim_cfg.p, dtype=float) / sim_cfg.N
    flow = integrate_flow(kap, pi0, sim_cfg.T, float(cfg.get("step", 1e-3)))
    report = frozen_composition_report(
        out,
        flow,
        size_threshold_fraction=float(cfg.get("size_threshold_fraction", 1.0)),
        bins=int(cfg.get("bins", 12)),
    )
    out_dir = _out_dir(cfg)
    write_composition_csv(report, out_dir / "composition.csv")
    populated = [b for b in report if b.l1_deviation is not None]
    worst = max((b.l1_deviation for b in populated), default=math.nan)
    print(f"composition written: {len(populated)}/{len(report)} bins populated, "
          f"worst l1 {worst:.6g}")
    return 0


def _cmd_stats(args) -> int:
    cfg = _load_config(args.config)
    sim_cfg = _sim_config_from(cfg, args.seed)
    if not sim_cfg.snapshot_times:
        raise ConfigError("stats requires snapshot_times in the config")
    out = run_simulation(sim_cfg)
    from .fpsim import alive_edge_stats  # local import to keep startup light

    k = len(sim_cfg.p)
    rows = ["snapshot_t,i,j,observed,expected,z,flagged"]
    for index, snap in enumerate(out.snapshots):
        stats = alive_edge_stats(out, index)
        for i in range(k):
            for j in range(i, k):
                rows.append(
                    ",".join(
                        [
                            _fmt(snap.time),
                            str(i + 1),
                            str(j + 1),
                            str(int(stats.observed[i, j])),
                            _fmt(stats.expected[i, j]),
                            _fmt(stats.z[i, j]),
                            "1" if stats.flagged[i, j] else "0",
                        ]
                    )
                )
    out_dir = _out_dir(cfg)
    (out_dir / "stats.csv").write_text("\n".join(rows) + "\n")
    print(f"stats written: {len(out.snapshots)} snapshots")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fplab",
        description="Frozen percolation laboratory: simulator, solvers, sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in [
        ("simulate", "run one finite-N simulation and write its artifacts"),
        ("flow", "integrate the deterministic type flow to flow.csv"),
        ("smol", "integrate the coagulation system to smol.csv"),
        ("converge", "run the N-sweep against the flow and write report.json"),
        ("composition", "compare frozen-component composition to the flow direction"),
        ("stats", "alive-graph edge statistics per snapshot"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    bp = sub.add_parser("bp", help="exact branching-tree size mass")
    bp.add_argument("--kappa", required=True, help="kernel (JSON scalar or matrix)")
    bp.add_argument("--pi", required=True, help="type masses (JSON scalar or array)")
    bp.add_argument("--ell", type=int, required=True, help="component size")
    return parser


_DISPATCH = {
    "simulate": _cmd_simulate,
    "flow": _cmd_flow,
    "smol": _cmd_smol,
    "bp": _cmd_bp,
    "converge": _cmd_converge,
    "composition": _cmd_composition,
    "stats": _cmd_stats,
}


def cli_main(argv=None) -> int:
    """Entry point returning a process exit code (0 ok, 2 config, 3 numeric)."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _DISPATCH[args.command](args)
    except (ConfigError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    logging.basicConfig(level=logging.WARNING)
    sys.exit(cli_main(sys.argv[1:]))
