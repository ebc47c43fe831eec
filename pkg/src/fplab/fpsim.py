"""Event-driven simulator of the multi-type frozen percolation process.

The finite system has N vertices carrying one of k types.  It starts from an
inhomogeneous random graph (each cross-type pair i-j is an edge independently
with probability 1 - exp(-kappa_ij/N)), then evolves in continuous time:

* every currently-alive unordered pair gains an edge at rate 1/N (an edge
  that already exists is never added twice),
* every alive vertex carries an exponential lightning clock of rate
  lambda = N^(-lambda_exponent); when a clock fires, the vertex's entire
  connected component freezes: it leaves the alive graph for good.

The engine is a competing-exponentials loop.  With A alive vertices the next
edge proposal arrives at rate A(A-1)/(2N); a uniform alive pair is drawn and
rejected if already adjacent (Poisson thinning, exact).  Lightning arrives at
rate lambda*A and strikes a uniform alive vertex.  Components are tracked by
union-find plus a circular linked list per component so that a merge is O(1)
and freeze-time member enumeration is O(component size).

Everything is driven by one numpy Generator; a run is bit-reproducible from
its config, and the number of variates consumed is reported for audit.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import NumericError
from .perron import as_kernel
from .smol import SizeSpectrum

logger = logging.getLogger(__name__)

#: spacing of the always-on mass-trajectory recording grid
TRAJECTORY_GRID_STEP = 1e-2


@dataclass(frozen=True)
class TypedGraph:
    """A finished multi-type graph sample."""

    N: int
    types: np.ndarray
    adjacency: list[list[int]]
    edge_set: set[tuple[int, int]]


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation run (seed included)."""

    N: int
    p: tuple[int, ...]
    kappa0: np.ndarray
    T: float
    seed: int
    lambda_exponent: float = 0.6
    snapshot_times: tuple[float, ...] = ()
    record_radius: bool = False


@dataclass(frozen=True)
class FreezeRecord:
    """One lightning strike: when, what it hit, and what froze with it.

    radius_counts (present only when the run records radii) has one row per
    BFS distance from the struck vertex; row r holds per-type counts of the
    component members at distance exactly r.
    """

    time: float
    struck_vertex_type: int
    size: int
    type_counts: np.ndarray
    radius_counts: np.ndarray | None = None


@dataclass(frozen=True)
class Snapshot:
    """Alive-graph summary at one requested time.

    edge_counts[i, j] (i <= j) counts alive edges whose endpoint types are
    {i, j}; component_sizes lists every alive component once.  vertices,
    adjacency and component_root are populated only when the run was asked
    to collect graphs (testing hook) — adjacency rows are tuples to keep the
    snapshot immutable.
    """

    time: float
    alive_count: int
    pi_counts: np.ndarray
    edge_counts: np.ndarray
    component_sizes: np.ndarray
    vertices: np.ndarray | None = None
    adjacency: dict[int, tuple[int, ...]] | None = None
    component_root: dict[int, int] | None = None


@dataclass(frozen=True)
class MassTrajectory:
    """Right-continuous record of the alive mass: times, Phi, per-type pi."""

    times: np.ndarray
    phi: np.ndarray
    pi: np.ndarray


@dataclass(frozen=True)
class SimOutput:
    """Everything a run produces; immutable and safe to share."""

    config: SimConfig
    trajectory: MassTrajectory
    freeze_log: list[FreezeRecord]
    snapshots: list[Snapshot]
    rng_draw_count: int
    proposed_edges: int
    rejected_existing: int


def _validate_config(config: SimConfig) -> np.ndarray:
    if config.N < 1:
        raise ValueError("N must be at least 1")
    p = np.asarray(config.p, dtype=np.int64)
    if p.ndim != 1 or np.any(p < 0):
        raise ValueError("p must be a vector of non-negative counts")
    if int(p.sum()) != config.N:
        raise ValueError(f"type counts sum to {int(p.sum())}, expected N = {config.N}")
    kap = as_kernel(config.kappa0)
    if kap.shape[0] != p.size:
        raise ValueError(f"kernel is {kap.shape[0]}x{kap.shape[0]} but p has {p.size} types")
    if not 0.0 < config.lambda_exponent < 1.0:
        raise ValueError("lambda_exponent must lie strictly between 0 and 1")
    if config.T < 0:
        raise ValueError("T must be non-negative")
    for s in config.snapshot_times:
        if not 0.0 <= s <= config.T:
            raise ValueError(f"snapshot time {s} outside [0, {config.T}]")
    return kap


class _DrawCounter:
    __slots__ = ("count",)

    def __init__(self):
        self.count = 0


def _balanced_types(rng: np.random.Generator, p: np.ndarray, counter: _DrawCounter) -> np.ndarray:
    """Uniformly random type assignment with exactly p_i vertices of type i."""
    labels = np.repeat(np.arange(p.size, dtype=np.int64), p)
    counter.count += labels.size
    return rng.permutation(labels)


def _unrank_within_type(pos: int) -> tuple[int, int]:
    """Index -> pair (a, b), a < b, in the order (0,1),(0,2),(1,2),(0,3)..."""
    b = (1 + math.isqrt(1 + 8 * pos)) // 2
    a = pos - b * (b - 1) // 2
    return a, b


def _irg_edge_stream(rng, types, p, kappa, N, counter):
    """Yield the initial-graph edges block by block via geometric skipping.

    Within each type block (i <= j) candidate pairs are visited in a fixed
    linear order; a geometric variate with success probability
    1 - exp(-kappa_ij/N) jumps straight to the next present edge, so the work
    is proportional to the number of edges, not pairs.
    """
    k = p.size
    by_type = [np.flatnonzero(types == i) for i in range(k)]
    for i in range(k):
        for j in range(i, k):
            if i == j:
                n_pairs = int(p[i]) * (int(p[i]) - 1) // 2
            else:
                n_pairs = int(p[i]) * int(p[j])
            q = -math.expm1(-kappa[i, j] / N)
            if n_pairs == 0 or q <= 0.0:
                continue
            pos = -1
            rows, cols = by_type[i], by_type[j]
            while True:
                counter.count += 1
                pos += int(rng.geometric(q))
                if pos >= n_pairs:
                    break
                if i == j:
                    a, b = _unrank_within_type(pos)
                else:
                    a, b = pos // cols.size, pos % cols.size
                u, v = int(rows[a]), int(cols[b])
                yield (u, v) if u < v else (v, u)


def sample_irg(N: int, p, kappa, seed: int) -> TypedGraph:
    """Sample the initial inhomogeneous random graph; deterministic in seed."""
    p = np.asarray(p, dtype=np.int64)
    if np.any(p < 0) or int(p.sum()) != N:
        raise ValueError("p must be non-negative counts summing to N")
    if N == 0:
        return TypedGraph(N=0, types=np.zeros(0, dtype=np.int64), adjacency=[], edge_set=set())
    kap = as_kernel(kappa)
    if kap.shape[0] != p.size:
        raise ValueError("kernel size does not match the number of types")
    rng = np.random.default_rng(seed)
    counter = _DrawCounter()
    types = _balanced_types(rng, p, counter)
    adjacency: list[list[int]] = [[] for _ in range(N)]
    edge_set: set[tuple[int, int]] = set()
    for u, v in _irg_edge_stream(rng, types, p, kap, N, counter):
        edge_set.add((u, v))
        adjacency[u].append(v)
        adjacency[v].append(u)
    return TypedGraph(N=N, types=types, adjacency=adjacency, edge_set=edge_set)


class _Components:
    """Union-find with size tracking plus a circular list per component."""

    def __init__(self, N: int):
        self.parent = list(range(N))
        self.size = [1] * N
        self.ring = list(range(N))

    def find(self, v: int) -> int:
        parent = self.parent
        root = v
        while parent[root] != root:
            root = parent[root]
        while parent[v] != root:
            parent[v], v = root, parent[v]
        return root

    def union(self, u: int, v: int) -> bool:
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return False
        if self.size[ru] < self.size[rv]:
            ru, rv = rv, ru
        self.parent[rv] = ru
        self.size[ru] += self.size[rv]
        self.ring[u], self.ring[v] = self.ring[v], self.ring[u]
        return True

    def members(self, v: int) -> list[int]:
        out = [v]
        w = self.ring[v]
        while w != v:
            out.append(w)
            w = self.ring[w]
        return out


def _radius_profile(struck, members, adjacency, types, k):
    member_set = set(members)
    dist = {struck: 0}
    frontier = [struck]
    rows = [[0] * k]
    rows[0][types[struck]] = 1
    r = 0
    while frontier:
        nxt = []
        for u in frontier:
            for w in adjacency[u]:
                if w in member_set and w not in dist:
                    dist[w] = r + 1
                    nxt.append(w)
        if not nxt:
            break
        r += 1
        row = [0] * k
        for w in nxt:
            row[types[w]] += 1
        rows.append(row)
        frontier = nxt
    return np.asarray(rows, dtype=np.int64)


def run_simulation(
    config: SimConfig,
    *,
    lambda_override: float | None = None,
    collect_graph: bool = False,
) -> SimOutput:
    """Run the frozen percolation process to time T.

    lambda_override replaces the lightning rate (testing hook; 0 disables
    freezing entirely); collect_graph embeds alive adjacency and component
    labels into every snapshot so tests can re-derive components externally.
    """
    kap = _validate_config(config)
    N, k = config.N, len(config.p)
    p = np.asarray(config.p, dtype=np.int64)
    lam = N ** (-config.lambda_exponent) if lambda_override is None else float(lambda_override)
    if lam < 0:
        raise ValueError("lightning rate must be non-negative")

    rng = np.random.default_rng(config.seed)
    counter = _DrawCounter()
    types = _balanced_types(rng, p, counter)
    type_list = types.tolist()

    adjacency: list[list[int]] = [[] for _ in range(N)]
    edge_set: set[tuple[int, int]] = set()
    comps = _Components(N)
    edge_counts = np.zeros((k, k), dtype=np.int64)

    def add_edge(u: int, v: int) -> None:
        edge_set.add((u, v))
        adjacency[u].append(v)
        adjacency[v].append(u)
        ti, tj = type_list[u], type_list[v]
        if ti > tj:
            ti, tj = tj, ti
        edge_counts[ti, tj] += 1
        comps.union(u, v)

    for u, v in _irg_edge_stream(rng, types, p, kap, N, counter):
        add_edge(u, v)

    alive_list = list(range(N))
    alive_pos = list(range(N))
    alive = N
    pi_counts = [int(c) for c in np.bincount(types, minlength=k)]
    frozen_counts = [0] * k

    def check_conservation(when: float) -> None:
        if alive + sum(frozen_counts) != N or any(
            pi_counts[i] + frozen_counts[i] != int(p[i]) for i in range(k)
        ):
            raise NumericError(
                f"alive/frozen bookkeeping out of balance at t={when:.6g}: "
                f"alive={alive} frozen={frozen_counts} pi={pi_counts}"
            )

    traj_times: list[float] = []
    traj_phi: list[float] = []
    traj_pi: list[list[float]] = []

    def record_state(at: float) -> None:
        traj_times.append(at)
        traj_phi.append(alive / N)
        traj_pi.append([c / N for c in pi_counts])

    def take_snapshot(at: float) -> Snapshot:
        roots: dict[int, int] = {}
        for v in alive_list[:alive]:
            r = comps.find(v)
            if r not in roots:
                roots[r] = comps.size[r]
        extra = {}
        if collect_graph:
            vertices = np.asarray(sorted(alive_list[:alive]), dtype=np.int64)
            extra = {
                "vertices": vertices,
                "adjacency": {int(v): tuple(adjacency[v]) for v in vertices},
                "component_root": {int(v): comps.find(int(v)) for v in vertices},
            }
        return Snapshot(
            time=at,
            alive_count=alive,
            pi_counts=np.asarray(pi_counts, dtype=np.int64),
            edge_counts=edge_counts.copy(),
            component_sizes=np.asarray(list(roots.values()), dtype=np.int64),
            **extra,
        )

    # recording queues: the uniform grid (plus T) and the requested snapshots
    grid: list[float] = []
    i = 0
    while i * TRAJECTORY_GRID_STEP < config.T - 1e-12:
        grid.append(i * TRAJECTORY_GRID_STEP)
        i += 1
    grid.append(config.T)
    snap_times = sorted(config.snapshot_times)
    snapshots: list[Snapshot] = []
    freeze_log: list[FreezeRecord] = []
    gi = si = 0

    def flush_until(limit: float) -> None:
        """Record grid rows / snapshots at times < limit with current state."""
        nonlocal gi, si
        while gi < len(grid) and grid[gi] < limit:
            record_state(grid[gi])
            gi += 1
        while si < len(snap_times) and snap_times[si] < limit:
            snapshots.append(take_snapshot(snap_times[si]))
            si += 1

    t = 0.0
    proposed = rejected = 0
    while True:
        edge_rate = alive * (alive - 1) / (2.0 * N)
        total_rate = edge_rate + lam * alive
        if total_rate <= 0.0:
            break
        counter.count += 1
        t_next = t + float(rng.exponential(1.0 / total_rate))
        if t_next > config.T:
            break
        flush_until(t_next)
        t = t_next
        counter.count += 1
        if float(rng.uniform()) * total_rate < edge_rate:
            proposed += 1
            counter.count += 2
            a = int(rng.integers(alive))
            b = int(rng.integers(alive - 1))
            if b >= a:
                b += 1
            u, v = alive_list[a], alive_list[b]
            if u > v:
                u, v = v, u
            if (u, v) in edge_set:
                rejected += 1
            else:
                add_edge(u, v)
        else:
            counter.count += 1
            struck = alive_list[int(rng.integers(alive))]
            members = comps.members(struck)
            size = len(members)
            if size != comps.size[comps.find(struck)]:
                raise NumericError(
                    f"component ring of {struck} has {size} members, "
                    f"union-find says {comps.size[comps.find(struck)]}"
                )
            type_counts = np.zeros(k, dtype=np.int64)
            radius = None
            if config.record_radius:
                radius = _radius_profile(struck, members, adjacency, type_list, k)
            for m in members:
                type_counts[type_list[m]] += 1
                for nb in adjacency[m]:
                    if nb > m:
                        ti, tj = type_list[m], type_list[nb]
                        if ti > tj:
                            ti, tj = tj, ti
                        edge_counts[ti, tj] -= 1
                        edge_set.discard((m, nb))
                # swap-remove from the alive array
                pos = alive_pos[m]
                last = alive_list[alive - 1]
                alive_list[pos] = last
                alive_pos[last] = pos
                alive -= 1
                pi_counts[type_list[m]] -= 1
                frozen_counts[type_list[m]] += 1
            freeze_log.append(
                FreezeRecord(
                    time=t,
                    struck_vertex_type=type_list[struck],
                    size=size,
                    type_counts=type_counts,
                    radius_counts=radius,
                )
            )
            check_conservation(t)
            record_state(t)

    flush_until(math.inf)
    check_conservation(config.T)
    logger.info(
        "run N=%d finished: %d freezes, %d/%d edge proposals rejected, %d draws",
        N, len(freeze_log), rejected, proposed, counter.count,
    )
    return SimOutput(
        config=config,
        trajectory=MassTrajectory(
            times=np.asarray(traj_times),
            phi=np.asarray(traj_phi),
            pi=np.asarray(traj_pi),
        ),
        freeze_log=freeze_log,
        snapshots=snapshots,
        rng_draw_count=counter.count,
        proposed_edges=proposed,
        rejected_existing=rejected,
    )


@dataclass(frozen=True)
class EdgePairStats:
    """Per type pair: observed alive edges vs the target graph law.

    z[i, j] (i <= j) standardises the observed count against Binomial(n_ij,
    q_ij) with q_ij = 1 - exp(-(kappa_ij + t)/N); pairs with no candidate
    pairs (or a degenerate q) get z = 0 and a raised flag.
    """

    z: np.ndarray
    flagged: np.ndarray
    observed: np.ndarray
    expected: np.ndarray


def alive_edge_stats(output: SimOutput, snapshot_index: int, kappa0=None) -> EdgePairStats:
    """Standardised per-type-pair edge counts of a stored snapshot."""
    snap = output.snapshots[snapshot_index]
    kap = as_kernel(output.config.kappa0 if kappa0 is None else kappa0)
    N = output.config.N
    k = kap.shape[0]
    counts = snap.pi_counts
    z = np.zeros((k, k))
    flagged = np.zeros((k, k), dtype=bool)
    observed = np.zeros((k, k), dtype=np.int64)
    expected = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            n_ij = (
                int(counts[i]) * (int(counts[i]) - 1) // 2
                if i == j
                else int(counts[i]) * int(counts[j])
            )
            q = -math.expm1(-(kap[i, j] + snap.time) / N)
            observed[i, j] = snap.edge_counts[i, j]
            expected[i, j] = n_ij * q
            spread = n_ij * q * (1.0 - q)
            if n_ij == 0 or spread <= 0.0:
                flagged[i, j] = True
            else:
                z[i, j] = (snap.edge_counts[i, j] - n_ij * q) / math.sqrt(spread)
    return EdgePairStats(z=z, flagged=flagged, observed=observed, expected=expected)


def component_spectrum(output: SimOutput, snapshot_index: int, L: int) -> SizeSpectrum:
    """Per-vertex size distribution v_l = |{alive in size-l components}|/N."""
    if L < 1:
        raise ValueError("L must be at least 1")
    snap = output.snapshots[snapshot_index]
    N = output.config.N
    counts = np.zeros(L, dtype=np.int64)
    leaked_vertices = 0
    for size in snap.component_sizes.tolist():
        if size <= L:
            counts[size - 1] += size
        else:
            leaked_vertices += size
    return SizeSpectrum(v=counts / N, leaked=leaked_vertices / N)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_sim_output(output: SimOutput, directory) -> None:
    """Serialise a run: trajectory.csv, freezes.csv, meta.json, radii.csv.

    radii.csv appears only when at least one freeze carries a radius profile.
    All floats are written with 17 significant digits.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    k = len(output.config.p)

    header = ",".join(["t", "phi"] + [f"pi_{i + 1}" for i in range(k)])
    rows = [header]
    traj = output.trajectory
    for t, phi, pi_row in zip(traj.times, traj.phi, traj.pi):
        rows.append(",".join([_fmt(t), _fmt(phi)] + [_fmt(x) for x in pi_row]))
    (directory / "trajectory.csv").write_text("\n".join(rows) + "\n")

    header = ",".join(["t", "size"] + [f"type_{i + 1}" for i in range(k)] + ["struck_type"])
    rows = [header]
    for rec in output.freeze_log:
        rows.append(
            ",".join(
                [_fmt(rec.time), str(rec.size)]
                + [str(int(c)) for c in rec.type_counts]
                + [str(rec.struck_vertex_type)]
            )
        )
    (directory / "freezes.csv").write_text("\n".join(rows) + "\n")

    if any(rec.radius_counts is not None for rec in output.freeze_log):
        header = ",".join(["freeze_index", "r"] + [f"type_{i + 1}" for i in range(k)])
        rows = [header]
        for idx, rec in enumerate(output.freeze_log):
            if rec.radius_counts is None:
                continue
            for r, row in enumerate(rec.radius_counts):
                rows.append(",".join([str(idx), str(r)] + [str(int(c)) for c in row]))
        (directory / "radii.csv").write_text("\n".join(rows) + "\n")

    cfg = output.config
    meta = {
        "config": {
            "N": cfg.N,
            "p": [int(x) for x in cfg.p],
            "kappa0": [[float(x) for x in row] for row in np.asarray(cfg.kappa0)],
            "T": cfg.T,
            "seed": cfg.seed,
            "lambda_exponent": cfg.lambda_exponent,
            "snapshot_times": [float(s) for s in cfg.snapshot_times],
            "record_radius": cfg.record_radius,
        },
        "rng_draw_count": output.rng_draw_count,
        "proposed_edges": output.proposed_edges,
        "rejected_existing": output.rejected_existing,
        "freeze_count": len(output.freeze_log),
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
