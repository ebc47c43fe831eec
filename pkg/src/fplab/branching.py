"""Multitype Poisson branching trees over a type-weighted kernel.

The tree: a root of type i exists with probability pi[i] (no root at all with
probability 1 - sum(pi)); a vertex of type i begets an independent
Poisson(kappa[i,j] * pi[j]) number of type-j children.  This module computes
survival probabilities (maximal fixed point of the exponential map), expected
total progeny (resolvent formula), the exact total-progeny distribution for
small sizes (a sum over labelled trees enumerated by Pruefer sequences, with a
dynamic-programming contraction over type assignments), and seeded Monte
Carlo samples of the total progeny.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import NearCriticalWarning, NumericError
from .perron import as_kernel, as_type_mass, circ, perron_root

#: Largest tree size progeny_exact will evaluate; the labelled-tree sum grows
#: like ell^(ell-2), so sizes past 8 belong to progeny_pmf_mc.
EXACT_SIZE_CAP = 8

_SURVIVAL_ITERATION_CAP = 10**6


class _EscapedType:
    """Singleton marker: a sampled tree exceeded its population cap."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Escaped"


#: Returned by progeny_sample when the population passes the cap.  The escape
#: event approximates survival for large caps; it is never the same thing.
ESCAPED = _EscapedType()


def survival(kappa, pi, tol: float = 1e-12) -> np.ndarray:
    """Per-type survival probabilities of the branching tree.

    Iterates zeta <- 1 - exp(-(kappa o pi) zeta) from the all-ones vector.
    The map is monotone and the iterates decrease, so they converge to the
    maximal fixed point; iteration stops when the sup-norm step drops below
    tol.  Subcritical and critical kernels yield the zero vector.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    weighted = kap * mass[np.newaxis, :]
    zeta = np.ones(kap.shape[0])
    for _ in range(_SURVIVAL_ITERATION_CAP):
        nxt = -np.expm1(-(weighted @ zeta))
        if float(np.max(np.abs(nxt - zeta))) < tol:
            return nxt
        zeta = nxt
    raise NumericError(
        f"survival iteration did not reach tol={tol} in {_SURVIVAL_ITERATION_CAP} steps "
        "(kernel is extremely close to critical)"
    )


def expected_progeny(kappa, pi) -> float:
    """Mean total progeny (root included), or math.inf when it diverges.

    Subcritical case: pi^T (I - kappa o pi)^{-1} (1,...,1).  At or above
    criticality the mean is infinite; within 1e-10 of criticality the
    resolvent is numerically singular, so the result is reported as infinite
    with a NearCriticalWarning rather than trusting a wildly conditioned
    solve.
    """
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    support = np.flatnonzero(mass)
    if support.size == 0:
        return 0.0
    # Zero-mass types never appear in the tree; restrict to the support so the
    # spectral radius is computed on a strictly positive mass vector.
    sub_kap = kap[np.ix_(support, support)]
    sub_mass = mass[support]
    rho = perron_root(sub_kap, sub_mass)
    if abs(1.0 - rho) < 1e-10:
        warnings.warn(
            f"spectral radius {rho} is within 1e-10 of criticality; reporting infinite progeny",
            NearCriticalWarning,
            stacklevel=2,
        )
        return math.inf
    if rho >= 1.0:
        return math.inf
    k = support.size
    resolvent = np.linalg.solve(np.eye(k) - sub_kap * sub_mass[np.newaxis, :], np.ones(k))
    return float(sub_mass @ resolvent)


# ---------------------------------------------------------------------------
# exact total-progeny distribution


def _per_vertex_factors(kap: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """f[i] = pi[i] * exp(-sum_j kappa[i,j] pi[j]): the weight a tree pays for
    containing a vertex of type i (presence times no-extra-children)."""
    return mass * np.exp(-(kap @ mass))


def _prufer_decode(seq: tuple[int, ...], n: int) -> list[tuple[int, int]]:
    """Edges of the labelled tree on {0..n-1} with Pruefer sequence ``seq``."""
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    edges: list[tuple[int, int]] = []
    ptr = 0
    leaf = -1
    for x in seq:
        if leaf < 0:
            while degree[ptr] != 1:
                ptr += 1
            leaf = ptr
        edges.append((leaf, x))
        degree[leaf] -= 1
        degree[x] -= 1
        if degree[x] == 1 and x < ptr:
            leaf = x
        else:
            leaf = -1
            ptr += 1
    last = [i for i in range(n) if degree[i] == 1]
    edges.append((last[0], last[1]))
    return edges


def _tree_weight(edges: list[tuple[int, int]], kap_rows: list[list[float]], factors: list[float], n: int, k: int) -> float:
    """Sum over type assignments of prod(edge kernels) * prod(vertex factors),
    contracted bottom-up along the tree: message[u][i] multiplies f[i] by
    sum_j kappa[i,j] * message[child][j] over the children of u."""
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adjacency[u].append(v)
        adjacency[v].append(u)

    parent = [-1] * n
    order = [0]
    seen = [False] * n
    seen[0] = True
    head = 0
    while head < len(order):
        u = order[head]
        head += 1
        for w in adjacency[u]:
            if not seen[w]:
                seen[w] = True
                parent[w] = u
                order.append(w)

    messages: list[list[float] | None] = [None] * n
    for u in reversed(order):
        msg = list(factors)
        for w in adjacency[u]:
            if parent[w] == u:
                child = messages[w]
                for i in range(k):
                    row = kap_rows[i]
                    acc = 0.0
                    for j in range(k):
                        acc += row[j] * child[j]
                    msg[i] *= acc
        messages[u] = msg
    return sum(messages[0])


def progeny_exact(kappa, pi, ell: int) -> float:
    """P(total progeny == ell), evaluated exactly.

    Sums the tree weight over all labelled trees on [ell] (via Pruefer
    sequences for ell >= 3) and divides by (ell-1)!; the per-tree weight sums
    the kernel product over type assignments by dynamic programming.  Cost is
    ell^(ell-2) trees times O(ell k^2) each, hence the hard size cap.
    """
    if not isinstance(ell, (int, np.integer)) or ell < 1:
        raise ValueError("ell must be a positive integer")
    if ell > EXACT_SIZE_CAP:
        raise ValueError(
            f"ell={ell} exceeds the exact-enumeration cap {EXACT_SIZE_CAP}; "
            "use progeny_pmf_mc for larger sizes"
        )
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    k = kap.shape[0]
    factors = _per_vertex_factors(kap, mass)

    if ell == 1:
        return float(factors.sum())
    if ell == 2:
        return float(factors @ kap @ factors)

    kap_rows = [list(map(float, row)) for row in kap]
    factor_list = list(map(float, factors))
    total = 0.0
    for seq in itertools.product(range(ell), repeat=ell - 2):
        edges = _prufer_decode(seq, ell)
        total += _tree_weight(edges, kap_rows, factor_list, ell, k)
    return total / math.factorial(ell - 1)


def _spanning_trees_bruteforce(n: int) -> list[list[tuple[int, int]]]:
    """All labelled trees on {0..n-1} by brute subset-of-edges enumeration."""
    pairs = list(itertools.combinations(range(n), 2))
    trees = []
    for subset in itertools.combinations(pairs, n - 1):
        # connectivity check by union-find
        root = list(range(n))

        def find(x: int) -> int:
            while root[x] != x:
                root[x] = root[root[x]]
                x = root[x]
            return x

        ok = True
        for u, v in subset:
            ru, rv = find(u), find(v)
            if ru == rv:
                ok = False
                break
            root[ru] = rv
        if ok:
            trees.append(list(subset))
    return trees


def _progeny_exact_bruteforce(kappa, pi, ell: int) -> float:
    """Self-check path for ell <= 4: enumerate trees as raw edge subsets and
    sum type assignments by full k^ell enumeration (no DP, no Pruefer)."""
    if ell > 4:
        raise ValueError("brute-force path is kept only for ell <= 4")
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    k = kap.shape[0]
    factors = _per_vertex_factors(kap, mass)
    total = 0.0
    for tree in _spanning_trees_bruteforce(ell):
        for assignment in itertools.product(range(k), repeat=ell):
            w = 1.0
            for u, v in tree:
                w *= kap[assignment[u], assignment[v]]
            for i in assignment:
                w *= factors[i]
            total += w
    return total / math.factorial(ell - 1)


@dataclass(frozen=True)
class ProgenyPmf:
    """Truncated total-progeny distribution.

    probs[ell-1] = P(size == ell) for ell = 1..L; empty_mass = P(no root);
    tail_mass = everything else (sizes > L plus survival mass).
    """

    probs: np.ndarray
    empty_mass: float
    tail_mass: float


def progeny_pmf(kappa, pi, L: int = EXACT_SIZE_CAP) -> ProgenyPmf:
    """Exact truncated pmf up to size L (L <= exact-enumeration cap)."""
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    probs = np.array([progeny_exact(kap, mass, ell) for ell in range(1, L + 1)])
    empty = 1.0 - float(mass.sum())
    tail = 1.0 - empty - float(probs.sum())
    return ProgenyPmf(probs=probs, empty_mass=empty, tail_mass=max(tail, 0.0))


# ---------------------------------------------------------------------------
# Monte Carlo


def progeny_sample(kappa, pi, seed: int, cap: int = 10**6):
    """One seeded draw of the total progeny.

    Simulates the tree breadth-first, one generation at a time (per-type
    offspring counts of a whole generation are Poisson with the summed
    intensity, which is the same law as drawing per parent).  Returns the
    total size, or ESCAPED as soon as the population exceeds ``cap``.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    k = kap.shape[0]
    rng = np.random.default_rng(seed)

    u = float(rng.random())
    cumulative = np.cumsum(mass)
    if u >= cumulative[-1]:
        return 0
    root_type = int(np.searchsorted(cumulative, u, side="right"))

    weighted = kap * mass[np.newaxis, :]
    generation = np.zeros(k)
    generation[root_type] = 1.0
    total = 1
    while generation.any():
        children = rng.poisson(generation @ weighted)
        total += int(children.sum())
        if total > cap:
            return ESCAPED
        generation = children.astype(float)
    return total


@dataclass(frozen=True)
class McProgenyPmf:
    """Empirical total-progeny distribution from n seeded samples.

    freqs[ell] = fraction of samples with size exactly ell (ell = 0..ell_max);
    escaped_fraction = fraction that passed the population cap.  Sizes in
    (ell_max, cap] fall in neither bucket.
    """

    freqs: np.ndarray
    escaped_fraction: float
    n: int


def progeny_pmf_mc(kappa, pi, n: int, seed: int, ell_max: int = EXACT_SIZE_CAP, cap: int = 10**6) -> McProgenyPmf:
    """Empirical pmf of the total progeny from n independent trees.

    All trees advance generation-by-generation in one vectorised batch; the
    per-tree law is identical to progeny_sample.  Deterministic given seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    k = kap.shape[0]
    rng = np.random.default_rng(seed)

    cumulative = np.cumsum(mass)
    u = rng.random(n)
    has_root = u < cumulative[-1]
    root_type = np.searchsorted(cumulative, u, side="right")

    totals = has_root.astype(np.int64)
    escaped = np.zeros(n, dtype=bool)
    generation = np.zeros((n, k))
    rows = np.flatnonzero(has_root)
    generation[rows, root_type[rows]] = 1.0

    weighted = kap * mass[np.newaxis, :]
    active = generation.any(axis=1)
    while active.any():
        idx = np.flatnonzero(active)
        children = rng.poisson(generation[idx] @ weighted).astype(np.int64)
        totals[idx] += children.sum(axis=1)
        over = totals[idx] > cap
        escaped[idx[over]] = True
        children[over] = 0
        generation[idx] = children
        active[idx] = children.any(axis=1)

    finite = totals[~escaped]
    counts = np.bincount(finite[finite <= ell_max], minlength=ell_max + 1)
    return McProgenyPmf(
        freqs=counts / n,
        escaped_fraction=float(escaped.sum()) / n,
        n=n,
    )
