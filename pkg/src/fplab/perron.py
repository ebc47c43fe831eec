"""Principal-eigenpair toolkit for type-weighted kernels.

Everything downstream (branching trees, the critical type flow, the simulator
harness) reduces at some point to spectral data of the matrix

    (kappa o pi)[i, j] = kappa[i, j] * pi[j],

where ``kappa`` is a symmetric non-negative connection kernel between k vertex
types and ``pi`` is the per-type mass vector.  That matrix is not symmetric,
but it is similar to the symmetric "bullet" matrix

    (kappa . pi)[i, j] = sqrt(pi[i]) * kappa[i, j] * sqrt(pi[j])

via D = diag(sqrt(pi)):  kappa o pi = D^-1 (kappa . pi) D.  All eigensolves
here run as power iteration on the bullet matrix — real spectrum, orthogonal
eigenvectors, monotone Rayleigh quotients — and map the results back.

k is small (a handful of vertex types, hard cap 32), so dense arrays and
O(k^2) matvecs are the right tool; nothing here is sparse-aware.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSpectrumError, NumericError, PowerIterationError

logger = logging.getLogger(__name__)

#: Hard cap on the number of vertex types; the package targets small-k models.
MAX_TYPES = 32

#: Slack allowed on "sum(pi) <= 1" so that round-trip serialisation never
#: flips a valid mass vector into an invalid one.
MASS_SLACK = 1e-12


def as_kernel(kappa) -> np.ndarray:
    """Validate and return ``kappa`` as a float64 k-by-k array.

    A kernel must be square, symmetric, entrywise non-negative and finite,
    with k between 1 and MAX_TYPES.
    """
    arr = np.asarray(kappa, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"kernel must be a square matrix, got shape {arr.shape}")
    k = arr.shape[0]
    if not 1 <= k <= MAX_TYPES:
        raise ValueError(f"kernel size {k} outside [1, {MAX_TYPES}]")
    if not np.all(np.isfinite(arr)):
        raise ValueError("kernel entries must be finite")
    if np.any(arr < 0):
        raise ValueError("kernel entries must be non-negative")
    if not np.array_equal(arr, arr.T):
        raise ValueError("kernel must be symmetric")
    return arr


def as_type_mass(pi, k: int | None = None) -> np.ndarray:
    """Validate and return ``pi`` as a float64 length-k mass vector.

    Entries are non-negative and finite and sum to at most 1 (within slack):
    a subdistribution over types.  If ``k`` is given, the length must match.
    """
    arr = np.asarray(pi, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"type mass must be a vector, got shape {arr.shape}")
    if k is not None and arr.shape[0] != k:
        raise ValueError(f"type mass has length {arr.shape[0]}, expected {k}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("type mass entries must be finite")
    if np.any(arr < 0):
        raise ValueError("type mass entries must be non-negative")
    total = float(arr.sum())
    if total > 1.0 + MASS_SLACK:
        raise ValueError(f"type mass sums to {total}, must be <= 1")
    return arr


def circ(kappa, pi) -> np.ndarray:
    """Column-weighted kernel: result[i, j] = kappa[i, j] * pi[j].

    This is the mean-offspring matrix of the associated multitype branching
    structure; generally non-symmetric.
    """
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    return kap * mass[np.newaxis, :]


def bullet(kappa, pi) -> np.ndarray:
    """Symmetrised form sqrt(pi)_i * kappa[i,j] * sqrt(pi)_j.

    Shares its spectrum with ``circ(kappa, pi)`` (diagonal similarity when pi
    is strictly positive; equal block spectra when some pi entries vanish).
    """
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    root = np.sqrt(mass)
    return root[:, np.newaxis] * kap * root[np.newaxis, :]


@dataclass(frozen=True)
class PerronPair:
    """Principal eigendata of a column-weighted kernel.

    rho       -- the largest eigenvalue (spectral radius; the matrix is
                 non-negative, so the two coincide).
    mu        -- principal left eigenvector, entrywise positive, sum 1.
    nu        -- principal right eigenvector, normalised so that nu . pi = 1;
                 satisfies nu[i] = mu[i] / pi[i] up to that scaling.
    residual  -- achieved max-norm residual ||mu (kappa o pi) - rho mu||_inf.
    """

    rho: float
    mu: np.ndarray
    nu: np.ndarray
    residual: float


def _support_components(sym: np.ndarray) -> list[list[int]]:
    """Connected components of the nonzero pattern of a symmetric matrix."""
    k = sym.shape[0]
    adjacent = sym != 0.0
    seen = [False] * k
    components = []
    for start in range(k):
        if seen[start]:
            continue
        seen[start] = True
        stack = [start]
        comp = [start]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(adjacent[u]):
                v = int(v)
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
                    comp.append(v)
        components.append(sorted(comp))
    return components


def _iteration_cap(k: int, tol: float) -> int:
    return int(math.ceil(100 * k * math.log(1.0 / tol)))


def _power_top(sym: np.ndarray, tol: float, v0: np.ndarray | None = None) -> tuple[float, np.ndarray, int]:
    """Top eigenpair of a symmetric non-negative matrix by shifted power iteration.

    Returns (eigenvalue, unit eigenvector (l2, non-negative), iterations).
    ``v0`` warm-starts the iteration (absolute value is taken; the Perron
    vector is non-negative, so sign information in a stale start is noise).

    The matrix is normalised by its largest entry before iterating.  For a
    symmetric non-negative matrix the top eigenvalue is at least the largest
    entry (Cauchy interlacing on the 2x2 principal submatrix), so the
    normalised eigenvalue lies in [1, k] and the absolute residual test below
    is simultaneously a relative one.  It also makes the iterate sequence
    invariant under scaling of the input (up to entry rounding), so callers
    comparing eigenvectors of s*K against K see agreement at full precision.

    The shift is the Gershgorin lower bound: with s = max(0, -min_i(sym[i,i] -
    sum_{j != i} sym[i,j])), every eigenvalue of sym + s*I is >= 0, so the top
    one strictly dominates in modulus and the iteration cannot oscillate
    between +/- lambda (which a zero-diagonal bipartite pattern would
    otherwise produce).  Rayleigh quotients are still taken on the unshifted
    matrix.
    """
    k = sym.shape[0]
    if k == 1:
        return float(sym[0, 0]), np.ones(1), 0
    if not sym.any():
        return 0.0, np.full(k, 1.0 / math.sqrt(k)), 0

    scale = float(sym.max())
    sym = sym / scale

    off_row_sums = sym.sum(axis=1) - np.diag(sym)
    shift = max(0.0, -float(np.min(np.diag(sym) - off_row_sums)))

    if v0 is None:
        v = np.full(k, 1.0 / math.sqrt(k))
    else:
        v = np.abs(np.asarray(v0, dtype=float))
        norm = np.linalg.norm(v)
        v = v / norm if norm > 0 else np.full(k, 1.0 / math.sqrt(k))

    cap = _iteration_cap(k, tol)
    best_residual = math.inf
    stall = 0
    rayleigh_history: list[float] = []
    lam = 0.0
    for iteration in range(1, cap + 1):
        image = sym @ v
        lam = float(v @ image)
        residual = float(np.max(np.abs(image - lam * v)))
        if residual <= tol:
            return lam * scale, v, iteration
        rayleigh_history.append(lam)

        if residual < 0.999 * best_residual:
            best_residual = residual
            stall = 0
        else:
            stall += 1
            if stall >= 50 * k:
                # Deflation-free restart: mix in a deterministic positive
                # perturbation to escape a stagnant subspace.
                bump = np.random.default_rng(iteration).random(k)
                v = np.abs(v) + 0.5 * bump
                v /= np.linalg.norm(v)
                stall = 0
                continue

        w = image + shift * v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            # Warm start landed in the kernel of the matrix; restart clean.
            v = np.full(k, 1.0 / math.sqrt(k))
            continue
        v = w / norm

    # Cap reached.  If the recent Rayleigh estimates cluster at two values
    # within tol of each other, the top eigenvalue is (numerically) not
    # simple; report that as degeneracy rather than guessing a vector.
    recent = sorted(set(round(x, 14) for x in rayleigh_history[-20:]), reverse=True)
    if len(recent) >= 2 and abs(recent[0] - recent[1]) < tol * max(1.0, abs(recent[0])):
        raise DegenerateSpectrumError(
            f"top eigenvalue not simple within tol={tol}: Rayleigh estimates "
            f"{recent[0] * scale} and {recent[1] * scale}"
        )
    raise PowerIterationError(
        f"power iteration did not converge in {cap} steps (last estimate {lam * scale})",
        estimate=lam * scale,
        vector=v,
        iterations=cap,
    )


def _check_spectral_preconditions(kap: np.ndarray, mass: np.ndarray) -> None:
    if np.any(mass == 0.0) and np.any(kap == 0.0):
        raise ValueError(
            "need either a strictly positive type mass or a strictly positive kernel"
        )


def perron_root(kappa, pi, tol: float = 1e-12) -> float:
    """Largest eigenvalue of circ(kappa, pi).

    Computed as the top eigenvalue of the symmetrised bullet matrix.  A wholly
    zero matrix yields 0.  Reducible support is handled by solving each
    diagonal block separately and taking the maximum (well defined even when
    blocks tie; only eigenVECTOR extraction needs simplicity).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    _check_spectral_preconditions(kap, mass)
    sym = bullet(kap, mass)
    components = _support_components(sym)
    if len(components) == 1:
        lam, _, _ = _power_top(sym, tol)
        return lam
    lam_max = 0.0
    for comp in components:
        block = sym[np.ix_(comp, comp)]
        lam, _, _ = _power_top(block, tol)
        lam_max = max(lam_max, lam)
    return lam_max


def perron_left(kappa, pi, tol: float = 1e-12) -> PerronPair:
    """Principal eigenpair of circ(kappa, pi).

    Returns mu (left, positive, l1-normalised), nu = mu/pi rescaled so that
    nu . pi = 1, the eigenvalue rho, and the achieved residual.  Requires a
    strictly positive type mass (nu is undefined otherwise) and an
    irreducible kernel support: on a disconnected support pattern the
    principal left eigenvector is either non-unique (tied block radii) or not
    strictly positive (one dominant block), and this routine refuses to guess.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    if np.any(mass == 0.0):
        raise ValueError("type mass must be strictly positive for eigenvector extraction")

    sym = bullet(kap, mass)
    components = _support_components(sym)
    if len(components) > 1:
        radii = sorted((_power_top(sym[np.ix_(c, c)], tol)[0] for c in components), reverse=True)
        if abs(radii[0] - radii[1]) <= tol * max(1.0, radii[0]):
            raise DegenerateSpectrumError(
                f"kernel support splits into {len(components)} blocks with tied spectral radii "
                f"{radii[0]:.6g} ~ {radii[1]:.6g}: principal eigenvector is not unique"
            )
        raise DegenerateSpectrumError(
            f"kernel support splits into {len(components)} blocks (radii {radii}): principal "
            "eigenvector is supported on one block only and cannot be strictly positive"
        )

    lam, unit, iterations = _power_top(sym, tol)
    logger.debug("perron_left converged in %d iterations (rho=%g)", iterations, lam)

    # Left eigenvector of circ = bullet eigenvector scaled up by sqrt(pi):
    # with D = diag(sqrt(pi)) and circ = D^-1 B D, u B = lam u gives
    # (u D) circ = lam (u D).
    mu = unit * np.sqrt(mass)
    mu = mu / mu.sum()
    nu = mu / mass
    nu = nu / float(nu @ mass)  # exact renormalisation; a no-op up to rounding

    weighted = circ(kap, mass)
    residual = float(np.max(np.abs(mu @ weighted - lam * mu)))
    return PerronPair(rho=lam, mu=mu, nu=nu, residual=residual)


def perron_project(kappa, pi, v, R: int) -> np.ndarray:
    """R steps of the normalised left action v <- v (kappa o pi) / ||.||_1.

    For R -> infinity this converges to mu of ``perron_left`` whenever the
    support is irreducible; per-step renormalisation makes overflow
    impossible regardless of R.
    """
    if not isinstance(R, (int, np.integer)) or R < 1:
        raise ValueError("R must be a positive integer")
    kap = as_kernel(kappa)
    mass = as_type_mass(pi, kap.shape[0])
    probe = np.asarray(v, dtype=float)
    if probe.shape != (kap.shape[0],):
        raise ValueError(f"probe vector has shape {probe.shape}, expected ({kap.shape[0]},)")
    if np.any(probe < 0) or not probe.any():
        raise ValueError("probe vector must be non-negative and nonzero")

    weighted = circ(kap, mass)
    out = probe.copy()
    for _ in range(R):
        out = out @ weighted
        total = float(out.sum())
        if total <= 0.0:
            raise NumericError("projection annihilated the probe vector (zero column mass)")
        out /= total
    return out
