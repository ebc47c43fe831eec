"""Truncated Smoluchowski coagulation solver with multiplicative kernel.

State: v[ell-1] = mass of vertices sitting in size-ell clusters, ell = 1..L.
Dynamics:

    dv_ell/dt = (ell/2) * sum_{m < ell} v_m v_{ell-m}  -  ell * v_ell * sum_m v_m

Coagulation flux into sizes above the truncation order L is not reflected
back; it accumulates in a separate ``leaked`` register, so that
sum(v) + leaked is an exact invariant of the truncated system (the loss term
uses the truncated sum only, matching the gain the truncated system can see).
Pre-gel the leak is the truncation bias; post-gel it is the gel mass.

Integration is classical fixed-step RK4; trajectories are smooth away from
the gel time, and the time grid is aligned to hit the gel time exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericError

#: Negative values beyond this are instability, not roundoff; abort the run.
_NEGATIVITY_ABORT = -1e-10


@dataclass(frozen=True)
class SizeSpectrum:
    """Truncated component-size mass vector plus accumulated overflow mass."""

    v: np.ndarray
    leaked: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.v, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("size spectrum must be a nonempty vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("size spectrum entries must be finite")
        if np.any(arr < 0):
            raise ValueError("size spectrum entries must be non-negative")
        if self.leaked < 0 or not math.isfinite(self.leaked):
            raise ValueError("leaked mass must be finite and non-negative")
        object.__setattr__(self, "v", arr)

    @property
    def L(self) -> int:
        return int(self.v.size)

    def total_mass(self) -> float:
        return float(self.v.sum())


@dataclass(frozen=True)
class SpectrumTrajectory:
    """Recorded solution of the truncated coagulation system."""

    times: np.ndarray
    states: list[SizeSpectrum]
    phi_total: np.ndarray
    t_gel: float = field(default=math.inf)


def _mass_vector(v) -> np.ndarray:
    if isinstance(v, SizeSpectrum):
        return v.v
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError("expected a 1-d mass vector or a SizeSpectrum")
    return arr


def gel_time(v0, first_moment: float | None = None) -> float:
    """Gel time 1 / sum_ell ell*v0[ell] of the untruncated system.

    Uses the truncated first moment of ``v0`` by default; callers holding a
    tail-corrected moment (e.g. the branching-tree expected progeny for
    spectra born from a tree distribution) should pass it explicitly.
    """
    v = _mass_vector(v0)
    if float(v.sum()) <= 0.0:
        raise ValueError("initial spectrum carries no mass")
    m1 = float(first_moment) if first_moment is not None else float(np.arange(1, v.size + 1) @ v)
    if m1 == 0.0:
        return math.inf
    if m1 < 0.0:
        raise ValueError("first moment must be non-negative")
    return 1.0 / m1


def smol_rhs(v, total_mass: float | None = None) -> tuple[np.ndarray, float]:
    """Right-hand side of the truncated system plus the leak rate into sizes > L.

    total_mass overrides the loss-term multiplier sum_m v_m; the consistency
    harness passes the full (untruncated) mass there when it is known from an
    exact source, since the truncated sum misses tail mass near criticality.
    """
    vec = _mass_vector(v)
    L = vec.size
    # full[m] = sum_{a+b=m} vec[a]*vec[b]; entries a, b are sizes a+1, b+1,
    # so full[m] collects ordered pairs merging to size m+2
    full = np.convolve(vec, vec)
    sizes = np.arange(1, L + 1, dtype=float)
    gain = np.zeros(L)
    gain[1:] = 0.5 * sizes[1:] * full[: L - 1]
    mass = float(vec.sum()) if total_mass is None else float(total_mass)
    dv = gain - sizes * vec * mass
    overflow_sizes = np.arange(L + 1, 2 * L + 1, dtype=float)
    leak_rate = float(0.5 * overflow_sizes @ full[L - 1 :])
    return dv, leak_rate


def integrate_smol(v0, T: float, step: float) -> SpectrumTrajectory:
    """Integrate the truncated system on [0, T] with fixed-step RK4.

    The record grid is every multiple of ``step`` plus the gel time and T
    themselves.  Negative excursions above the abort threshold are clamped to
    zero after each step; anything worse raises NumericError (the step is too
    large for the current truncation order).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if T < 0:
        raise ValueError("T must be non-negative")
    start = v0 if isinstance(v0, SizeSpectrum) else SizeSpectrum(np.asarray(v0, dtype=float))
    if start.L < 2:
        raise ValueError("truncation order must be at least 2")

    t_gel = gel_time(start, first_moment=None) if start.v.any() else math.inf

    # record grid: multiples of step, plus t_gel and T exactly
    merge_tol = 1e-12 * max(1.0, T)
    points = [0.0]
    i = 1
    while i * step < T - merge_tol:
        points.append(i * step)
        i += 1
    if math.isfinite(t_gel) and merge_tol < t_gel < T - merge_tol:
        points.append(t_gel)
    points.append(T)
    points.sort()
    grid = [points[0]]
    for p in points[1:]:
        if p - grid[-1] > merge_tol:
            grid.append(p)

    v = start.v.copy()
    leaked = start.leaked
    states = [SizeSpectrum(v.copy(), leaked)]
    for t_prev, t_next in zip(grid[:-1], grid[1:]):
        h = t_next - t_prev
        k1, l1 = smol_rhs(v)
        k2, l2 = smol_rhs(v + 0.5 * h * k1)
        k3, l3 = smol_rhs(v + 0.5 * h * k2)
        k4, l4 = smol_rhs(v + h * k3)
        v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        leaked += (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)

        worst = float(v.min())
        if worst < _NEGATIVITY_ABORT:
            raise NumericError(
                f"size spectrum went negative ({worst:.3e}) at t={t_next:.6g}: "
                "the integration step is too large for this truncation order"
            )
        # negative underflow from roundoff; clamp to keep the state admissible
        np.clip(v, 0.0, None, out=v)
        leaked = max(leaked, 0.0)
        states.append(SizeSpectrum(v.copy(), leaked))

    times = np.asarray(grid)
    phi_total = np.asarray([s.total_mass() for s in states])
    return SpectrumTrajectory(times=times, states=states, phi_total=phi_total, t_gel=t_gel)
