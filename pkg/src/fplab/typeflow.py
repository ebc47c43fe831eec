"""Critical type-flow solver.

The flow tracks the per-type mass pi(t) of the alive part of the system while
edges accumulate: the effective kernel at time t is kappa(t) = kappa0 + t
(every entry grows at rate 1), and the state obeys

    pi(t) = pi(0)                                   while rho(kappa(t) o pi) < 1,
    rho(kappa(t) o pi(t)) = 1                       from the critical time on,
    dpi/dt = -mu(kappa(t) o pi(t)) * phi(t)         past the critical time,

where mu is the l1-normalised principal left eigenvector and phi(t) > 0 is
the unique scalar rate that keeps the state exactly critical.  Differentiating
the constraint with first-order eigenvalue perturbation gives the closed form

    phi(t) = 1 / sum_ij mu_i * kappa_ij(t) * mu_j^2 / pi_j ,

which is what freeze_rate_phi evaluates (the scalar and symmetric two-type
cases collapse to 1/(c+t)^2 and 4/(a+b+2t)^2, both covered by tests).

Integration is fixed-step RK4 followed by an exact projection back onto the
critical manifold: rho is homogeneous of degree 1 in pi, so dividing pi by
the measured rho restores rho = 1 identically.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NumericError
from .perron import _power_top, as_kernel, as_type_mass, perron_left, perron_root

logger = logging.getLogger(__name__)

_BISECTION_TOL = 1e-12
_CRITICALITY_BAND = 1e-6  # how far from rho = 1 freeze_rate_phi tolerates


@dataclass(frozen=True)
class FlowState:
    """One grid point of the flow: mass vector, eigen-direction, rates.

    phi is 0 before the critical time; at exactly t_c it holds the right-limit
    value (the rate the first post-critical step uses).  rho is a freshly
    measured diagnostic, not an assumption.
    """

    t: float
    pi: np.ndarray
    mu: np.ndarray
    phi: float
    rho: float


@dataclass(frozen=True)
class FlowTrajectory:
    """Recorded flow: critical time, grid, per-grid states, driving kernel."""

    t_c: float
    grid: np.ndarray
    states: list[FlowState]
    kappa0: np.ndarray

    @property
    def phi_total(self) -> np.ndarray:
        """Total alive mass Phi(t) = ||pi(t)||_1 per grid point."""
        return np.asarray([float(s.pi.sum()) for s in self.states])

    def pi_at(self, times) -> np.ndarray:
        """Componentwise linear interpolation of pi onto arbitrary times."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        k = self.states[0].pi.size
        stacked = np.stack([s.pi for s in self.states])
        return np.stack([np.interp(times, self.grid, stacked[:, i]) for i in range(k)], axis=1)

    def phi_at(self, times) -> np.ndarray:
        """Linear interpolation of Phi onto arbitrary times."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        return np.interp(times, self.grid, self.phi_total)


def _flow_preconditions(kap: np.ndarray, mass: np.ndarray) -> float:
    """Validate the well-posedness hypotheses; returns rho at t = 0."""
    if np.any(mass <= 0.0):
        raise ValueError("initial type mass must be strictly positive")
    rho0 = perron_root(kap, mass)
    if rho0 > 1.0 + 1e-12:
        raise ValueError(f"supercritical start: rho(kappa0 o pi0) = {rho0} > 1")
    if rho0 >= 1.0 - 1e-12 and np.any(kap == 0.0):
        raise ValueError("a critical start requires a strictly positive kernel")
    return rho0


def critical_time(kappa0, pi0) -> float:
    """First time t at which rho((kappa0 + t) o pi0) reaches 1.

    The map t -> rho is strictly increasing, so bisection on the bracket
    [0, 1/min(pi0) + max(kappa0)] converges unconditionally; tolerance 1e-12
    on t.  Returns 0 for an already-critical start.
    """
    kap = as_kernel(kappa0)
    mass = as_type_mass(pi0, kap.shape[0])
    rho0 = _flow_preconditions(kap, mass)
    if rho0 >= 1.0 - 1e-12:
        return 0.0
    lo = 0.0
    hi = 1.0 / float(mass.min()) + float(kap.max())
    while hi - lo > _BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if perron_root(kap + mid, mass) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def freeze_rate_phi(kappa0, t: float, pi) -> float:
    """The mass-loss rate phi(t) at a critical state (see module docstring).

    Requires the state to actually be critical (within 1e-6); phi is the
    reciprocal of a sum of positive terms, hence strictly positive.
    """
    kap = as_kernel(kappa0)
    mass = as_type_mass(pi, kap.shape[0])
    if np.any(mass <= 0.0):
        raise ValueError("type mass must be strictly positive")
    if t < 0:
        raise ValueError("t must be non-negative")
    shifted = kap + t
    rho = perron_root(shifted, mass)
    if abs(rho - 1.0) > _CRITICALITY_BAND:
        raise ValueError(f"state is not critical: rho = {rho} at t = {t}")
    mu = perron_left(shifted, mass).mu
    denominator = float(mu @ shifted @ (mu * mu / mass))
    return 1.0 / denominator


class _CriticalStepper:
    """Warm-started spectral engine shared by the flow integrators.

    Keeps the previous eigenvector as the start of the next power iteration;
    along a smooth trajectory each solve then needs only a handful of
    iterations.
    """

    def __init__(self, kappa0: np.ndarray, tol: float = 1e-12):
        self.kappa0 = kappa0
        self.tol = tol
        self._warm: np.ndarray | None = None

    def _solve(self, t: float, pi: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        if np.any(pi <= 0.0):
            raise NumericError(
                "flow state left the positive cone; reduce the integration step"
            )
        root = np.sqrt(pi)
        sym = root[:, np.newaxis] * (self.kappa0 + t) * root[np.newaxis, :]
        lam, unit, _ = _power_top(sym, self.tol, v0=self._warm)
        self._warm = unit
        return lam, unit, root

    def rho(self, t: float, pi: np.ndarray) -> float:
        return self._solve(t, pi)[0]

    def eigen_data(self, t: float, pi: np.ndarray) -> tuple[np.ndarray, float, float]:
        """Returns (mu, phi, rho) at the given state."""
        lam, unit, root = self._solve(t, pi)
        mu = unit * root
        mu = mu / mu.sum()
        shifted = self.kappa0 + t
        phi = 1.0 / float(mu @ shifted @ (mu * mu / pi))
        return mu, phi, lam

    def rhs(self, t: float, pi: np.ndarray) -> np.ndarray:
        mu, phi, _ = self.eigen_data(t, pi)
        return -phi * mu

    def advance(self, t: float, pi: np.ndarray, h: float) -> np.ndarray:
        """One RK4 step of length h followed by the exact criticality projection."""
        k1 = self.rhs(t, pi)
        k2 = self.rhs(t + 0.5 * h, pi + 0.5 * h * k1)
        k3 = self.rhs(t + 0.5 * h, pi + 0.5 * h * k2)
        k4 = self.rhs(t + h, pi + h * k3)
        advanced = pi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return advanced / self.rho(t + h, advanced)


def _positivity_floor(pi0: np.ndarray, kappa_max: float, t: float) -> np.ndarray:
    return pi0 * math.exp(-(kappa_max + t))


def integrate_flow(kappa0, pi0, T: float, step: float = 1e-3) -> FlowTrajectory:
    """Integrate the flow on [0, T].

    The state is constant up to the critical time; past it, RK4 with the
    criticality projection after every step.  The record grid is every
    multiple of ``step`` plus the critical time and T.  A state component
    falling below half the theoretical floor pi0_i * exp(-(kappa_max + t))
    aborts the run: the exact flow cannot do that, so the solver must be at
    fault (step too large).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if T < 0:
        raise ValueError("T must be non-negative")
    kap = as_kernel(kappa0)
    mass0 = as_type_mass(pi0, kap.shape[0])
    _flow_preconditions(kap, mass0)
    t_c = critical_time(kap, mass0)
    kappa_max = float(kap.max())

    merge_tol = 1e-12 * max(1.0, T)
    points = [0.0]
    i = 1
    while i * step < T - merge_tol:
        points.append(i * step)
        i += 1
    if merge_tol < t_c < T - merge_tol:
        points.append(t_c)
    if T > 0:
        points.append(T)
    points.sort()
    grid = [points[0]]
    for p in points[1:]:
        if p - grid[-1] > merge_tol:
            grid.append(p)

    stepper = _CriticalStepper(kap)
    states: list[FlowState] = []
    pi = mass0.copy()
    integrating = False
    for idx, t in enumerate(grid):
        if not integrating:
            at_critical = t >= t_c - merge_tol
            mu, phi_here, rho_here = stepper.eigen_data(t, pi)
            if at_critical:
                # right-limit rate at t_c; from here on the ODE drives pi
                states.append(FlowState(t=t, pi=pi.copy(), mu=mu, phi=phi_here, rho=rho_here))
                integrating = True
            else:
                states.append(FlowState(t=t, pi=pi.copy(), mu=mu, phi=0.0, rho=rho_here))
            continue
        t_prev = grid[idx - 1]
        pi = stepper.advance(t_prev, pi, t - t_prev)
        floor = _positivity_floor(mass0, kappa_max, t)
        if np.any(pi < 0.5 * floor):
            worst = int(np.argmin(pi / floor))
            raise NumericError(
                f"flow component {worst} fell below half its positivity floor at t={t:.6g}; "
                "reduce the integration step"
            )
        mu, phi_here, rho_here = stepper.eigen_data(t, pi)
        states.append(FlowState(t=t, pi=pi.copy(), mu=mu, phi=phi_here, rho=rho_here))

    return FlowTrajectory(t_c=t_c, grid=np.asarray(grid), states=states, kappa0=kap)


@dataclass(frozen=True)
class AsymptoticDirection:
    """Late-time direction pi(t)/Phi(t) with its convergence verdict."""

    direction: np.ndarray
    converged: bool
    T_reached: float


#: Geometric sub-steps per time-doubling in asymptotic_direction.
_OCTAVE_STEPS = 64


def asymptotic_direction(kappa0, pi0, T_max: float = 1e6, tol: float = 1e-4) -> AsymptoticDirection:
    """Late-time limit of the normalised mass direction pi(t)/Phi(t).

    Advances on a geometric grid (64 steps per doubling of t) and stops once
    the direction moved less than tol in l1 over the last doubling, or at
    T_max — in the latter case the best iterate is returned flagged
    unconverged rather than raising.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kap = as_kernel(kappa0)
    mass0 = as_type_mass(pi0, kap.shape[0])
    _flow_preconditions(kap, mass0)
    if kap.shape[0] == 1:
        return AsymptoticDirection(direction=np.ones(1), converged=True, T_reached=0.0)

    t_c = critical_time(kap, mass0)
    stepper = _CriticalStepper(kap)
    pi = mass0.copy()

    # ramp onto the geometric grid: it needs a strictly positive anchor time
    t0 = t_c if t_c >= 1e-3 else 1e-3
    if t_c < t0:
        pi = stepper.advance(t_c, pi, t0 - t_c)

    directions: list[np.ndarray] = []
    t = t0
    j = 0
    while True:
        directions.append(pi / pi.sum())
        if j >= _OCTAVE_STEPS:
            drift = float(np.abs(directions[j] - directions[j - _OCTAVE_STEPS]).sum())
            if drift < tol:
                return AsymptoticDirection(direction=directions[j], converged=True, T_reached=t)
        t_next = t0 * 2.0 ** ((j + 1) / _OCTAVE_STEPS)
        if t_next > T_max:
            logger.warning("asymptotic direction unconverged at T_max=%g", T_max)
            return AsymptoticDirection(direction=directions[j], converged=False, T_reached=t)
        pi = stepper.advance(t, pi, t_next - t)
        t = t_next
        j += 1
