"""Tests for the critical type-flow solver.

Closed-form oracles used below:

* scalar kernel c:  pi(t) = min(1, 1/(c+t)),  phi(t) = 1/(c+t)^2,
  critical time 1 - c (for c < 1).
* exchangeable two-type kernel [[a, b], [b, a]] started from (1/2, 1/2):
  pi_i(t) = min(1/2, 1/(a+b+2t)),  phi(t) = 4/(a+b+2t)^2,
  critical time 1 - (a+b)/2.
* the critical time always equals the reciprocal of the mean progeny of the
  branching tree at t = 0 (rank-one resolvent identity), which gives an
  independent cross-check through expected_progeny.

The asymmetric regression kernel [[1.0, 0.2], [0.2, 0.4]] from (1/2, 1/2)
has critical time 0.39/0.75 = 0.52 exactly (2x2 resolvent by hand).
"""

from __future__ import annotations

import numpy as np
import pytest

from fplab.branching import expected_progeny, progeny_exact
from fplab.exceptions import NumericError
from fplab.perron import perron_left, perron_root
from fplab.smol import smol_rhs
from fplab.typeflow import (
    AsymptoticDirection,
    FlowTrajectory,
    asymptotic_direction,
    critical_time,
    freeze_rate_phi,
    integrate_flow,
)

SCALAR_KERNEL = np.array([[0.5]])
SYMMETRIC_KERNEL = np.array([[0.3, 0.1], [0.1, 0.3]])
ASYMMETRIC_KERNEL = np.array([[1.0, 0.2], [0.2, 0.4]])
HALF_HALF = np.array([0.5, 0.5])


def scalar_pi_exact(c: float, t: float) -> float:
    return min(1.0, 1.0 / (c + t))


def symmetric_pi_exact(a: float, b: float, t: float) -> float:
    return min(0.5, 1.0 / (a + b + 2.0 * t))


def random_subcritical(rng: np.random.Generator, k: int, target_rho: float):
    """Random kernel/mass pair scaled to a prescribed spectral radius."""
    kap = rng.uniform(0.2, 1.5, size=(k, k))
    kap = 0.5 * (kap + kap.T)
    mass = rng.uniform(0.2, 1.0, size=k)
    mass = 0.95 * mass / mass.sum()
    rho = perron_root(kap, mass)
    return kap * (target_rho / rho), mass


class TestCriticalTime:
    def test_scalar_half(self):
        assert critical_time(SCALAR_KERNEL, np.array([1.0])) == pytest.approx(0.5, abs=1e-10)

    def test_critical_start_is_zero(self):
        assert critical_time(np.array([[1.0]]), np.array([1.0])) == 0.0

    def test_symmetric_two_type(self):
        t_c = critical_time(SYMMETRIC_KERNEL, HALF_HALF)
        assert t_c == pytest.approx(0.8, abs=1e-10)

    def test_asymmetric_two_type(self):
        t_c = critical_time(ASYMMETRIC_KERNEL, HALF_HALF)
        assert t_c == pytest.approx(0.52, abs=1e-10)

    def test_matches_reciprocal_mean_progeny(self):
        rng = np.random.default_rng(0xF10)
        for _ in range(10):
            k = int(rng.integers(1, 4))
            kap, mass = random_subcritical(rng, k, float(rng.uniform(0.3, 0.9)))
            t_c = critical_time(kap, mass)
            assert t_c == pytest.approx(1.0 / expected_progeny(kap, mass), abs=1e-8)

    def test_supercritical_start_rejected(self):
        with pytest.raises(ValueError, match="supercritical"):
            critical_time(np.array([[3.0]]), np.array([1.0]))

    def test_critical_start_with_zero_entries_rejected(self):
        kap = np.array([[2.0, 0.0], [0.0, 2.0]])
        with pytest.raises(ValueError, match="strictly positive kernel"):
            critical_time(kap, HALF_HALF)

    def test_zero_mass_entry_rejected(self):
        with pytest.raises(ValueError, match="strictly positive"):
            critical_time(SYMMETRIC_KERNEL, np.array([1.0, 0.0]))


class TestFreezeRatePhi:
    def test_scalar_closed_form(self):
        # critical state at t = 0.7 for c = 0.5 is pi = 1/1.2
        phi = freeze_rate_phi(SCALAR_KERNEL, 0.7, np.array([1.0 / 1.2]))
        assert phi == pytest.approx(1.0 / 1.2**2, rel=1e-12)

    def test_symmetric_closed_form(self):
        pi = np.full(2, 1.0 / 2.4)
        phi = freeze_rate_phi(SYMMETRIC_KERNEL, 1.0, pi)
        assert phi == pytest.approx(4.0 / 2.4**2, rel=1e-12)

    def test_positive_on_random_critical_states(self):
        rng = np.random.default_rng(0xF11)
        for _ in range(20):
            k = int(rng.integers(1, 4))
            kap, mass = random_subcritical(rng, k, float(rng.uniform(0.3, 0.9)))
            t_c = critical_time(kap, mass)
            phi = freeze_rate_phi(kap, t_c, mass)
            assert np.isfinite(phi) and phi > 0

    def test_non_critical_state_rejected(self):
        with pytest.raises(ValueError, match="not critical"):
            freeze_rate_phi(SCALAR_KERNEL, 0.1, np.array([1.0]))

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            freeze_rate_phi(SCALAR_KERNEL, -0.5, np.array([1.0]))

    def test_zero_mass_rejected(self):
        with pytest.raises(ValueError, match="strictly positive"):
            freeze_rate_phi(SYMMETRIC_KERNEL, 1.0, np.array([0.5, 0.0]))

    def test_euler_step_keeps_criticality_to_second_order(self):
        # the defining property of phi: moving mass along -mu*phi for time h
        # leaves the state critical up to O(h^2)
        for kap, pi in [
            (SYMMETRIC_KERNEL, np.full(2, 1.0 / 2.4)),
            (ASYMMETRIC_KERNEL, HALF_HALF),
        ]:
            t = 1.0 if kap is SYMMETRIC_KERNEL else critical_time(kap, pi)
            phi = freeze_rate_phi(kap, t, pi)
            mu = perron_left(kap + t, pi).mu
            drifts = []
            for h in (1e-3, 5e-4):
                stepped = pi - h * mu * phi
                drifts.append(abs(perron_root(kap + t + h, stepped) - 1.0))
            assert drifts[0] < 1e-4
            # quartering under halving pins the quadratic order
            assert 3.0 < drifts[0] / drifts[1] < 5.5


class TestIntegrateFlow:
    def test_scalar_closed_form(self):
        flow = integrate_flow(SCALAR_KERNEL, np.array([1.0]), 3.0)
        exact = np.array([scalar_pi_exact(0.5, t) for t in flow.grid])
        assert np.max(np.abs(flow.phi_total - exact)) <= 1e-8
        assert flow.t_c == pytest.approx(0.5, abs=1e-10)

    def test_symmetric_closed_form(self):
        flow = integrate_flow(SYMMETRIC_KERNEL, HALF_HALF, 3.0)
        exact = np.array([symmetric_pi_exact(0.3, 0.1, t) for t in flow.grid])
        worst = max(abs(s.pi[0] - e) for s, e in zip(flow.states, exact))
        assert worst <= 1e-8

    def test_exchangeable_symmetry_is_preserved_exactly(self):
        flow = integrate_flow(SYMMETRIC_KERNEL, HALF_HALF, 3.0)
        assert all(s.pi[0] == s.pi[1] for s in flow.states)

    def test_critical_start_integrates_from_zero(self):
        flow = integrate_flow(np.array([[1.0]]), np.array([1.0]), 1.0)
        assert flow.t_c == 0.0
        exact = np.array([1.0 / (1.0 + t) for t in flow.grid])
        assert np.max(np.abs(flow.phi_total - exact)) <= 1e-8

    def test_short_horizon_is_constant(self):
        flow = integrate_flow(SYMMETRIC_KERNEL, HALF_HALF, 0.5)
        for s in flow.states:
            assert np.array_equal(s.pi, HALF_HALF)
            assert s.phi == 0.0
            assert s.rho < 1.0

    def test_grid_contains_endpoints_and_critical_time(self):
        flow = integrate_flow(SCALAR_KERNEL, np.array([1.0]), 1.0)
        assert flow.grid[0] == 0.0
        assert flow.grid[-1] == 1.0
        assert np.any(np.abs(flow.grid - 0.5) < 1e-9)
        assert np.all(np.diff(flow.grid) > 0)

    def test_phi_field_matches_direct_evaluation_at_critical_time(self):
        flow = integrate_flow(ASYMMETRIC_KERNEL, HALF_HALF, 1.0)
        at_tc = min(flow.states, key=lambda s: abs(s.t - flow.t_c))
        direct = freeze_rate_phi(ASYMMETRIC_KERNEL, flow.t_c, HALF_HALF)
        assert at_tc.phi == pytest.approx(direct, rel=1e-10)

    def test_pre_critical_states_have_zero_phi(self):
        flow = integrate_flow(ASYMMETRIC_KERNEL, HALF_HALF, 2.0)
        for s in flow.states:
            if s.t < flow.t_c - 1e-9:
                assert s.phi == 0.0
            else:
                assert s.phi > 0.0

    def test_states_stay_critical_after_onset(self):
        flow = integrate_flow(ASYMMETRIC_KERNEL, HALF_HALF, 3.0)
        for s in flow.states:
            if s.t >= flow.t_c + 1e-3:
                assert abs(perron_root(ASYMMETRIC_KERNEL + s.t, s.pi) - 1.0) <= 1e-9

    def test_total_mass_below_reciprocal_time(self):
        flow = integrate_flow(ASYMMETRIC_KERNEL, HALF_HALF, 3.0)
        for t, total in zip(flow.grid, flow.phi_total):
            if t > 0:
                assert total <= 1.0 / t + 1e-9

    def test_mass_continuity_along_grid(self):
        flow = integrate_flow(ASYMMETRIC_KERNEL, HALF_HALF, 3.0)
        totals = flow.phi_total
        for j in range(len(flow.states) - 1):
            jump = abs(totals[j + 1] - totals[j])
            dt = flow.grid[j + 1] - flow.grid[j]
            if flow.states[j].phi == 0.0:
                assert jump == 0.0
            else:
                assert jump <= flow.states[j].phi * dt * 1.1

    def test_componentwise_monotone_and_total_strictly_decreasing(self):
        flow = integrate_flow(ASYMMETRIC_KERNEL, HALF_HALF, 3.0)
        stacked = np.stack([s.pi for s in flow.states])
        assert np.all(np.diff(stacked, axis=0) <= 0.0)
        totals = flow.phi_total
        post = flow.grid >= flow.t_c
        assert np.all(np.diff(totals[post]) < 0.0)

    def test_positivity_floor_holds(self):
        flow = integrate_flow(ASYMMETRIC_KERNEL, HALF_HALF, 3.0)
        k_max = ASYMMETRIC_KERNEL.max()
        for s in flow.states:
            floor = HALF_HALF * np.exp(-(k_max + s.t))
            assert np.all(s.pi >= floor - 1e-12)

    def test_halving_the_step_changes_little(self):
        coarse = integrate_flow(ASYMMETRIC_KERNEL, HALF_HALF, 3.0, step=2e-3)
        fine = integrate_flow(ASYMMETRIC_KERNEL, HALF_HALF, 3.0, step=1e-3)
        fine_lookup = {round(t, 9): s.pi for t, s in zip(fine.grid, fine.states)}
        shared = 0
        for t, s in zip(coarse.grid, coarse.states):
            match = fine_lookup.get(round(t, 9))
            if match is not None:
                shared += 1
                assert float(np.abs(match - s.pi).sum()) <= 1e-7
        assert shared > 1000

    def test_oversized_step_raises(self):
        with pytest.raises(NumericError, match="step"):
            integrate_flow(ASYMMETRIC_KERNEL, HALF_HALF, 10.0, step=5.0)

    def test_supercritical_start_rejected(self):
        with pytest.raises(ValueError, match="supercritical"):
            integrate_flow(np.array([[3.0]]), np.array([1.0]), 1.0)

    def test_bad_arguments_rejected(self):
        with pytest.raises(ValueError, match="step"):
            integrate_flow(SCALAR_KERNEL, np.array([1.0]), 1.0, step=0.0)
        with pytest.raises(ValueError, match="non-negative"):
            integrate_flow(SCALAR_KERNEL, np.array([1.0]), -1.0)

    def test_interpolators_hit_grid_values(self):
        flow = integrate_flow(SYMMETRIC_KERNEL, HALF_HALF, 2.0)
        probe = flow.grid[::100]
        pis = flow.pi_at(probe)
        phis = flow.phi_at(probe)
        for row, t, total in zip(pis, probe, phis):
            idx = int(np.argmin(np.abs(flow.grid - t)))
            assert np.allclose(row, flow.states[idx].pi, atol=1e-12)
            assert total == pytest.approx(float(flow.states[idx].pi.sum()), abs=1e-12)


class TestCoagulationConsistency:
    def test_component_size_masses_solve_the_coagulation_system(self):
        # v_ell(t) := tree mass of size ell under (kappa + t, pi(t)) must obey
        # dv/dt = gain - ell * v_ell * Phi; central differences on the flow
        # grid against the evaluated right-hand side, sizes up to 5
        flow = integrate_flow(SYMMETRIC_KERNEL, HALF_HALF, 1.4)
        step = 1e-3
        targets = [0.3, 0.5, 0.7, 0.75, 0.85, 0.9, 1.0, 1.1, 1.2, 1.3]
        for target in targets:
            idx = int(np.argmin(np.abs(flow.grid - target)))
            lo, mid, hi = flow.states[idx - 1], flow.states[idx], flow.states[idx + 1]
            if abs((hi.t - lo.t) - 2 * step) > 1e-9:
                continue  # straddles the critical-time grid insertion
            def masses(state):
                kern = SYMMETRIC_KERNEL + state.t
                return np.array([progeny_exact(kern, state.pi, ell) for ell in range(1, 6)])
            numeric = (masses(hi) - masses(lo)) / (hi.t - lo.t)
            rhs, _ = smol_rhs(masses(mid), total_mass=float(mid.pi.sum()))
            assert np.max(np.abs(numeric - rhs)) <= 1e-5


class TestAsymptoticDirection:
    def test_scalar_direction_is_one(self):
        out = asymptotic_direction(SCALAR_KERNEL, np.array([1.0]))
        assert isinstance(out, AsymptoticDirection)
        assert out.converged
        assert np.array_equal(out.direction, np.ones(1))

    def test_exchangeable_direction_is_uniform(self):
        out = asymptotic_direction(SYMMETRIC_KERNEL, HALF_HALF)
        assert out.converged
        assert np.allclose(out.direction, HALF_HALF, atol=1e-12)

    def test_asymmetric_direction_converges(self):
        out = asymptotic_direction(ASYMMETRIC_KERNEL, HALF_HALF)
        assert out.converged
        assert out.direction.sum() == pytest.approx(1.0, abs=1e-12)
        floor = HALF_HALF * np.exp(-(ASYMMETRIC_KERNEL.max() + 1.0))
        assert np.all(out.direction >= floor)

    def test_stable_under_doubling_the_horizon(self):
        base = asymptotic_direction(ASYMMETRIC_KERNEL, HALF_HALF, T_max=1e6)
        doubled = asymptotic_direction(ASYMMETRIC_KERNEL, HALF_HALF, T_max=2e6)
        assert float(np.abs(base.direction - doubled.direction).sum()) < 1e-4

    def test_short_horizon_returns_unconverged_without_raising(self):
        out = asymptotic_direction(ASYMMETRIC_KERNEL, HALF_HALF, T_max=1.0)
        assert not out.converged
        assert out.T_reached <= 1.0 + 1e-9
        assert np.all(out.direction > 0)
        assert out.direction.sum() == pytest.approx(1.0, abs=1e-12)

    def test_bad_tolerance_rejected(self):
        with pytest.raises(ValueError, match="tol"):
            asymptotic_direction(SCALAR_KERNEL, np.array([1.0]), tol=0.0)


class TestTrajectoryShape:
    def test_trajectory_fields(self):
        flow = integrate_flow(SCALAR_KERNEL, np.array([1.0]), 1.0)
        assert isinstance(flow, FlowTrajectory)
        assert len(flow.states) == len(flow.grid)
        assert np.array_equal(flow.kappa0, SCALAR_KERNEL)
        for s in flow.states:
            assert s.mu.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(s.mu > 0)
