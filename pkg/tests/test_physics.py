"""Force-law, potential, and quasistatic stability checks.

Expected values are recomputed here from the raw expressions (independent
arithmetic oracle), by quadrature, or by finite differences; none are
copied from the implementation under test.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from casigrad.physics import (
    C_LIGHT,
    HBAR,
    CouplingConfig,
    MagnetParams,
    PullInError,
    SphereParams,
    UnstableError,
    casimir_force,
    casimir_potential,
    critical_separation,
    magnet_pump_displacement,
    magnetic_force,
    nominal_coupling,
    nominal_magnet,
    nominal_sphere,
    parametric_stiffness,
    softened_frequency,
    sphere_drive_force,
    static_equilibrium,
    total_potential_curve,
)

R_NOM = 60e-6
# independent oracle coefficient: F = -A/g^3
A_ORACLE = math.pi**3 * HBAR * C_LIGHT / 360.0 * R_NOM

gaps = st.floats(min_value=20e-9, max_value=5e-6)


class TestCasimirForce:
    def test_value_at_100nm(self):
        # direct arithmetic oracle
        assert casimir_force(100e-9, R_NOM) == pytest.approx(
            -A_ORACLE / (100e-9) ** 3, rel=1e-14)
        assert casimir_force(100e-9, R_NOM) == pytest.approx(-1.634e-10, rel=1e-3)

    def test_cubic_scaling(self):
        f1 = casimir_force(100e-9, R_NOM)
        f2 = casimir_force(200e-9, R_NOM)
        assert f2 == pytest.approx(f1 / 8.0, rel=1e-12)

    def test_far_field_vanishes(self):
        # |F(1 m)| = A/g^3 = 1.63e-31 N: 21 orders below the 100 nm value
        assert abs(casimir_force(1.0, R_NOM)) < 1e-30
        assert abs(casimir_force(1.0, R_NOM)) < 1e-20 * abs(casimir_force(100e-9, R_NOM))

    def test_contact_raises(self):
        with pytest.raises(PullInError):
            casimir_force(0.0, R_NOM)
        with pytest.raises(PullInError):
            casimir_force(-1e-9, R_NOM)

    @given(gaps)
    def test_attractive_everywhere(self, g):
        assert casimir_force(g, R_NOM) < 0.0

    @given(gaps)
    def test_magnitude_decreasing(self, g):
        assert abs(casimir_force(1.5 * g, R_NOM)) < abs(casimir_force(g, R_NOM))

    @given(gaps)
    def test_halving_identity(self, g):
        assert casimir_force(2 * g, R_NOM) == pytest.approx(
            casimir_force(g, R_NOM) / 8.0, rel=1e-12)


class TestCasimirPotential:
    def test_value_at_100nm(self):
        assert casimir_potential(100e-9, R_NOM) == pytest.approx(
            -0.5 * A_ORACLE / (100e-9) ** 2, rel=1e-14)
        assert casimir_potential(100e-9, R_NOM) == pytest.approx(-8.17e-18, rel=1e-3)

    def test_quadrature_cross_check(self):
        # U(g) = U(1 mm) + int_g^1mm F dg', segmented so quad resolves the peak
        gap = 100e-9
        edges = [gap * 10**k for k in range(5)]
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = quad(lambda g: casimir_force(g, R_NOM), a, b, epsrel=1e-12)
            total += val
        u_oracle = casimir_potential(1e-3, R_NOM) + total
        assert casimir_potential(gap, R_NOM) == pytest.approx(u_oracle, rel=1e-4)

    def test_reference_at_infinity(self):
        assert abs(casimir_potential(1e6, R_NOM)) < 1e-40

    def test_finite_difference_gives_force(self):
        g = 150e-9
        h = 1e-3 * g
        dU = (casimir_potential(g + h, R_NOM) - casimir_potential(g - h, R_NOM)) / (2 * h)
        assert -dU == pytest.approx(casimir_force(g, R_NOM), rel=1e-6)

    @given(gaps)
    def test_finite_difference_everywhere(self, g):
        h = 1e-3 * g
        dU = (casimir_potential(g + h, R_NOM) - casimir_potential(g - h, R_NOM)) / (2 * h)
        assert -dU == pytest.approx(casimir_force(g, R_NOM), rel=1e-6)

    def test_contact_raises(self):
        with pytest.raises(PullInError):
            casimir_potential(0.0, R_NOM)


class TestParametricStiffness:
    def test_value_at_100nm(self):
        assert parametric_stiffness(100e-9, R_NOM) == pytest.approx(
            3.0 * A_ORACLE / (100e-9) ** 4, rel=1e-14)
        assert parametric_stiffness(100e-9, R_NOM) == pytest.approx(4.90e-3, rel=1e-2)

    def test_value_near_equilibrium_gap(self):
        assert parametric_stiffness(91.5e-9, R_NOM) == pytest.approx(7.0e-3, rel=2e-3)

    def test_quartic_scaling(self):
        kp = parametric_stiffness(80e-9, R_NOM)
        assert parametric_stiffness(160e-9, R_NOM) == pytest.approx(kp / 16.0, rel=1e-12)

    @given(gaps)
    def test_identity_with_force(self, g):
        assert parametric_stiffness(g, R_NOM) * g == pytest.approx(
            3.0 * abs(casimir_force(g, R_NOM)), rel=1e-12)

    def test_contact_raises(self):
        with pytest.raises(PullInError):
            parametric_stiffness(-1e-9, R_NOM)


class TestMagneticForce:
    def test_calibrated_value(self):
        # 4 pT/cm = 4e-10 T/m; with M = 0.0625 A*m^2 the deflection at
        # k = 25 mN/m is exactly 1 nm
        f = magnetic_force(0.0625, 4e-10, 0.0)
        assert f == pytest.approx(2.5e-11, rel=1e-12)
        assert f / 25e-3 == pytest.approx(1e-9, rel=1e-12)

    def test_orthogonal_field(self):
        assert abs(magnetic_force(0.0625, 4e-10, math.pi / 2)) < 1e-26

    def test_zero_gradient(self):
        assert magnetic_force(0.0625, 0.0, 0.3) == 0.0


class TestDriveAndPump:
    def test_drive_peak_force(self):
        p = nominal_sphere()
        # choose t so that omega*(t + tau1f) = pi/2
        w = 2.0 * math.pi * 1000.0
        t = (math.pi / 2) / w - p.time_delay
        assert sphere_drive_force(t, w, 1.0, p) == pytest.approx(5.0e-10, rel=1e-12)

    def test_drive_off(self):
        p = nominal_sphere()
        for t in np.linspace(0.0, 1e-2, 7):
            assert sphere_drive_force(t, 6283.0, 0.0, p) == 0.0

    def test_drive_zero_crossing(self):
        p = nominal_sphere()
        w = 2.0 * math.pi * 1000.0
        t = math.pi / w - p.time_delay
        assert abs(sphere_drive_force(t, w, 1.0, p)) < 1e-22

    def test_pump_peak(self):
        p = nominal_magnet()
        w = 2.0 * math.pi * 1000.0
        t = (math.pi / 2) / (2 * w) - p.time_delay
        assert magnet_pump_displacement(t, w, 0.0, p) == pytest.approx(10e-9, rel=1e-12)

    def test_pump_additivity(self):
        p = nominal_magnet()
        w = 2.0 * math.pi * 1000.0
        t = -p.time_delay  # sin argument exactly zero
        assert magnet_pump_displacement(t, w, 0.5e-9, p) == pytest.approx(
            0.5e-9, rel=1e-12)

    def test_pump_off_is_pure_deflection(self):
        p = MagnetParams(spring_k=25e-3, quality=1000.0, pump_amplitude=1e-30,
                         time_delay=750e-6, moment=0.0625)
        for t in np.linspace(0.0, 3e-3, 5):
            assert magnet_pump_displacement(t, 6283.0, 2e-9, p) == pytest.approx(
                2e-9, rel=1e-12)


class TestPotentialCurve:
    def test_spring_at_rest(self):
        p = nominal_sphere()
        u = total_potential_curve(np.array([0.0]), 100e-9, p)
        assert u[0] == casimir_potential(100e-9, p.radius)

    def test_well_and_barrier_at_100nm(self):
        # dense grid scan: interior local minimum and local maximum
        p = nominal_sphere()
        x = np.linspace(-20e-9, 55e-9, 4001)
        u = total_potential_curve(x, 100e-9, p)
        du = np.diff(u)
        signs = np.sign(du)
        flips = np.flatnonzero(np.diff(signs) != 0)
        assert len(flips) == 2
        assert signs[flips[0]] < 0 < signs[flips[0] + 1]  # minimum first
        assert signs[flips[1]] > 0 > signs[flips[1] + 1]  # then barrier

    def test_no_well_below_critical(self):
        p = nominal_sphere()
        x = np.linspace(1e-9, 60e-9, 4001)
        u = total_potential_curve(x, 80e-9, p)
        assert np.all(np.diff(u) < 0.0)

    def test_contact_in_grid_raises(self):
        p = nominal_sphere()
        with pytest.raises(PullInError):
            total_potential_curve(np.array([0.0, 100e-9]), 100e-9, p)

    def test_coupling_off_reduces_to_spring(self):
        p = SphereParams(mass=1e-9, radius=0.0, spring_k=25e-3, quality=1000.0,
                         natural_freq=math.sqrt(25e-3 / 1e-9),
                         target_amplitude=20e-9, time_delay=1.02e-3)
        x = np.linspace(-50e-9, 50e-9, 101)
        assert np.array_equal(total_potential_curve(x, 100e-9, p),
                              0.5 * p.spring_k * x**2)


class TestStaticEquilibrium:
    def test_nominal_gap(self):
        # independent bisection oracle on the balance equation
        p = nominal_sphere()
        k = p.spring_k
        lo, hi = 70e-9, 100e-9
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if k * (100e-9 - mid) - A_ORACLE / mid**3 > 0.0:
                lo = mid
            else:
                hi = mid
        g_oracle = 0.5 * (lo + hi)
        g = static_equilibrium(100e-9, p)
        assert g == pytest.approx(g_oracle, rel=1e-12)
        assert g == pytest.approx(91.5e-9, rel=1e-3)

    def test_residual_below_attonewton_scale(self):
        p = nominal_sphere()
        g = static_equilibrium(100e-9, p)
        residual = p.spring_k * (100e-9 - g) - abs(casimir_force(g, p.radius))
        assert abs(residual) < 1e-18

    def test_coupling_off(self):
        p = SphereParams(mass=1e-9, radius=0.0, spring_k=25e-3, quality=1000.0,
                         natural_freq=math.sqrt(25e-3 / 1e-9),
                         target_amplitude=20e-9, time_delay=1.02e-3)
        assert static_equilibrium(100e-9, p) == 100e-9

    def test_pull_in_below_threshold(self):
        p = nominal_sphere()
        with pytest.raises(PullInError):
            static_equilibrium(85e-9, p)

    def test_threshold_bracketing(self):
        p = nominal_sphere()
        _, s0_crit = critical_separation(p)
        with pytest.raises(PullInError):
            static_equilibrium(s0_crit * 0.999, p)
        g = static_equilibrium(s0_crit * 1.001, p)
        assert g > 0.0

    @given(st.floats(min_value=90e-9, max_value=500e-9))
    @settings(max_examples=25)
    def test_balance_and_stability(self, s0):
        p = nominal_sphere()
        g = static_equilibrium(s0, p)
        assert abs(p.spring_k * (s0 - g) - abs(casimir_force(g, p.radius))) < 1e-18
        assert g > critical_separation(p)[0]


class TestCriticalSeparation:
    def test_closed_form_values(self):
        p = nominal_sphere()
        g_crit, s0_crit = critical_separation(p)
        assert g_crit == pytest.approx((3 * A_ORACLE / p.spring_k) ** 0.25, rel=1e-14)
        assert g_crit == pytest.approx(66.5e-9, rel=1e-3)
        assert s0_crit == pytest.approx(88.7e-9, rel=1e-3)
        assert parametric_stiffness(g_crit, p.radius) == pytest.approx(
            p.spring_k, rel=1e-9)

    def test_stiffness_scaling(self):
        p = nominal_sphere()
        w2 = p.natural_freq * math.sqrt(2.0)
        stiff = SphereParams(mass=p.mass, radius=p.radius,
                             spring_k=2 * p.spring_k, quality=p.quality,
                             natural_freq=w2,
                             target_amplitude=p.target_amplitude,
                             time_delay=p.time_delay)
        g1 = critical_separation(p)[0]
        g2 = critical_separation(stiff)[0]
        assert g2 == pytest.approx(g1 * 2 ** -0.25, rel=1e-12)


class TestSoftenedFrequency:
    def test_nominal_coupled_frequency(self):
        p = nominal_sphere()
        g = static_equilibrium(100e-9, p)
        f = softened_frequency(g, p)
        # fixed-point + softening oracle
        f_oracle = math.sqrt(
            (p.spring_k - 3 * A_ORACLE / g**4) / p.mass) / (2 * math.pi)
        assert f == pytest.approx(f_oracle, rel=1e-12)
        assert abs(f - 849.0) < 5.0

    def test_uncoupled_limit(self):
        p = nominal_sphere()
        assert softened_frequency(1.0, p) == pytest.approx(1000.0, rel=1e-9)

    def test_unstable_at_critical_gap(self):
        p = nominal_sphere()
        g_crit, _ = critical_separation(p)
        with pytest.raises(UnstableError):
            softened_frequency(g_crit * 0.9999, p)

    @given(st.floats(min_value=70e-9, max_value=1e-6),
           st.floats(min_value=1.01, max_value=3.0))
    @settings(max_examples=25)
    def test_monotone_in_gap(self, g, factor):
        p = nominal_sphere()
        assert softened_frequency(g * factor, p) > softened_frequency(g, p)


class TestParamValidation:
    def test_inconsistent_sphere_frequency(self):
        with pytest.raises(ValueError, match="inconsistent"):
            SphereParams(mass=1e-9, radius=60e-6, spring_k=25e-3, quality=1000.0,
                         natural_freq=2 * math.pi * 1000.0,
                         target_amplitude=20e-9, time_delay=1.02e-3)

    def test_consistent_sphere_accepts(self):
        # 1 ug with 25 mN/m is a valid resonator at ~796 Hz
        SphereParams(mass=1e-9, radius=60e-6, spring_k=25e-3, quality=1000.0,
                     natural_freq=math.sqrt(25e-3 / 1e-9),
                     target_amplitude=20e-9, time_delay=1.02e-3)

    def test_nominal_factories_are_consistent(self):
        s = nominal_sphere()
        assert s.natural_freq == pytest.approx(2 * math.pi * 1000.0, rel=1e-12)
        assert s.spring_k == 25e-3
        nominal_magnet()
        c = nominal_coupling()
        assert c.rest_separation == 100e-9
        assert c.min_gap == 10e-9

    def test_magnet_angle_range(self):
        with pytest.raises(ValueError):
            MagnetParams(spring_k=25e-3, quality=1000.0, pump_amplitude=10e-9,
                         time_delay=750e-6, moment=0.0625, field_angle=3.5)

    def test_coupling_orders(self):
        with pytest.raises(ValueError):
            CouplingConfig(rest_separation=5e-9, min_gap=10e-9)
