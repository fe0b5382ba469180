"""
Closed-form force laws, potentials, and quasistatic stability analysis for
the sphere-magnet system.

Geometry and sign conventions
-----------------------------
A gold microsphere on a spring faces a gold-plated magnet across a vacuum
gap.  All closed forms below use the ideal zero-temperature, perfect
conductor sphere-plate expressions:

    F(g)   = -(pi^3 hbar c / 360) * R / g^3      force on the sphere, N
    U(g)   = -(pi^3 hbar c / 720) * R / g^2      potential, U(inf) = 0, J
    k_p(g) =  (pi^3 hbar c / 120) * R / g^4      force gradient, N/m

F < 0 means attraction (the force acts to close the gap), and
dU/dg = -F(g).  The identity k_p(g) * g = 3 |F(g)| holds exactly.

An attractive inverse-power coupling *softens* the sphere spring: the
effective stiffness at a working gap g is k0S - k_p(g), and static
stability requires k_p(g) < k0S.  The gap where k_p = k0S is the
quasistatic pull-in boundary g_crit; the commanded rest separation below
which no stable equilibrium exists is s0_crit = (4/3) g_crit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# CODATA 2018; fixed, never user-configurable.
HBAR = 1.054571817e-34  # J*s
C_LIGHT = 299792458.0   # m/s


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = HBAR
    c_light: float = C_LIGHT


CODATA2018 = PhysicalConstants()


class PullInError(ValueError):
    """Gap closed to contact, or no statically stable gap exists."""


class UnstableError(ValueError):
    """Effective stiffness is non-positive (statically unstable gap)."""


def _force_coeff(radius: float) -> float:
    """Coefficient A in F(g) = -A/g^3 for a sphere of the given radius."""
    if radius < 0.0:
        raise ValueError("sphere radius must be >= 0")
    return math.pi**3 * HBAR * C_LIGHT / 360.0 * radius


@dataclass(frozen=True)
class SphereParams:
    """Mechanical constants and drive settings of the sphere resonator.

    ``natural_freq`` (rad/s) must agree with sqrt(spring_k/mass) to 1e-9
    relative; the constructor rejects inconsistent triples rather than
    silently picking one.  ``target_amplitude`` is the oscillation
    amplitude the drive controller regulates to, and ``time_delay`` is
    the drive waveform offset tau_1f.
    """

    mass: float            # kg
    radius: float          # m
    spring_k: float        # N/m
    quality: float         # dimensionless
    natural_freq: float    # rad/s
    target_amplitude: float  # m
    time_delay: float      # s

    def __post_init__(self) -> None:
        for name in ("mass", "spring_k", "quality",
                     "natural_freq", "target_amplitude", "time_delay"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"SphereParams.{name} must be > 0")
        if self.radius < 0.0:
            raise ValueError("SphereParams.radius must be >= 0 "
                             "(0 disables the coupling)")
        w_expect = math.sqrt(self.spring_k / self.mass)
        if abs(self.natural_freq - w_expect) > 1e-9 * w_expect:
            raise ValueError(
                "inconsistent sphere parameters: natural_freq="
                f"{self.natural_freq!r} rad/s but sqrt(spring_k/mass)="
                f"{w_expect!r} rad/s")


@dataclass(frozen=True)
class MagnetParams:
    """Magnet resonator constants, pump settings, and magnetic moment.

    ``mass`` and ``natural_freq`` are only needed when the magnet is
    integrated as a full oscillator; in the default feedback-prescribed
    mode they are ignored and may stay None.  ``pump_amplitude`` is the
    2f pump displacement amplitude and ``time_delay`` its offset tau_2f.
    """

    spring_k: float        # N/m
    quality: float         # dimensionless
    pump_amplitude: float  # m
    time_delay: float      # s
    moment: float          # A*m^2
    field_angle: float = 0.0        # rad, between moment and gradient axis
    mass: float | None = None       # kg, full-ODE mode only
    natural_freq: float | None = None  # rad/s, full-ODE mode only

    def __post_init__(self) -> None:
        for name in ("spring_k", "quality", "pump_amplitude", "moment"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"MagnetParams.{name} must be > 0")
        if self.time_delay < 0.0:
            raise ValueError("MagnetParams.time_delay must be >= 0")
        if not 0.0 <= self.field_angle <= math.pi:
            raise ValueError("MagnetParams.field_angle must be in [0, pi]")
        if self.mass is not None and self.mass <= 0.0:
            raise ValueError("MagnetParams.mass must be > 0 when given")
        if self.natural_freq is not None and self.natural_freq <= 0.0:
            raise ValueError("MagnetParams.natural_freq must be > 0 when given")


@dataclass(frozen=True)
class CouplingConfig:
    """Rest separation and pull-in floor of the coupled cavity.

    ``min_gap`` is the integration floor: below ~10 nm neither the ideal
    force law nor the linear spring model is meaningful, and a crossing
    is treated as terminal pull-in.  ``coupled_quality`` defaults to the
    sphere quality factor when left None.
    """

    rest_separation: float       # m
    min_gap: float = 10e-9       # m
    coupled_quality: float | None = None

    def __post_init__(self) -> None:
        if self.min_gap <= 0.0:
            raise ValueError("CouplingConfig.min_gap must be > 0")
        if self.rest_separation <= self.min_gap:
            raise ValueError(
                "CouplingConfig.rest_separation must exceed min_gap")
        if self.coupled_quality is not None and self.coupled_quality <= 0.0:
            raise ValueError("CouplingConfig.coupled_quality must be > 0")


def nominal_sphere() -> SphereParams:
    """Nominal sphere: k = 25 mN/m, f0 = 1 kHz, Q = 1000, R = 60 um.

    The mass is derived from spring_k and natural_freq (about 633 ng) so
    the triple is self-consistent.
    """
    w0 = 2.0 * math.pi * 1000.0
    k = 25e-3
    return SphereParams(
        mass=k / w0**2,
        radius=60e-6,
        spring_k=k,
        quality=1000.0,
        natural_freq=w0,
        target_amplitude=20e-9,
        time_delay=1.02e-3,
    )


def nominal_magnet() -> MagnetParams:
    """Nominal magnet: k = 25 mN/m, Q = 1000, 10 nm pump, tau_2f = 750 us.

    The moment 0.0625 A*m^2 is calibrated so a 4 pT/cm gradient deflects
    the magnet by 1 nm at k = 25 mN/m.
    """
    return MagnetParams(
        spring_k=25e-3,
        quality=1000.0,
        pump_amplitude=10e-9,
        time_delay=750e-6,
        moment=0.0625,
        field_angle=0.0,
    )


def nominal_coupling() -> CouplingConfig:
    return CouplingConfig(rest_separation=100e-9)


def casimir_force(gap, radius):
    """Sphere-plate force -(pi^3 hbar c/360) R/gap^3, in newtons.

    Always negative (attractive).  Accepts scalars or arrays; gap must be
    positive everywhere, radius >= 0 (radius 0 switches the coupling off).
    """
    gap = np.asarray(gap, dtype=float)
    if np.any(gap <= 0.0):
        raise PullInError("casimir_force: gap <= 0 (contact)")
    out = -_force_coeff(radius) / gap**3
    return float(out) if out.ndim == 0 else out


def casimir_potential(gap, radius):
    """Potential -(pi^3 hbar c/720) R/gap^2 with U(inf) = 0, in joules.

    dU/dgap = -casimir_force(gap, radius).
    """
    gap = np.asarray(gap, dtype=float)
    if np.any(gap <= 0.0):
        raise PullInError("casimir_potential: gap <= 0 (contact)")
    out = -0.5 * _force_coeff(radius) / gap**2
    return float(out) if out.ndim == 0 else out


def parametric_stiffness(gap, radius):
    """Force gradient (pi^3 hbar c/120) R/gap^4, in N/m.

    Equals 3|F(gap)|/gap exactly; this is the stiffness the attractive
    coupling subtracts from the sphere spring.
    """
    gap = np.asarray(gap, dtype=float)
    if np.any(gap <= 0.0):
        raise PullInError("parametric_stiffness: gap <= 0 (contact)")
    out = 3.0 * _force_coeff(radius) / gap**4
    return float(out) if out.ndim == 0 else out


def magnetic_force(moment: float, grad_b: float, angle: float) -> float:
    """Force on the magnet from a gradient field: M * dB/dx * cos(theta)."""
    return moment * grad_b * math.cos(angle)


def sphere_drive_force(t, omega_hat: float, gain: float,
                       p: SphereParams):
    """Drive force gain * k0S * A_S * sin(omega_hat * (t + tau_1f)).

    ``t`` is time relative to the controller's current phase anchor;
    ``gain`` is the amplitude-regulation factor (1 in constant-gain mode).
    """
    if omega_hat <= 0.0:
        raise ValueError("omega_hat must be > 0")
    if gain < 0.0:
        raise ValueError("gain must be >= 0")
    return gain * p.spring_k * p.target_amplitude * np.sin(
        omega_hat * (np.asarray(t, dtype=float) + p.time_delay))


def magnet_pump_displacement(t, omega_hat: float, static_deflection: float,
                             p: MagnetParams):
    """Prescribed magnet position A_M * sin(2 omega_hat (t + tau_2f)) + x0.

    ``t`` is time relative to the controller's current phase anchor and
    ``static_deflection`` the quasistatic offset magnetic_force(...)/k0M.
    """
    if omega_hat <= 0.0:
        raise ValueError("omega_hat must be > 0")
    return p.pump_amplitude * np.sin(
        2.0 * omega_hat * (np.asarray(t, dtype=float) + p.time_delay)
    ) + static_deflection


def total_potential_curve(x_grid, cavity: float, p: SphereParams):
    """Spring plus coupling potential along the sphere coordinate.

    Returns 0.5 k0S x^2 + U_casimir(cavity - x) per grid point, where
    positive x moves the sphere toward the plate.  Every grid point must
    keep cavity - x > 0.
    """
    x = np.asarray(x_grid, dtype=float)
    gaps = cavity - x
    if np.any(gaps <= 0.0):
        raise PullInError("total_potential_curve: grid reaches contact")
    return 0.5 * p.spring_k * x**2 + casimir_potential(gaps, p.radius)


def critical_separation(p: SphereParams) -> tuple[float, float]:
    """Quasistatic pull-in boundary (g_crit, s0_crit).

    g_crit solves k_p(g) = k0S, i.e. g_crit = (3A/k0S)^(1/4) with
    A = pi^3 hbar c R/360; the stable well and the barrier merge when the
    rest separation drops to s0_crit = (4/3) g_crit.
    """
    a = _force_coeff(p.radius)
    g_crit = (3.0 * a / p.spring_k) ** 0.25
    return g_crit, 4.0 * g_crit / 3.0


def static_equilibrium(rest_separation: float, p: SphereParams) -> float:
    """Stable gap g solving k0S (s0 - g) = |F(g)|, by bisection.

    The stable root lies in (g_crit, s0); below s0_crit the spring can no
    longer balance the attraction and the statics have no solution.
    """
    if rest_separation <= 0.0:
        raise ValueError("rest_separation must be > 0")
    a = _force_coeff(p.radius)
    if a == 0.0:
        return rest_separation
    g_crit, s0_crit = critical_separation(p)
    if rest_separation <= s0_crit:
        raise PullInError(
            f"no stable gap: rest separation {rest_separation!r} m is at or "
            f"below the pull-in threshold {s0_crit!r} m")

    def imbalance(g: float) -> float:
        return p.spring_k * (rest_separation - g) - a / g**3

    lo, hi = g_crit, rest_separation  # imbalance(lo) > 0 > imbalance(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if imbalance(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def softened_frequency(gap: float, p: SphereParams) -> float:
    """Coupled small-oscillation frequency sqrt((k0S - k_p(gap))/m)/2pi, Hz.

    The attractive coupling subtracts its force gradient from the spring
    constant, so the resonance shifts *down* as the gap closes; at
    k_p >= k0S the gap is statically unstable and no real frequency
    exists.
    """
    k_p = parametric_stiffness(gap, p.radius)
    k_eff = p.spring_k - k_p
    if k_eff <= 0.0:
        raise UnstableError(
            f"gap {gap!r} m is statically unstable (k_p >= k0S)")
    return math.sqrt(k_eff / p.mass) / (2.0 * math.pi)
