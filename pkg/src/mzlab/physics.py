"""Atomic species data, beam model and the kinematic quantities built on them.

Everything downstream (diffraction, interferometer geometry, dephasing) is a
function of three numbers computed here: the de Broglie wavelength h/(m v),
the first-order Bragg angle lambda_dB/lambda_L and the recoil frequency
hbar k_L^2/(2 m).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss

from . import constants


class ApproximationWarning(UserWarning):
    """A stated validity condition of a closed-form model is being stretched."""


@dataclass(frozen=True)
class Species:
    """Atomic constants of one isotope.

    Units: mass in kg, transition wavelength in m, natural width gamma in
    rad/s, saturation intensity in W/m^2.  ``lande_g`` maps the hyperfine
    quantum number F to its Lande factor g_F.
    """

    name: str
    mass: float
    wavelength: float
    gamma: float
    saturation_intensity: float
    nuclear_spin: float
    abundance: float
    lande_g: dict[float, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.wavelength <= 0:
            raise ValueError("transition wavelength must be positive")
        if self.gamma <= 0:
            raise ValueError("natural width must be positive")
        if not 0.0 <= self.abundance <= 1.0:
            raise ValueError("abundance must lie in [0, 1]")

    @property
    def sublevels(self) -> list[tuple[float, float]]:
        """All (F, M_F) pairs of the ground hyperfine manifold."""
        out = []
        for f in sorted(self.lande_g):
            m = -f
            while m <= f + 1e-9:
                out.append((f, m))
                m += 1.0
        return out

    @classmethod
    def from_table(cls, name: str) -> "Species":
        entry = constants.species_entry(name)
        return cls(
            name=name.lower(),
            mass=entry["mass_amu"] * constants.atomic_mass_unit(),
            wavelength=entry["transition_wavelength_m"],
            gamma=2.0 * math.pi * entry["natural_width_over_2pi_Hz"],
            saturation_intensity=entry["saturation_intensity_W_per_m2"],
            nuclear_spin=entry["nuclear_spin"],
            abundance=entry["abundance"],
            lande_g={float(k): float(v) for k, v in entry["lande_g_per_F"].items()},
        )


def lithium7() -> Species:
    return Species.from_table("li7")


def lithium6() -> Species:
    return Species.from_table("li6")


@dataclass(frozen=True)
class VelocityDistribution:
    """Gaussian longitudinal velocity distribution P(v) ~ exp[-(v-u)^2/alpha^2].

    ``quadrature_order`` sets the number of Gauss-Hermite nodes used whenever
    an observable is averaged over the distribution.
    """

    u: float
    alpha: float = 0.0
    quadrature_order: int = 16

    def __post_init__(self):
        if self.u <= 0:
            raise ValueError("mean velocity u must be positive")
        if not 0.0 <= self.alpha < self.u:
            raise ValueError("width alpha must satisfy 0 <= alpha < u")
        if self.quadrature_order < 1:
            raise ValueError("quadrature_order must be >= 1")
        if self.alpha > 0.5 * self.u:
            warnings.warn(
                f"alpha/u = {self.alpha / self.u:.3f} is far outside the "
                "narrow-spread regime the closed-form averages assume",
                ApproximationWarning,
                stacklevel=2,
            )

    @property
    def relative_spread(self) -> float:
        return self.alpha / self.u

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and weights mapped onto P(v).

        A delta distribution (alpha = 0) collapses to the single node (u, 1).
        Nodes at non-positive velocities are unphysical; they are dropped and
        the remaining weights renormalized.
        """
        if self.alpha == 0.0:
            return np.array([self.u]), np.array([1.0])
        t, w = hermgauss(self.quadrature_order)
        v = self.u + self.alpha * t
        w = w / math.sqrt(math.pi)
        keep = v > 0.0
        v, w = v[keep], w[keep]
        return v, w / w.sum()


def velocity_nodes(dist: VelocityDistribution) -> list[tuple[float, float]]:
    """Velocity quadrature as a list of (v, weight) pairs."""
    v, w = dist.nodes()
    return list(zip(v.tolist(), w.tolist()))


@dataclass(frozen=True)
class LaserField:
    """One laser beam: wavelength (m), detuning from resonance (rad/s),
    power (W), 1/e^2 waist radius (m) and transverse profile."""

    wavelength: float
    detuning: float
    power: float = 0.0
    waist: float = 1e-3
    profile: str = "gaussian"

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.waist <= 0:
            raise ValueError("waist must be positive")
        if self.power < 0:
            raise ValueError("power must be non-negative")
        if self.profile not in ("gaussian", "flat_top"):
            raise ValueError(f"unknown profile {self.profile!r}")

    @property
    def wave_number(self) -> float:
        return 2.0 * math.pi / self.wavelength


def de_broglie_wavelength(species: Species, v: float) -> float:
    """Matter wavelength h/(m v) of an atom moving at speed v."""
    if v <= 0:
        raise ValueError("velocity must be positive")
    return constants.planck_h() / (species.mass * v)


def bragg_angle(species: Species, v: float, laser: LaserField, p: int = 1) -> float:
    """Order-p Bragg incidence angle p * lambda_dB / lambda_L."""
    if p < 1:
        raise ValueError("diffraction order p must be >= 1")
    return p * de_broglie_wavelength(species, v) / laser.wavelength


def recoil_frequency(species: Species, laser: LaserField) -> float:
    """hbar k_L^2 / (2 m), the natural frequency unit of atom-lattice dynamics."""
    k_l = laser.wave_number
    return constants.hbar() * k_l * k_l / (2.0 * species.mass)


def collimation_angular_nodes(
    e_source: float, e_collimator: float, separation: float, n: int = 15
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic quadrature over the trapezoidal angular distribution
    transmitted by two slits of widths ``e_source`` and ``e_collimator``
    a distance ``separation`` apart.

    Returns angle nodes (rad) and normalized weights.  ``n`` is forced odd so
    the axis itself is always a node.
    """
    if min(e_source, e_collimator, separation) <= 0:
        raise ValueError("slit widths and separation must be positive")
    if n < 1:
        raise ValueError("need at least one node")
    n = n if n % 2 == 1 else n + 1
    half_base = 0.5 * (e_source + e_collimator) / separation
    half_top = 0.5 * abs(e_source - e_collimator) / separation
    positive = np.linspace(0.0, half_base, (n + 1) // 2)
    theta = np.concatenate((-positive[:0:-1], positive))
    if half_base == half_top:
        w = np.ones(n)
    else:
        w = np.clip((half_base - np.abs(theta)) / (half_base - half_top), 0.0, 1.0)
    return theta, w / w.sum()
