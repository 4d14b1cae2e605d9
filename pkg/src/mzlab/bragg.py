"""Diffraction of an atom by one laser standing wave.

Two descriptions of the same event live side by side:

* a closed-form two-level (Bragg) model: population transfer follows a Rabi
  oscillation with pulse area q^p tau / d_p, where q is the dimensionless
  lattice depth, tau the dimensionless interaction time and d_p = 1, 4, 64
  for orders p = 1, 2, 3;
* a truncated momentum-basis propagator (`bloch_propagate`) that integrates
  the full coupled dynamics and serves as the in-repo oracle for the closed
  forms.

In the momentum basis |k_x + 2 n k_L> the lattice V0 cos^2(k_L x) becomes a
real symmetric tridiagonal Hamiltonian: diagonal (kappa + 2n)^2 in recoil
units (kappa = k_x / k_L) and constant off-diagonal coupling q.  The constant
diagonal shift 2q is dropped (global phase).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .physics import ApproximationWarning, LaserField, Species, VelocityDistribution
from .physics import de_broglie_wavelength, recoil_frequency

# Two-level coupling denominators per diffraction order.
D_COEFF = {1: 1.0, 2: 4.0, 3: 64.0}

SUPPORTED_ORDERS = (1, 2, 3, 4)


class UnsupportedOrderError(ValueError):
    """Raised when a closed form is requested for an order it does not cover."""


class TruncationError(RuntimeError):
    """Basis growth did not converge the propagated populations."""


@dataclass(frozen=True)
class GratingConfig:
    """One standing wave acting as a thin diffraction grating.

    ``depth`` is the dimensionless lattice depth q, ``duration`` the
    dimensionless interaction time tau, both referenced to the mean beam
    velocity.  Tilts are the physical mirror rotations in rad; ``x_position``
    shifts the standing-wave nodes and therefore the fringe phase.
    """

    order: int
    depth: float
    duration: float
    tilt_y: float = 0.0
    tilt_z: float = 0.0
    x_position: float = 0.0
    laser: LaserField | None = None

    def __post_init__(self):
        if self.order not in SUPPORTED_ORDERS:
            raise UnsupportedOrderError(
                f"order {self.order} outside supported set {SUPPORTED_ORDERS}"
            )
        if self.depth < 0:
            raise ValueError("depth q must be non-negative")
        if self.duration < 0:
            raise ValueError("duration tau must be non-negative")

    @property
    def pulse_area(self) -> float:
        """Two-level pulse area q^p tau / d_p (closed form, p <= 3 only)."""
        if self.order not in D_COEFF:
            raise UnsupportedOrderError(
                f"no closed-form coupling coefficient for order {self.order}"
            )
        return self.depth**self.order * self.duration / D_COEFF[self.order]

    @classmethod
    def from_physical(
        cls,
        order: int,
        laser: LaserField,
        species: Species,
        v: float,
        tilt_y: float = 0.0,
        tilt_z: float = 0.0,
        x_position: float = 0.0,
    ) -> "GratingConfig":
        q, tau = dimensionless_from_physical(laser, species, v)
        return cls(order, q, tau, tilt_y, tilt_z, x_position, laser)


def dimensionless_from_physical(
    laser: LaserField, species: Species, v: float
) -> tuple[float, float]:
    """Map physical laser parameters to the dimensionless pair (q, tau).

    Conventions (fixed here once for the whole project):

    * light-shift depth V0 = hbar Omega1^2 / delta with the single-beam Rabi
      frequency Omega1^2 = gamma^2 I_peak / (2 I_sat);
    * peak intensity I_peak = 2 P / (pi w0^2) for a Gaussian beam and
      P / (pi w0^2) for a flat-top disc of radius w0;
    * equal-area effective interaction time t_int = sqrt(pi/2) w0 / v
      (Gaussian) or 2 w0 / v (flat-top, chord through the centre).

    Returns the magnitude of q; the sign of the light shift does not enter
    any diffraction probability in this model.
    """
    if v <= 0:
        raise ValueError("velocity must be positive")
    if laser.detuning == 0:
        raise ValueError("detuning must be non-zero (resonant light undefined)")
    if abs(laser.detuning) < 50.0 * species.gamma:
        warnings.warn(
            "detuning below 50 natural widths; the far-detuned lattice "
            "picture is marginal",
            ApproximationWarning,
            stacklevel=2,
        )
    if laser.profile == "gaussian":
        i_peak = 2.0 * laser.power / (math.pi * laser.waist**2)
        t_int = math.sqrt(math.pi / 2.0) * laser.waist / v
    else:  # flat_top
        i_peak = laser.power / (math.pi * laser.waist**2)
        t_int = 2.0 * laser.waist / v
    omega_rec = recoil_frequency(species, laser)
    rabi_sq = species.gamma**2 * i_peak / (2.0 * species.saturation_intensity)
    q = rabi_sq / (4.0 * abs(laser.detuning) * omega_rec)
    return q, omega_rec * t_int


def rabi_probability(grating: GratingConfig) -> float:
    """Diffraction probability sin^2(q^p tau / d_p) of the two-level model.

    The complementary population stays in the zeroth-order beam.
    """
    return math.sin(grating.pulse_area) ** 2


def design_pulse(p: int, tau: float, target: str) -> float:
    """Smallest depth q realizing an ideal mirror (area pi/2) or 50-50
    splitter (area pi/4) at fixed duration tau."""
    if tau <= 0:
        raise ValueError("duration tau must be positive")
    if p not in D_COEFF:
        raise UnsupportedOrderError(f"no closed-form design for order {p}")
    try:
        area = {"mirror": math.pi / 2.0, "splitter": math.pi / 4.0}[target]
    except KeyError:
        raise ValueError(f"target must be 'mirror' or 'splitter', got {target!r}") from None
    return (D_COEFF[p] * area / tau) ** (1.0 / p)


class SpontaneousEmission(NamedTuple):
    probability: float
    clamped: bool


def spontaneous_emission_probability(
    grating: GratingConfig, species: Species, detuning: float
) -> SpontaneousEmission:
    """Probability q tau gamma / |delta| of a real photon scattering event,
    clamped to [0, 1] with a flag when clamping occurred."""
    if detuning == 0:
        raise ValueError("detuning must be non-zero")
    raw = grating.depth * grating.duration * species.gamma / abs(detuning)
    return SpontaneousEmission(min(raw, 1.0), raw > 1.0)


@dataclass(frozen=True)
class AmplitudeVector:
    """State of the transverse motion after a lattice pulse.

    ``amplitudes[i]`` belongs to momentum k_x + 2 n k_L with
    n = i - n_max, for i in [0, 2 n_max].
    """

    k_x: float
    amplitudes: np.ndarray
    n_max: int

    def population(self, n: int) -> float:
        if abs(n) > self.n_max:
            raise IndexError(f"order {n} outside truncation +-{self.n_max}")
        return float(abs(self.amplitudes[self.n_max + n]) ** 2)

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)


def _lattice_eig(kappa: float, q: float, n_max: int):
    n = np.arange(-n_max, n_max + 1, dtype=float)
    diag = (kappa + 2.0 * n) ** 2
    if q == 0.0 or n_max == 0:
        return diag, None
    off = np.full(2 * n_max, q)
    return eigh_tridiagonal(diag, off)


def _evolve(c: np.ndarray, kappa: float, q: float, dtau: float, n_max: int) -> np.ndarray:
    w, vecs = _lattice_eig(kappa, q, n_max)
    if vecs is None:
        return np.exp(-1j * w * dtau) * c
    return vecs @ (np.exp(-1j * w * dtau) * (vecs.T @ c))


def _propagate_populations(
    kappa: float, q: float, tau: float, n_max: int, profile: str, steps: int
) -> np.ndarray:
    c = np.zeros(2 * n_max + 1, dtype=complex)
    c[n_max] = 1.0
    if tau == 0.0 or q == 0.0:
        # Free evolution only changes phases; populations are exact.
        return _evolve(c, kappa, q, tau, n_max)
    if profile == "square":
        return _evolve(c, kappa, q, tau, n_max)
    # Gaussian envelope with unit peak and area tau: q(s) = q exp(-pi s^2/tau^2).
    # Tails beyond 3 tau carry < 1e-12 of the area.
    s_max = 3.0 * tau
    ds = 2.0 * s_max / steps
    s = -s_max + (np.arange(steps) + 0.5) * ds
    for si in s:
        c = _evolve(c, kappa, q * math.exp(-math.pi * si * si / (tau * tau)), ds, n_max)
    return c


def bloch_propagate(
    k_x: float,
    q: float,
    tau: float,
    n_max: int | None = None,
    profile: str = "square",
    check_truncation: bool = True,
    pop_tol: float = 1e-6,
) -> AmplitudeVector:
    """Propagate the amplitudes c_n on momenta k_x + 2 n k_L through one
    lattice pulse of depth q and duration tau (both dimensionless).

    ``profile`` selects a square pulse (piecewise-constant depth, solved
    exactly by eigendecomposition) or a Gaussian envelope of equal area,
    integrated by unitary exponential midpoint steps.  Each step is exactly
    norm-conserving, so norm drift stays at rounding level (< 1e-12).

    With ``check_truncation`` the basis is grown in steps of 2 until no
    population changes by more than ``pop_tol``; failure to converge raises
    :class:`TruncationError` carrying the residual change.
    """
    if profile not in ("square", "gaussian"):
        raise ValueError(f"unknown profile {profile!r}")
    if not (math.isfinite(q) and math.isfinite(tau)):
        raise ValueError("q and tau must be finite")
    if q < 0 or tau < 0:
        raise ValueError("q and tau must be non-negative")

    auto = n_max is None
    if auto:
        n_max = max(6, int(math.ceil(abs(k_x) / 2.0)) + 4)

    def run(n: int) -> np.ndarray:
        if profile == "square":
            return _propagate_populations(k_x, q, tau, n, "square", 0)
        steps, c_prev = 256, None
        while True:
            c = _propagate_populations(k_x, q, tau, n, "gaussian", steps)
            if c_prev is not None and np.max(
                np.abs(np.abs(c) ** 2 - np.abs(c_prev) ** 2)
            ) < 1e-8:
                return c
            if steps >= 4096:
                return c
            c_prev, steps = c, steps * 2

    c = run(n_max)
    if not check_truncation:
        return AmplitudeVector(k_x, c, n_max)

    grow_limit = n_max + 20
    while True:
        c_big = run(n_max + 2)
        p_small = np.abs(c) ** 2
        p_big = np.abs(c_big[2:-2]) ** 2
        worst = float(np.max(np.abs(p_big - p_small)))
        if worst < pop_tol:
            return AmplitudeVector(k_x, c, n_max)
        n_max += 2
        c = c_big
        if n_max >= grow_limit:
            raise TruncationError(
                f"populations still change by {worst:.2e} (> {pop_tol:.0e}) "
                f"at basis size n_max = {n_max}"
            )


def _two_level_transfer(
    p: int, q: float, tau: float, dk: np.ndarray | float
) -> np.ndarray | float:
    """Generalized Rabi transfer probability at momentum offset dk (units of
    k_L) from exact order-p Bragg incidence.

    Coupling Omega_p = 2 q^p / d_p; kinetic detuning Delta = 4 p dk in recoil
    units, the energy difference between the coupled momentum states
    (p + dk)^2 and (-p + dk)^2.
    """
    if p not in D_COEFF:
        raise UnsupportedOrderError(f"no closed-form coupling for order {p}")
    omega = 2.0 * q**p / D_COEFF[p]
    if omega == 0.0:
        return np.zeros_like(np.asarray(dk, dtype=float)) if np.ndim(dk) else 0.0
    delta = 4.0 * p * np.asarray(dk, dtype=float)
    w = np.sqrt(omega * omega + delta * delta)
    out = (omega * omega / (w * w)) * np.sin(w * tau / 2.0) ** 2
    return out if np.ndim(dk) else float(out)


def off_bragg_probability(
    grating: GratingConfig,
    epsilon: float,
    species: Species,
    v: float,
    laser: LaserField | None = None,
) -> float:
    """Order-p transfer probability at incidence angle epsilon away from the
    exact Bragg angle.  Reduces to :func:`rabi_probability` at epsilon = 0.

    The lattice wavelength is taken from ``laser``, else from the grating's
    own laser, else from the species transition (quasi-resonant lattice).
    """
    source = laser or grating.laser
    lambda_l = source.wavelength if source else species.wavelength
    theta_b1 = de_broglie_wavelength(species, v) / lambda_l
    if abs(epsilon) >= 10.0 * grating.order * theta_b1:
        warnings.warn(
            "incidence offset beyond ten Bragg angles; the two-level "
            "closed form is unreliable there",
            ApproximationWarning,
            stacklevel=2,
        )
    return float(
        _two_level_transfer(
            grating.order, grating.depth, grating.duration, epsilon / theta_b1
        )
    )


def diffraction_scan(
    theta_y: np.ndarray,
    grating: GratingConfig,
    species: Species,
    dist: VelocityDistribution,
    laser: LaserField | None = None,
    collimation: tuple[np.ndarray, np.ndarray] | None = None,
    method: str = "bloch",
    n_max: int | None = None,
) -> np.ndarray:
    """Transmitted (order-0) fraction as the standing-wave mirror rotates.

    The grating's q is velocity independent while tau and the Bragg angle
    scale as 1/v; both are referenced to the mean velocity ``dist.u``.  The
    transmitted fraction is averaged over the velocity quadrature nodes and,
    if given, over collimation angle nodes ``(angles, weights)``.

    ``method="bloch"`` resolves every diffraction order inside the basis
    (including order 4); ``method="two_level"`` sums closed-form losses over
    orders +-1..3 and is exact only where the orders are well separated.
    """
    theta_y = np.atleast_1d(np.asarray(theta_y, dtype=float))
    source = laser or grating.laser
    lambda_l = source.wavelength if source else species.wavelength
    v_nodes, v_weights = dist.nodes()
    if collimation is None:
        a_nodes, a_weights = np.array([0.0]), np.array([1.0])
    else:
        a_nodes, a_weights = collimation

    if method not in ("bloch", "two_level"):
        raise ValueError(f"unknown method {method!r}")

    theta_b1_u = de_broglie_wavelength(species, dist.u) / lambda_l
    if method == "bloch" and n_max is None:
        kappa_max = (np.max(np.abs(theta_y)) + np.max(np.abs(a_nodes))) / theta_b1_u
        kappa_max *= np.max(v_nodes) / dist.u
        # deep lattices spread population over ~2 sqrt(q) momentum orders
        n_max = int(math.ceil(kappa_max)) + 3 + int(2.0 * math.sqrt(grating.depth))

    transmitted = np.zeros_like(theta_y)
    for v, wv in zip(v_nodes, v_weights):
        theta_b1 = theta_b1_u * dist.u / v
        tau_v = grating.duration * dist.u / v
        for a, wa in zip(a_nodes, a_weights):
            kappa = (theta_y + a) / theta_b1
            if method == "bloch":
                p0 = np.empty_like(kappa)
                for i, kap in enumerate(kappa):
                    c = _propagate_populations(
                        kap, grating.depth, tau_v, n_max, "square", 0
                    )
                    p0[i] = abs(c[n_max]) ** 2
            else:
                loss = np.zeros_like(kappa)
                for signed_p in (-3, -2, -1, 1, 2, 3):
                    p_abs = abs(signed_p)
                    dk = kappa - signed_p
                    loss += _two_level_transfer(p_abs, grating.depth, tau_v, dk)
                p0 = np.clip(1.0 - loss, 0.0, 1.0)
            transmitted += wv * wa * p0
    return transmitted
