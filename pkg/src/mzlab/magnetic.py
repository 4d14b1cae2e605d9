"""Zeeman phases, gradient-induced sublevel dephasing and fringe revivals.

A weak magnetic field keeps the hyperfine sublevels |F, M_F> adiabatically
following the local field direction, so each sublevel accumulates the phase
(g_F mu_B M_F / hbar v) * integral B ds along its path.  A homogeneous field
cancels between the two arms; a gradient leaves the per-sublevel splay
Delta phi = phi * M_F that beats the eight-fold ground manifold of the
interference signal in and out of contrast.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import least_squares

from . import constants
from .physics import ApproximationWarning, Species, VelocityDistribution, lithium7
from .signals import FitConvergenceError, IllConditionedFitError

# Validity bound of the closed-form velocity-averaged visibility.
CLOSED_FORM_SPREAD_BOUND = 0.3


@dataclass(frozen=True)
class MagneticScenario:
    """Field environment along the interferometer arms.

    ``field_modulus`` is the background |B(s)| in T, a constant or a callable
    of the path coordinate s in [0, path_length]; it must never vanish
    (adiabatic-following premise).  The gradient source is a dipole of moment
    ``dipole_moment`` (A m^2) at distance ``dipole_distance`` (m) from the
    arms, where the path separation is ``path_separation`` (m) at the
    reference velocity; the separation scales as 1/v with the Bragg angle.
    """

    species: Species
    field_modulus: float | Callable[[float], float] = 4e-5
    path_length: float = 1.21
    dipole_moment: float = 0.0
    dipole_distance: float = 7.5e-3
    path_separation: float = 9.675e-5
    reference_velocity: float = 1060.0

    def __post_init__(self):
        if self.path_length <= 0:
            raise ValueError("path length must be positive")
        if self.dipole_distance <= 0:
            raise ValueError("dipole distance must be positive")
        if callable(self.field_modulus):
            probes = np.linspace(0.0, self.path_length, 33)
            if any(self.field_modulus(s) <= 0 for s in probes):
                raise ValueError("field modulus must stay positive (adiabaticity)")
        elif self.field_modulus <= 0:
            raise ValueError("field modulus must stay positive (adiabaticity)")

    def field_integral(self) -> float:
        """integral |B(s)| ds along one arm, in T m."""
        if callable(self.field_modulus):
            val, _ = quad(self.field_modulus, 0.0, self.path_length)
            return val
        return self.field_modulus * self.path_length

    def lande_magnitude(self) -> float:
        return max(abs(g) for g in self.species.lande_g.values())


def zeeman_phase(scenario: MagneticScenario, f: float, m_f: float, v: float) -> float:
    """Adiabatic Zeeman phase (g_F mu_B M_F / hbar v) * integral B ds of one
    arm.  Common to both arms for a homogeneous field, where it drops out of
    the interference signal."""
    if v <= 0:
        raise ValueError("velocity must be positive")
    try:
        g_f = scenario.species.lande_g[f]
    except KeyError:
        raise KeyError(f"species {scenario.species.name} has no F={f} level") from None
    return (g_f * constants.bohr_magneton() * m_f
            / (constants.hbar() * v)) * scenario.field_integral()


@functools.lru_cache(maxsize=1)
def gradient_geometry_integral() -> float:
    """Angular factor integral_{-pi/2}^{pi/2} sqrt(3 cos^2 t + 1) cos t dt of
    the dipole-gradient line integral (about 3.42)."""
    val, _ = quad(lambda t: math.sqrt(3.0 * math.cos(t) ** 2 + 1.0) * math.cos(t),
                  -math.pi / 2.0, math.pi / 2.0, epsabs=1e-12, epsrel=1e-12)
    return val


def gradient_phase(scenario: MagneticScenario, v: float) -> float:
    """Per-unit-M_F phase splay from the dipole field gradient.

    phi = (g_F mu_B / hbar v) * Delta x(v) * (mu0 mu / 2 pi d^3) * C with the
    angular factor C from :func:`gradient_geometry_integral`, the path
    separation treated as constant across the gradient region, and the
    homogeneous background neglected inside the integral.  Scales as 1/v^2
    overall because the separation itself shrinks with the Bragg angle.
    """
    if v <= 0:
        raise ValueError("velocity must be positive")
    sep = scenario.path_separation * scenario.reference_velocity / v
    grad_integral = (constants.mu0() * scenario.dipole_moment
                     / (2.0 * math.pi * scenario.dipole_distance**3)
                     ) * gradient_geometry_integral()
    return (scenario.lande_magnitude() * constants.bohr_magneton()
            / (constants.hbar() * v)) * sep * grad_integral


@dataclass(frozen=True)
class SublevelEnsemble:
    """Populations over the (F, M_F) ground sublevels."""

    levels: tuple[tuple[float, float], ...]
    populations: tuple[float, ...]

    def __post_init__(self):
        if len(self.levels) != len(self.populations):
            raise ValueError("levels and populations must match")
        if any(p < 0 for p in self.populations):
            raise ValueError("populations must be non-negative")
        if abs(sum(self.populations) - 1.0) > 1e-9:
            raise ValueError("populations must sum to 1")

    @classmethod
    def uniform(cls, species: Species | None = None) -> "SublevelEnsemble":
        species = species or lithium7()
        levels = tuple(species.sublevels)
        n = len(levels)
        return cls(levels, tuple(1.0 / n for _ in levels))

    @property
    def m_values(self) -> np.ndarray:
        return np.array([m for _, m in self.levels])


def sublevel_visibility(phi, ensemble: SublevelEnsemble | None = None):
    """Visibility fraction sum_i pop_i cos(M_i phi) of the dephased sublevel
    ensemble.

    For the default uniform eight-level manifold this is
    (2 + 4 cos phi + 2 cos 2 phi) / 8 = cos phi (1 + cos phi) / 2; negative
    values mean a contrast-reversed fringe.
    """
    ensemble = ensemble or SublevelEnsemble.uniform()
    phi = np.asarray(phi, dtype=float)
    m = ensemble.m_values
    pops = np.asarray(ensemble.populations)
    out = np.cos(np.multiply.outer(phi, m)) @ pops
    return float(out) if out.ndim == 0 else out


def averaged_visibility(
    phi_m,
    dist: VelocityDistribution,
    mode: str = "closed",
    ensemble: SublevelEnsemble | None = None,
):
    """Sublevel visibility averaged over the velocity distribution, with
    phi_m the splay at the mean velocity.

    ``mode="closed"`` applies the Gaussian-phase result: every cos(k phi_m)
    is damped by exp(-k^2 beta^2 / 4) with beta = 2 phi_m alpha/u (valid for
    alpha << u).  ``mode="brute"`` averages sublevel_visibility at
    phi_m (u/v)^2 over the quadrature nodes and has no such restriction.
    """
    ensemble = ensemble or SublevelEnsemble.uniform()
    phi_m = np.asarray(phi_m, dtype=float)
    if mode == "closed":
        if dist.relative_spread > CLOSED_FORM_SPREAD_BOUND:
            warnings.warn(
                f"alpha/u = {dist.relative_spread:.3f} exceeds the closed-form "
                f"validity bound {CLOSED_FORM_SPREAD_BOUND}; prefer mode='brute'",
                ApproximationWarning,
                stacklevel=2,
            )
        beta = 2.0 * phi_m * dist.relative_spread
        m = ensemble.m_values
        pops = np.asarray(ensemble.populations)
        damp = np.exp(-np.multiply.outer(beta**2 / 4.0, m**2))
        out = (np.cos(np.multiply.outer(phi_m, m)) * damp) @ pops
        return float(out) if out.ndim == 0 else out
    if mode == "brute":
        v_nodes, weights = dist.nodes()
        scaled = np.multiply.outer(phi_m, (dist.u / v_nodes) ** 2)
        vals = sublevel_visibility(scaled, ensemble)
        out = np.asarray(vals) @ weights
        return float(out) if out.ndim == 0 else out
    raise ValueError(f"unknown mode {mode!r}")


def revival_curve(
    currents,
    k_phi: float,
    dist: VelocityDistribution,
    v0: float = 1.0,
    ensemble: SublevelEnsemble | None = None,
    mode: str = "closed",
) -> np.ndarray:
    """Visibility versus coil current with phase calibration
    phi_m = k_phi * I (the splay is linear in the dipole moment)."""
    currents = np.asarray(currents, dtype=float)
    return v0 * averaged_visibility(k_phi * currents, dist, mode=mode,
                                    ensemble=ensemble)


@dataclass(frozen=True)
class RevivalFit:
    """Velocity-spread extraction from a measured revival curve."""

    alpha_over_u: float
    alpha_over_u_sigma: float
    k_phi: float
    k_phi_sigma: float
    v0: float
    v0_sigma: float
    covariance: np.ndarray
    chi2_reduced: float


def extract_velocity_spread(
    currents,
    visibilities,
    sigma=None,
    u: float = 1060.0,
    quadrature_order: int = 16,
) -> RevivalFit:
    """Least-squares fit of |revival_curve| to measured (current, visibility)
    points, recovering (alpha/u, k_phi, V0).

    Requires at least 8 points spanning the first visibility zero; a sweep
    that never leaves the first lobe raises :class:`IllConditionedFitError`.
    """
    currents = np.asarray(currents, dtype=float)
    vis = np.asarray(visibilities, dtype=float)
    if currents.size < 8:
        raise ValueError("need at least 8 points")
    if currents.shape != vis.shape:
        raise ValueError("currents and visibilities must have matching shapes")
    vmax = float(np.max(vis))
    if float(np.min(vis)) > 0.5 * vmax:
        raise IllConditionedFitError(
            "sweep does not reach the first visibility zero; alpha/u and "
            "k_phi are degenerate on such data"
        )
    w = 1.0 / np.asarray(sigma, dtype=float) if sigma is not None else np.ones_like(vis)

    # First zero of cos(phi)(1 + cos(phi))/2 sits at phi = pi/2.
    order = np.argsort(currents)
    i_sorted, v_sorted = currents[order], vis[order]
    below = np.nonzero(v_sorted < 0.2 * vmax)[0]
    i_zero = i_sorted[below[0]] if below.size else i_sorted[-1] * 0.4
    k_init = (math.pi / 2.0) / max(abs(i_zero), 1e-12)

    def model(pars):
        v0, k_phi, au = pars
        dist = VelocityDistribution(u, au * u, quadrature_order)
        return v0 * np.abs(averaged_visibility(k_phi * currents, dist))

    p0 = [vmax, k_init, 0.1]
    res = least_squares(
        lambda q: (model(q) - vis) * w,
        p0,
        bounds=([0.0, 0.0, 0.0], [1.5, np.inf, 0.45]),
        x_scale="jac",
        max_nfev=4000,
        ftol=1e-12,
        xtol=1e-12,
        gtol=1e-12,
    )
    if res.status == 0:
        raise FitConvergenceError(
            f"revival fit exhausted its budget; last residual norm "
            f"{math.sqrt(2.0 * res.cost):.4g}"
        )
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    dof = max(currents.size - 3, 1)
    chi2 = 2.0 * res.cost
    if sigma is None:
        cov = cov * (chi2 / dof)
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return RevivalFit(
        alpha_over_u=float(res.x[2]),
        alpha_over_u_sigma=float(sig[2]),
        k_phi=float(res.x[1]),
        k_phi_sigma=float(sig[1]),
        v0=float(res.x[0]),
        v0_sigma=float(sig[0]),
        covariance=cov,
        chi2_reduced=chi2 / dof,
    )
