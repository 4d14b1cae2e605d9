"""Detector count traces: synthesis with Poisson statistics and parameter
recovery by damped, Poisson-weighted nonlinear least squares.

The fringe fit models the counts per bin as

    T_c * ( I_B + I0 [1 + V cos(poly(drive))] )

with a polynomial phase (default quadratic) absorbing drive nonlinearity.
Weights are 1/max(counts, 1), appropriate for counting statistics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .interferometer import FringeModel, InterferometerGeometry


class FitConvergenceError(RuntimeError):
    """The optimizer exhausted its iteration budget."""


class IllConditionedFitError(ValueError):
    """The data cannot constrain the requested parameters."""


@dataclass(frozen=True)
class CountTrace:
    """Time-ordered detector counts versus a drive value."""

    drive: np.ndarray
    counts: np.ndarray
    t_c: float = 0.1
    seed: int | None = None
    provenance: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "drive", np.asarray(self.drive, dtype=float))
        object.__setattr__(self, "counts", np.asarray(self.counts))
        if self.t_c <= 0:
            raise ValueError("counting time must be positive")
        if self.drive.shape != self.counts.shape:
            raise ValueError("drive and counts must have matching shapes")
        if np.any(self.counts < 0) or not np.issubdtype(self.counts.dtype, np.integer):
            raise ValueError("counts must be non-negative integers")

    @property
    def rates(self) -> np.ndarray:
        return self.counts / self.t_c

    def to_csv(self, path: str | Path) -> None:
        """Write (drive_value, counts) rows plus a JSON sidecar with the
        counting-time and provenance metadata."""
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("drive_value,counts\n")
            for d, c in zip(self.drive, self.counts):
                fh.write(f"{float(d)!r},{int(c)}\n")
        meta = {"t_c_s": self.t_c, "seed": self.seed, "provenance": self.provenance}
        with open(path.with_suffix(path.suffix + ".meta.json"), "w",
                  encoding="utf-8", newline="\n") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "CountTrace":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        meta_path = path.with_suffix(path.suffix + ".meta.json")
        meta = {}
        if meta_path.exists():
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        return cls(
            drive=data[:, 0],
            counts=data[:, 1].astype(np.int64),
            t_c=float(meta.get("t_c_s", 0.1)),
            seed=meta.get("seed"),
            provenance=meta.get("provenance", "external"),
        )


def synthesize_counts(
    model: FringeModel,
    sweep,
    t_c: float = 0.1,
    seed: int = 0,
    burst_rate: float = 0.0,
    burst_alpha: float = 1.5,
    burst_scale: float = 50.0,
) -> CountTrace:
    """Draw Poisson counts with mean rate(x) * t_c at each sweep value.

    Deterministic for a fixed seed.  ``burst_rate`` (events/s) adds rare
    Pareto-distributed count bursts on top of the Poisson background, off by
    default.
    """
    sweep = np.asarray(sweep, dtype=float)
    if sweep.size < 2:
        raise ValueError("sweep needs at least two points")
    if t_c <= 0:
        raise ValueError("counting time must be positive")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(model.rate(sweep) * t_c).astype(np.int64)
    if burst_rate > 0.0:
        n_burst = rng.poisson(burst_rate * t_c, size=sweep.shape)
        extra = np.zeros_like(counts)
        hot = n_burst > 0
        if np.any(hot):
            for i in np.nonzero(hot)[0]:
                extra[i] = int(np.sum(burst_scale * (1.0 + rng.pareto(burst_alpha,
                                                                      n_burst[i]))))
        counts = counts + extra
    return CountTrace(sweep, counts, t_c=t_c, seed=seed, provenance="synthetic")


@dataclass(frozen=True)
class FitResult:
    """Recovered fringe parameters with covariance over the fitted vector."""

    i_b: float
    i0: float
    visibility: float
    phase_coeffs: tuple[float, ...]
    covariance: np.ndarray
    param_names: tuple[str, ...]
    chi2_reduced: float
    dof: int
    boundary_flag: bool = False

    def sigma(self, name: str) -> float:
        i = self.param_names.index(name)
        return float(math.sqrt(max(self.covariance[i, i], 0.0)))

    def to_json(self) -> str:
        payload = {
            "i_b_counts_per_s": self.i_b,
            "i0_counts_per_s": self.i0,
            "visibility": self.visibility,
            "phase_coeffs_rad": list(self.phase_coeffs),
            "param_names": list(self.param_names),
            "covariance": self.covariance.tolist(),
            "chi2_reduced": self.chi2_reduced,
            "dof": self.dof,
            "boundary_flag": self.boundary_flag,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _fft_phase_guess(drive: np.ndarray, rates: np.ndarray) -> tuple[float, float]:
    """Initial linear phase (offset, slope) from the dominant FFT bin;
    assumes a roughly uniform drive grid."""
    y = rates - np.mean(rates)
    spec = np.fft.rfft(y)
    k = int(np.argmax(np.abs(spec[1:]))) + 1
    span = drive[-1] - drive[0]
    slope = 2.0 * math.pi * k / span if span != 0 else 1.0
    offset = float(np.angle(spec[k])) - slope * drive[0]
    return offset, slope


def fit_fringes(
    trace: CountTrace,
    degree: int = 2,
    i_b: float | None = None,
    max_nfev: int = 4000,
) -> FitResult:
    """Poisson-weighted nonlinear least-squares fit of a fringe trace.

    ``i_b`` fixes the background rate (counts/s) when it was measured
    separately; ``i_b=None`` co-fits it.  Note that a fringe alone only
    constrains the combinations I_B + I0 and I0 V, so a co-fitted background
    rides a flat ridge against (I0, V); fixing a separately measured I_B is
    what makes the individual parameters meaningful.  The phase is a
    degree-``degree`` polynomial in the drive value.  Raises
    :class:`FitConvergenceError` when the bounded iteration budget runs out.
    """
    if degree < 1:
        raise ValueError("phase polynomial degree must be >= 1")
    x = trace.drive
    counts = trace.counts.astype(float)
    t_c = trace.t_c
    w = 1.0 / np.sqrt(np.maximum(counts, 1.0))
    co_fit_bg = i_b is None
    bg = 0.0 if co_fit_bg else float(i_b)

    rates = counts / t_c
    c0, c1 = _fft_phase_guess(x, rates)
    i0_init = max(float(np.mean(rates)) - bg, 1.0)
    amp = 0.5 * (np.percentile(rates, 98) - np.percentile(rates, 2))
    v_init = min(max(amp / i0_init, 0.05), 0.95)

    # the mean rate can never exceed the peak rate, so a generous cap on I0
    # removes the degenerate ridge (phase slope -> 0, I0 -> infinity) that
    # otherwise traps near-zero-visibility traces
    rate_cap = 4.0 * float(np.max(rates)) + 10.0
    names = ["i0", "visibility"] + [f"c{k}" for k in range(degree + 1)]
    p0 = [i0_init, v_init, c0, c1] + [0.0] * (degree - 1)
    lo = [0.0, 0.0, -2.0 * math.pi] + [-np.inf] * degree
    hi = [rate_cap, 1.0, 2.0 * math.pi] + [np.inf] * degree
    if co_fit_bg:
        names.append("i_b")
        p0.append(max(float(np.min(rates)), 1.0))
        lo.append(0.0)
        hi.append(rate_cap)

    def residuals(pars):
        i0, v = pars[0], pars[1]
        coeffs = pars[2:2 + degree + 1]
        background = pars[-1] if co_fit_bg else bg
        phase = np.polynomial.polynomial.polyval(x, coeffs)
        model = (background + i0 * (1.0 + v * np.cos(phase))) * t_c
        return (model - counts) * w

    powers = np.vander(x, degree + 1, increasing=True)

    def jacobian(pars):
        i0, v = pars[0], pars[1]
        coeffs = pars[2:2 + degree + 1]
        phase = np.polynomial.polynomial.polyval(x, coeffs)
        cosp, sinp = np.cos(phase), np.sin(phase)
        cols = [(1.0 + v * cosp), i0 * cosp]
        cols.extend(-i0 * v * sinp * powers[:, k] for k in range(degree + 1))
        if co_fit_bg:
            cols.append(np.ones_like(x))
        return (np.column_stack(cols).T * (t_c * w)).T

    def solve(start):
        # 1e-10 keeps sub-ppb parameter resolution while still terminating on
        # the flat likelihood valleys of near-zero-visibility traces
        return least_squares(residuals, start, jac=jacobian, bounds=(lo, hi),
                             x_scale="jac", max_nfev=max_nfev,
                             ftol=1e-10, xtol=1e-10, gtol=1e-10)

    res = solve(p0)
    # A pi-flipped phase guess is the common local minimum; retry once if the
    # first branch converged poorly.
    if 2.0 * res.cost / max(x.size, 1) > 3.0:
        start = list(p0)
        start[2] = ((p0[2] + 2.0 * math.pi) % (2.0 * math.pi)) - math.pi
        alt = solve(start)
        if alt.cost < res.cost:
            res = alt
    if res.status == 0:
        raise FitConvergenceError(
            f"no convergence within {max_nfev} evaluations; "
            f"last residual norm {math.sqrt(2.0 * res.cost):.4g}"
        )

    n_par = len(p0)
    dof = max(x.size - n_par, 1)
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    chi2 = 2.0 * res.cost
    v_hat = float(res.x[1])
    return FitResult(
        i_b=float(res.x[-1]) if co_fit_bg else bg,
        i0=float(res.x[0]),
        visibility=v_hat,
        phase_coeffs=tuple(float(c) for c in res.x[2:2 + degree + 1]),
        covariance=cov,
        param_names=tuple(names),
        chi2_reduced=chi2 / dof,
        dof=dof,
        boundary_flag=bool(v_hat < 1e-9 or v_hat > 1.0 - 1e-9),
    )


@dataclass(frozen=True)
class SincFit:
    """Result of fitting a sinc-envelope visibility law."""

    law: str
    v0: float
    v0_sigma: float
    parameter: float
    parameter_sigma: float
    covariance: np.ndarray

    @property
    def z_c(self) -> float:
        if self.law != "mismatch":
            raise AttributeError("z_c is defined for the mismatch law only")
        return self.parameter

    @property
    def scale(self) -> float:
        if self.law != "tilt":
            raise AttributeError("scale is defined for the tilt law only")
        return self.parameter


def fit_sinc(
    x,
    v,
    law: str = "tilt",
    p: int = 1,
    geom: InterferometerGeometry | None = None,
    sigma=None,
) -> SincFit:
    """Least-squares fit of measured visibilities against a sinc law.

    ``law="tilt"`` fits V0 |sinc(c x)| with free rate parameter c;
    ``law="mismatch"`` fits V0 |sinc(k0 (x - z_c)) sinc(kD (x - z_c))| with
    the aperture constants fixed by the geometry and free zero position z_c.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.size < 6:
        raise ValueError("need at least 6 points")
    if x.shape != v.shape:
        raise ValueError("x and v must have matching shapes")
    if np.min(v) > 0.5 * np.max(v):
        raise IllConditionedFitError(
            "visibility never drops below half its maximum; the envelope "
            "parameters are unconstrained"
        )
    w = 1.0 / np.asarray(sigma, dtype=float) if sigma is not None else np.ones_like(v)

    if law == "tilt":
        below = x[np.abs(v) < 0.2 * np.max(v)]
        c_init = math.pi / np.min(np.abs(below[below != 0])) if below.size else \
            math.pi / (0.5 * np.max(np.abs(x)) + 1e-30)

        def model(pars):
            v0, c = pars
            return v0 * np.abs(np.sinc(c * x / math.pi))

        p0 = [float(np.max(v)), c_init]
    elif law == "mismatch":
        geom = geom or InterferometerGeometry()
        k0 = p * geom.k_g * geom.e_0 / (2.0 * geom.l04)
        kd = p * geom.k_g * geom.e_d / (2.0 * geom.l04)

        def model(pars):
            v0, zc = pars
            dl = x - zc
            return v0 * np.abs(np.sinc(k0 * dl / math.pi) * np.sinc(kd * dl / math.pi))

        p0 = [float(np.max(v)), float(x[np.argmax(v)])]
    else:
        raise ValueError(f"unknown law {law!r}")

    res = least_squares(lambda q: (model(q) - v) * w, p0, x_scale="jac",
                        max_nfev=2000, ftol=1e-12, xtol=1e-12, gtol=1e-12)
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    if sigma is None:
        dof = max(x.size - 2, 1)
        cov = cov * (2.0 * res.cost / dof)
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return SincFit(
        law=law,
        v0=float(res.x[0]),
        v0_sigma=float(sig[0]),
        parameter=float(res.x[1]),
        parameter_sigma=float(sig[1]),
        covariance=cov,
    )


def figure_of_merit(i0: float, visibility: float) -> float:
    """I0 V^2, inversely proportional to the shot-noise phase variance."""
    return i0 * visibility * visibility


def phase_sensitivity(i0: float, visibility: float, i_b: float = 0.0,
                      t: float = 1.0) -> float:
    """Shot-noise-limited mid-fringe phase noise.

    Convention: sigma_phi = sqrt((I0 + I_B) / t) / (I0 V), the rms phase
    uncertainty after integrating for t seconds; at t = 1 s the value reads
    as rad/sqrt(Hz).  Monotone decreasing in both I0 and V.
    """
    if i0 <= 0:
        raise ValueError("mean intensity must be positive")
    if visibility <= 0:
        raise ValueError("visibility must be positive for a finite estimate")
    if t <= 0:
        raise ValueError("integration time must be positive")
    return math.sqrt((i0 + i_b) / t) / (i0 * visibility)
