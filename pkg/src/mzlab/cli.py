"""Scenario-driven command line front end.

One subcommand per standard experiment; every run emits deterministic CSV
artifacts plus a manifest JSON recording the inputs hash, seed and library
versions.  Exit codes: 0 ok, 1 validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__, constants
from .bragg import design_pulse, diffraction_scan
from .interferometer import (
    FringeModel,
    fringe_signal,
    mismatch_visibility,
    slit_scan,
    tilt_visibility,
)
from .magnetic import (
    MagneticScenario,
    extract_velocity_spread,
    gradient_phase,
    revival_curve,
)
from .physics import collimation_angular_nodes
from .scenario import (
    BASE_SCHEMA,
    ScenarioError,
    distribution_from,
    geometry_from,
    gratings_from,
    load_scenario,
    species_from,
)
from .signals import CountTrace, fit_fringes, fit_sinc, synthesize_counts


class _ValidationFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ValidationFailure(f"{self.prog}: {message}")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: Path, header: list[str], columns) -> None:
    columns = [np.atleast_1d(c) for c in columns]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_manifest(out: Path, name: str, seed, scenario_path, outputs,
                    overrides) -> Path:
    payload = {
        "subcommand": name,
        "seed": seed,
        "scenario_path": str(scenario_path) if scenario_path else None,
        "scenario_sha256": (
            _sha256_bytes(Path(scenario_path).read_bytes())
            if scenario_path else None
        ),
        "overrides": list(overrides or []),
        "constants_sha256": _sha256_bytes(constants.table_json().encode()),
        "outputs": [p.name for p in outputs],
        "versions": {
            "mzlab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    path = out / f"{name.replace('-', '_')}_manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load(args, kind: str):
    cfg = load_scenario(args.scenario, args.set or [])
    if cfg["experiment"]["kind"] != kind:
        raise ScenarioError(
            f"scenario declares experiment kind {cfg['experiment']['kind']!r}; "
            f"this subcommand runs {kind!r}"
        )
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    return cfg, seed


def _context(cfg):
    species = species_from(cfg)
    dist = distribution_from(cfg)
    geom = geometry_from(cfg)
    gratings = gratings_from(cfg, species, geom, dist)
    return species, dist, geom, gratings


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_diffract_scan(args):
    cfg, seed = _load(args, "diffract-scan")
    species, dist, geom, gratings = _context(cfg)
    exp = cfg["experiment"]
    thetas = np.linspace(exp["theta_start_rad"], exp["theta_stop_rad"],
                         exp["points"])
    collim = None
    if exp.get("collimation", True):
        collim = collimation_angular_nodes(geom.e_0, geom.e_1, geom.l01,
                                           exp.get("angle_nodes", 9))
    transmitted = diffraction_scan(
        thetas, gratings[1], species, dist,
        collimation=collim, method=exp.get("method", "bloch"),
    )
    out = _out_dir(args)
    csv = out / "diffract_scan.csv"
    _write_csv(csv, ["theta_y_rad", "transmitted_fraction"],
               [thetas, transmitted])
    _write_manifest(out, "diffract-scan", seed, args.scenario, [csv], args.set)
    return [csv]


def _cmd_fringes(args):
    cfg, seed = _load(args, "fringes")
    species, dist, geom, gratings = _context(cfg)
    exp = cfg["experiment"]
    p = gratings[0].order
    xs = [g.x_position for g in gratings]
    drive = np.linspace(0.0, exp["x3_span_m"], exp["points"])

    model = fringe_signal(
        xs[0], xs[1], xs[2],
        a_u=abs(math.sin(gratings[0].pulse_area) * math.sin(gratings[1].pulse_area)
                * math.cos(gratings[2].pulse_area)),
        a_l=abs(math.cos(gratings[0].pulse_area) * math.sin(gratings[1].pulse_area)
                * math.sin(gratings[2].pulse_area)),
        p=p, geom=geom,
        flux_rate=cfg["beam"].get("flux_counts_per_s", 1.0),
        background=exp.get("background_counts_per_s", 0.0),
    )
    if "i0_counts_per_s" in exp or "visibility" in exp:
        model = FringeModel(
            i0=exp.get("i0_counts_per_s", model.i0),
            visibility=exp.get("visibility", model.visibility),
            i_b=model.i_b,
            phase_coeffs=model.phase_coeffs,
        )
    trace = synthesize_counts(model, drive, t_c=exp.get("t_c_s", 0.1), seed=seed)
    out = _out_dir(args)
    trace_csv = out / "fringes_trace.csv"
    trace.to_csv(trace_csv)
    model_csv = out / "fringes_model.csv"
    _write_csv(model_csv, ["x3_m", "i1_counts_per_s"],
               [drive, model.rate(drive)])
    outputs = [trace_csv, model_csv]
    _write_manifest(out, "fringes", seed, args.scenario, outputs, args.set)
    return outputs


def _cmd_tilt_scan(args):
    cfg, seed = _load(args, "tilt-scan")
    species, dist, geom, gratings = _context(cfg)
    exp = cfg["experiment"]
    thetas = np.linspace(exp["theta_z_start_rad"], exp["theta_z_stop_rad"],
                         exp["points"])
    vis = exp.get("v0_fraction", 1.0) * tilt_visibility(
        0.0, thetas, 0.0, gratings[0].order, geom,
        apodization_sigma=exp.get("apodization_sigma_m"),
    )
    out = _out_dir(args)
    csv = out / "tilt_scan.csv"
    _write_csv(csv, ["theta_z_rad", "visibility"], [thetas, vis])
    _write_manifest(out, "tilt-scan", seed, args.scenario, [csv], args.set)
    return [csv]


def _cmd_mismatch_scan(args):
    cfg, seed = _load(args, "mismatch-scan")
    species, dist, geom, gratings = _context(cfg)
    exp = cfg["experiment"]
    dls = np.linspace(exp["delta_l_start_m"], exp["delta_l_stop_m"],
                      exp["points"])
    vis = exp.get("v0_fraction", 1.0) * mismatch_visibility(
        dls, gratings[0].order, geom)
    out = _out_dir(args)
    csv = out / "mismatch_scan.csv"
    _write_csv(csv, ["delta_L_m", "visibility"], [dls, vis])
    _write_manifest(out, "mismatch-scan", seed, args.scenario, [csv], args.set)
    return [csv]


def _cmd_slit_scan(args):
    cfg, seed = _load(args, "slit-scan")
    species, dist, geom, gratings = _context(cfg)
    exp = cfg["experiment"]
    widths = np.linspace(exp["width_start_m"], exp["width_stop_m"],
                         exp["points"])
    result = slit_scan(
        widths, geom, species, dist, gratings,
        vary=exp["vary"],
        n_rays=exp.get("n_rays", 81),
        mode=exp.get("mode", "deterministic"),
        n_samples=exp.get("n_samples", 40000),
        seed=seed,
    )
    flux = cfg["beam"].get("flux_counts_per_s", 1.0)
    out = _out_dir(args)
    csv = out / "slit_scan.csv"
    _write_csv(csv, ["slit_width_m", "i0_counts_per_s", "visibility"],
               [result.widths, flux * result.i0, result.visibility])
    _write_manifest(out, "slit-scan", seed, args.scenario, [csv], args.set)
    return [csv]


def _cmd_magnetic_scan(args):
    cfg, seed = _load(args, "magnetic-scan")
    dist = distribution_from(cfg)
    exp = cfg["experiment"]
    currents = np.linspace(exp["current_start_A"], exp["current_stop_A"],
                           exp["points"])
    if "coil" in exp:
        # physical coil: phase splay per ampere from the dipole gradient
        coil = exp["coil"]
        scenario = MagneticScenario(
            species=species_from(cfg),
            field_modulus=coil.get("background_field_T", 4e-5),
            dipole_moment=coil["moment_per_ampere_A_m2"],
            dipole_distance=coil["distance_m"],
            path_separation=coil.get("path_separation_m", 9.675e-5),
            reference_velocity=dist.u,
        )
        k_phi = gradient_phase(scenario, dist.u)
    elif "k_phi_rad_per_A" in exp:
        k_phi = exp["k_phi_rad_per_A"]
    else:
        raise ScenarioError(
            "magnetic-scan needs either 'k_phi_rad_per_A' or a 'coil' block"
        )
    # a fringe fit reports |V|; contrast-reversed regions appear folded up
    vis = np.abs(revival_curve(
        currents, k_phi, dist,
        v0=exp.get("v0_fraction", 1.0), mode=exp.get("mode", "closed"),
    ))
    out = _out_dir(args)
    csv = out / "magnetic_scan.csv"
    _write_csv(csv, ["current_A", "visibility", "visibility_sigma"],
               [currents, vis, np.zeros_like(vis)])
    _write_manifest(out, "magnetic-scan", seed, args.scenario, [csv], args.set)
    return [csv]


def _geometry_from_file(path):
    from .interferometer import InterferometerGeometry

    if path is None:
        return InterferometerGeometry()
    with open(path, "r", encoding="utf-8") as fh:
        block = json.load(fh)
    jsonschema.validate(block, BASE_SCHEMA["properties"]["geometry"])
    return geometry_from({"geometry": block})


def _cmd_fit(args):
    out = _out_dir(args)
    if args.law == "fringes":
        trace = CountTrace.from_csv(args.input)
        result = fit_fringes(trace, degree=args.degree, i_b=args.background)
        payload = result.to_json()
        path = out / "fit_fringes.json"
    elif args.law in ("tilt", "mismatch"):
        data = np.loadtxt(args.input, delimiter=",", skiprows=1)
        geom = _geometry_from_file(args.geometry)
        fit = fit_sinc(data[:, 0], data[:, 1], law=args.law,
                       p=args.order, geom=geom)
        name = "z_c_m" if args.law == "mismatch" else "scale_rad_inv"
        payload = json.dumps({
            "law": fit.law,
            "v0": fit.v0,
            "v0_sigma": fit.v0_sigma,
            name: fit.parameter,
            name + "_sigma": fit.parameter_sigma,
            "covariance": fit.covariance.tolist(),
        }, indent=2, sort_keys=True) + "\n"
        path = out / f"fit_{args.law}.json"
    else:  # revival
        data = np.loadtxt(args.input, delimiter=",", skiprows=1)
        sigma = data[:, 2] if data.shape[1] > 2 and np.all(data[:, 2] > 0) else None
        fit = extract_velocity_spread(data[:, 0], data[:, 1], sigma=sigma,
                                      u=args.mean_velocity)
        payload = json.dumps({
            "alpha_over_u": fit.alpha_over_u,
            "alpha_over_u_sigma": fit.alpha_over_u_sigma,
            "k_phi_rad_per_A": fit.k_phi,
            "k_phi_sigma": fit.k_phi_sigma,
            "v0": fit.v0,
            "v0_sigma": fit.v0_sigma,
            "chi2_reduced": fit.chi2_reduced,
            "covariance": fit.covariance.tolist(),
        }, indent=2, sort_keys=True) + "\n"
        path = out / "fit_revival.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(payload)
    sys.stdout.write(payload)
    _write_manifest(out, "fit", args.seed, None, [path], None)
    return [path]


def _cmd_design_pulse(args):
    q = design_pulse(args.order, args.tau, args.target)
    payload = json.dumps({
        "order_p": args.order,
        "duration_tau": args.tau,
        "target": args.target,
        "depth_q": q,
    }, indent=2, sort_keys=True) + "\n"
    out = _out_dir(args)
    path = out / "design_pulse.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(payload)
    sys.stdout.write(payload)
    _write_manifest(out, "design-pulse", args.seed, None, [path], None)
    return [path]


def _cmd_constants(args):
    payload = constants.table_json()
    out = _out_dir(args)
    path = out / "constants.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(payload)
    sys.stdout.write(payload)
    _write_manifest(out, "constants", args.seed, None, [path], None)
    return [path]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mzlab",
                     description="Mach-Zehnder atom interferometer laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        if scenario_required:
            p.add_argument("--scenario", required=True,
                           help="path to the scenario JSON file")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a scenario field (dotted path)")
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (overrides the scenario seed)")
        p.add_argument("--out", default=".", help="output directory")

    for name, handler in [
        ("diffract-scan", _cmd_diffract_scan),
        ("fringes", _cmd_fringes),
        ("tilt-scan", _cmd_tilt_scan),
        ("mismatch-scan", _cmd_mismatch_scan),
        ("slit-scan", _cmd_slit_scan),
        ("magnetic-scan", _cmd_magnetic_scan),
    ]:
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(handler=handler)

    p = sub.add_parser("fit", help="fit a CSV artifact")
    common(p, scenario_required=False)
    p.add_argument("--law", required=True,
                   choices=["fringes", "tilt", "mismatch", "revival"])
    p.add_argument("--input", required=True, help="input CSV path")
    p.add_argument("--degree", type=int, default=2,
                   help="phase polynomial degree (fringes law)")
    p.add_argument("--background", type=float, default=None,
                   help="fixed background rate; omitted = co-fit (fringes law)")
    p.add_argument("--order", type=int, default=1,
                   help="diffraction order (tilt/mismatch laws)")
    p.add_argument("--geometry", default=None,
                   help="JSON file with a geometry block (mismatch law)")
    p.add_argument("--mean-velocity", type=float, default=1060.0,
                   help="mean beam velocity (revival law)")
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("design-pulse", help="lattice depth for a mirror/splitter")
    common(p, scenario_required=False)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--target", required=True, choices=["mirror", "splitter"])
    p.set_defaults(handler=_cmd_design_pulse)

    p = sub.add_parser("constants", help="dump the shared constant table")
    common(p, scenario_required=False)
    p.set_defaults(handler=_cmd_constants)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _ValidationFailure as exc:
        print(str(exc), file=sys.stderr)
        return 1
    try:
        args.handler(args)
    except jsonschema.ValidationError as exc:
        print(f"scenario validation failed at {exc.json_path}: {exc.message}",
              file=sys.stderr)
        return 1
    except (ScenarioError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
