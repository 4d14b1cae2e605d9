#!/usr/bin/env python3
"""Run every shipped scenario through the CLI and collect the artifacts.

Produces one directory per experiment under ``out/`` (override with the first
command-line argument), then fits the strongest fringe recording as a sanity
check.  Usage, from the repository root:

    python scripts/run_paper_figures.py [out_dir]
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from mzlab.cli import main as mzlab_main  # noqa: E402

RUNS = [
    ("diffract-scan", "diffract_scan.json"),
    ("fringes", "fringes_table1_p1_march2004.json"),
    ("fringes", "fringes_table1_p1_july2004.json"),
    ("fringes", "fringes_table1_p2_april2004.json"),
    ("fringes", "fringes_table1_p2_sept2004.json"),
    ("fringes", "fringes_table1_p2_sept2004_grad_cancelled.json"),
    ("fringes", "fringes_table1_p3_april2004.json"),
    ("tilt-scan", "tilt_scan.json"),
    ("mismatch-scan", "mismatch_scan.json"),
    ("slit-scan", "slit_scan_detector.json"),
    ("slit-scan", "slit_scan_collimation.json"),
    ("magnetic-scan", "magnetic_scan.json"),
    ("magnetic-scan", "magnetic_scan_coil.json"),
]


def run(out_root: Path) -> int:
    for subcommand, scenario in RUNS:
        out = out_root / scenario.removesuffix(".json")
        code = mzlab_main([
            subcommand,
            "--scenario", str(ROOT / "scenarios" / scenario),
            "--out", str(out),
        ])
        print(f"{subcommand:<14} {scenario:<45} -> {out} (exit {code})")
        if code != 0:
            return code

    fringe_dir = out_root / "fringes_table1_p1_july2004"
    code = mzlab_main([
        "fit", "--law", "fringes",
        "--input", str(fringe_dir / "fringes_trace.csv"),
        "--background", "2000.0", "--degree", "1",
        "--out", str(fringe_dir),
    ])
    print(f"fit fringes on july 2004 trace (exit {code})")
    return code


if __name__ == "__main__":
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "out"
    sys.exit(run(out_root))
