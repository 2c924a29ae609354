#!/usr/bin/env python3
"""Run the bundled WSCC 9-bus load-shed scenario end to end.

Simulates the 20 s trajectory (load at bus 6 halved at t = 2 s), writes the
trajectory/generator CSVs and manifest, then produces the synchronization
report and the per-figure CSVs. Everything lands in --outdir.
"""
import argparse
import sys

from cfsync import bundled_case_path
from cfsync.cli import main as cli


def run() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="out_load_shed")
    ap.add_argument("--t-end", type=float, default=20.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    args = ap.parse_args()

    case = str(bundled_case_path("wscc9_loadshed"))
    out = args.outdir
    rc = cli(["simulate", "--case", case, "--t-end", str(args.t_end),
              "--dt", str(args.dt), "--outdir", out])
    if rc:
        return rc
    traj = f"{out}/trajectory.csv"
    rc = cli(["analyze", "--traj", traj, "--case", case, "--outdir", out])
    if rc:
        return rc
    report = f"{out}/report.json"
    for kind in ("eps", "omega", "subnet_spread", "damping"):
        rc = cli(["plotdata", "--report", report, "--traj", traj,
                  "--kind", kind, "--outdir", out])
        if rc:
            return rc
    rc = cli(["inertia", "--case", case, "--traj", traj,
              "--window", "2.005", "2.3", "--outdir", out])
    return rc


if __name__ == "__main__":
    sys.exit(run())
