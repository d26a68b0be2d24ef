#!/usr/bin/env python3
"""Refinement study against the closed-form constant-data solution.

Writes study.csv into the output directory and prints the error table with
the fitted rates.
"""

import argparse
from pathlib import Path

import gradcon as gc
from gradcon.cli import export_study_csv

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--scenario", default="ex1_f1_a1",
                    help="constant-data scenario (default ex1_f1_a1)")
parser.add_argument("--meshes", type=int, nargs="+", default=[8, 16, 32, 64])
parser.add_argument("--out", default="out")
args = parser.parse_args()

study = gc.convergence_study(args.scenario, args.meshes)
print(f"{'n':>5} {'h':>10} {'err_u':>12} {'err_p':>12}")
for n, h, eu, ep in zip(study.mesh_sizes, study.h, study.err_u, study.err_p):
    print(f"{n:5d} {h:10.5f} {eu:12.5e} {ep:12.5e}")
print(f"fitted rates: u {study.rate_u:.3f}, p {study.rate_p:.3f}")

out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
export_study_csv(study, out / "study.csv")
print(f"wrote {out / 'study.csv'}")
