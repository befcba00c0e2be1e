#!/usr/bin/env python3
"""Gate and depth accounting across mixers and sizes: writes the raw table,
then summarizes the two headline numbers: how the constrained-start depth
scales with qubit count (linear fit + R^2) and the entangling-gate ratio of
the fused ansatz layer to the two-unitary layer it replaces at N=5.
"""
import argparse
import csv
import sys

import numpy as np

from ternary_qaoa.cli import main as cli_main


def load_rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def run():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="circuit_report.csv")
    ap.add_argument("--n-assets", default="2,3,4,5,6,7,8")
    ap.add_argument("--master-seed", type=int, default=1234)
    args = ap.parse_args()

    rc = cli_main(["circuit-report", "--out", args.out,
                   "--n-assets", args.n_assets,
                   "--master-seed", str(args.master_seed)])
    if rc != 0:
        return rc

    rows = load_rows(args.out)
    prep = [r for r in rows if r["p"] == "0"]
    dicke = [r for r in prep if r["mixer"] == "xy-full"]
    if len(dicke) >= 3:
        qubits = np.array([2 * int(r["n_assets"]) for r in dicke], float)
        depth = np.array([int(r["depth"]) for r in dicke], float)
        slope, intercept = np.polyfit(qubits, depth, 1)
        fit = slope * qubits + intercept
        ss_res = float(((depth - fit) ** 2).sum())
        ss_tot = float(((depth - depth.mean()) ** 2).sum())
        r2 = 1.0 - ss_res / ss_tot
        print(f"constrained-start depth ~ {slope:.3f} * qubits "
              f"{intercept:+.3f}  (R^2 = {r2:.4f})")

    by = {(r["mixer"], r["n_assets"], r["p"]): r for r in rows}
    want = [("qampa", "5", "1"), ("qampa", "5", "0"),
            ("xy-full", "5", "1"), ("xy-full", "5", "0")]
    if all(k in by for k in want):
        # per-layer entanglers: subtract the shared preparation circuit
        prep_cnots = {m: int(by[(m, "5", "0")]["cnot_count"])
                      for m in ("qampa", "xy-full")}
        qampa = int(by[("qampa", "5", "1")]["cnot_count"]) - prep_cnots["qampa"]
        xy = int(by[("xy-full", "5", "1")]["cnot_count"]) - prep_cnots["xy-full"]
        print(f"fused layer CNOTs {qampa} vs split layer {xy}: "
              f"ratio {qampa / xy:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
