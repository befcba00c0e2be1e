#!/usr/bin/env python3
"""Feasible-superposition quality under depolarizing noise: prepare the
budget-constrained initial state for N assets, apply per-gate noise at each
eta on the grid, and record exact and sampled feasible probability.  At
eta=0 the state is exactly feasible; at eta=1 it decays to the uniform
mixture, whose feasible mass is C(2N, N+B) / 2^(2N).
"""
import argparse
import sys

from ternary_qaoa.cli import main as cli_main


def run():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="dicke_noise.csv")
    ap.add_argument("--n-assets", type=int, default=5)
    ap.add_argument("--eta", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    ap.add_argument("--shots", type=int, default=20000)
    ap.add_argument("--master-seed", type=int, default=1234)
    args = ap.parse_args()

    return cli_main(["dicke-noise", "--out", args.out,
                     "--n-assets", str(args.n_assets), "--eta", args.eta,
                     "--shots", str(args.shots),
                     "--master-seed", str(args.master_seed)])


if __name__ == "__main__":
    sys.exit(run())
