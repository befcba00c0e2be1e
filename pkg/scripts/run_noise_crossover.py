#!/usr/bin/env python3
"""Noise crossover experiment: optimize each mixer noiselessly on one N=5
instance, replay the angles on the density-matrix backend across a
depolarizing-strength grid, and report the smallest eta at which the
full-space mixer matches or beats every constrained mixer (per depth and
metric).  Sampled metrics use 8192 shots by default.

Runs in roughly half an hour on one core at the default settings.
"""
import argparse
import sys

from ternary_qaoa.cli import main as cli_main


def run():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="noise_sweep.csv")
    ap.add_argument("--master-seed", type=int, default=1234)
    ap.add_argument("--depths", default="1,3")
    ap.add_argument("--eta", default="0,0.002,0.005,0.01")
    ap.add_argument("--shots", type=int, default=8192)
    ap.add_argument("--reoptimize", action="store_true",
                    help="re-polish angles on the noisy backend (25p evals)")
    args = ap.parse_args()

    argv = ["noise-sweep", "--out", args.out,
            "--master-seed", str(args.master_seed), "--depths", args.depths,
            "--eta", args.eta, "--shots", str(args.shots)]
    if args.reoptimize:
        argv.append("--reoptimize")
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(run())
