#!/usr/bin/env python3
"""Mixer-by-depth sweep on the desk-scale default batch (five N=5 and three
N=8 instances): optimizes every mixer at p = 1, 3, 5 on the statevector
backend and writes one CSV row per (instance, mixer, depth).

Full batch takes tens of minutes on one core; --quick runs a single N=2
instance at p=1 in a few seconds to check the plumbing.
"""
import argparse
import sys

from ternary_qaoa.cli import main as cli_main


def run():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="sweep.csv")
    ap.add_argument("--master-seed", type=int, default=1234)
    ap.add_argument("--depths", default="1,3,5")
    ap.add_argument("--mixers", default="standard,xy-ring,xy-parity-ring,xy-full,qampa")
    ap.add_argument("--quick", action="store_true",
                    help="single tiny instance, depth 1, coarse grid")
    args = ap.parse_args()

    argv = ["sweep", "--out", args.out, "--master-seed", str(args.master_seed),
            "--mixers", args.mixers]
    if args.quick:
        argv += ["--seed", "0", "--n-assets", "2", "--depths", "1",
                 "--grid-resolution", "10"]
    else:
        argv += ["--depths", args.depths]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(run())
