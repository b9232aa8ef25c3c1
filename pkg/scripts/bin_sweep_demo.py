"""ECE^1 of the frozen fragility pair for every bin count 10..30.

Prints one CSV row per bin count with both forecasters' ECE^1 and which one
it prefers, next to the (bin-free) ECCE-R of each.

    python scripts/bin_sweep_demo.py [--scheme equal_frequency]
"""
import argparse
import csv
import sys

from ecce_select.metrics import BinningSpec, Norm, Scheme, ece, metric_report
from ecce_select.synth import FRAGILITY_CASE


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scheme", default=FRAGILITY_CASE.scheme.value, choices=[s.value for s in Scheme])
    ap.add_argument("--lo", type=int, default=10)
    ap.add_argument("--hi", type=int, default=30)
    args = ap.parse_args()

    A, B = FRAGILITY_CASE.sets()
    r_a, r_b = metric_report(A, []).ecce_r, metric_report(B, []).ecce_r
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["num_bins", "ece1_a", "ece1_b", "ece1_prefers", "ecce_r_a", "ecce_r_b", "ecce_r_prefers"])
    for k in range(args.lo, args.hi + 1):
        spec = BinningSpec(Scheme(args.scheme), k)
        ea, eb = ece(A, spec, Norm.L1), ece(B, spec, Norm.L1)
        w.writerow([k, f"{ea:.5f}", f"{eb:.5f}", "a" if ea < eb else "b",
                    f"{r_a:.5f}", f"{r_b:.5f}", "a" if r_a < r_b else "b"])


if __name__ == "__main__":
    main()
