"""Search for two forecasters whose ECE^1 ranking flips with the bin count.

Both forecasters score the same synthetic outcomes. A hit is a seed and a
pair of bin counts in 10..30 where ECE^1 prefers one forecaster at the lower
count and the other at the higher count, while ECCE-R (which has no bin
parameter) separates them by a clear margin. Print the strongest hit so it
can be frozen as ``synth.FRAGILITY_CASE``.

    python scripts/find_fragility_pair.py --n 2000 --seeds 200
"""
import argparse

import numpy as np

from ecce_select.metrics import BinningSpec, Norm, Scheme, ece, metric_report
from ecce_select.synth import LogitShift, TempScale, UniformP, generate_shared

PAIRS = {
    "temp0.85_vs_shift0.15": (TempScale(0.85), LogitShift(0.15)),
    "temp1.2_vs_shift-0.15": (TempScale(1.2), LogitShift(-0.15)),
    "temp0.9_vs_temp1.1": (TempScale(0.9), TempScale(1.1)),
}


def scan(n, seed, a, b, scheme, counts):
    sets, _ = generate_shared(n, {"a": a, "b": b}, UniformP(), seed)
    A, B = sets["a"], sets["b"]
    diff = np.array([ece(A, BinningSpec(scheme, k), Norm.L1) - ece(B, BinningSpec(scheme, k), Norm.L1)
                     for k in counts])
    ra, rb = metric_report(A, []).ecce_r, metric_report(B, []).ecce_r
    return diff, ra, rb


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--seeds", type=int, default=200)
    args = ap.parse_args()
    counts = list(range(10, 31))
    best = None
    for name, (a, b) in PAIRS.items():
        for scheme in Scheme:
            for seed in range(args.seeds):
                diff, ra, rb = scan(args.n, seed, a, b, scheme, counts)
                lo, hi = int(np.argmin(diff)), int(np.argmax(diff))
                if diff[lo] >= 0 or diff[hi] <= 0:
                    continue
                # margin of the weaker side of the flip, and of the ECCE-R gap
                flip = min(-diff[lo], diff[hi])
                ecce_gap = abs(ra - rb) / max(ra, rb)
                score = min(flip * 100, ecce_gap)
                if best is None or score > best[0]:
                    best = (score, name, scheme.value, seed, counts[lo], counts[hi], diff[lo], diff[hi], ra, rb)
    if best is None:
        print("no flip found")
        return
    score, name, scheme, seed, k_lo, k_hi, d_lo, d_hi, ra, rb = best
    print(f"pair={name} scheme={scheme} seed={seed}")
    print(f"  ECE1(A)-ECE1(B): {d_lo:+.5f} at B={k_lo}, {d_hi:+.5f} at B={k_hi}")
    print(f"  ECCE-R: A={ra:.5f} B={rb:.5f}")


if __name__ == "__main__":
    main()
