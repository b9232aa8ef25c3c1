"""Run the guarded selector on synthetic data under several distortions.

    python scripts/selection_demo.py --n 20000 --seed 11 --jobs 4
"""
import argparse

from ecce_select.metrics import BinningSpec, Scheme
from ecce_select.selection import run_selection
from ecce_select.synth import SynthSpec, UniformP, generate, parse_distortion

DEFAULT_DISTORTIONS = ["none", "overconfident:2", "overconfident:0.6", "temp:1.5", "shift:0.5"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("distortions", nargs="*", default=DEFAULT_DISTORTIONS)
    args = ap.parse_args()

    binnings = [BinningSpec(Scheme.EQUAL_WIDTH, 15)]
    print(f"{'distortion':<20}{'candidate':<14}{'ECCE-R':>10}{'log-loss':>10}  decision")
    for text in args.distortions:
        ps, _ = generate(SynthSpec(args.n, UniformP(), parse_distortion(text), args.seed))
        out = run_selection(ps, seed=args.seed, binnings=binnings, workers=args.jobs)
        for c in out.candidates:
            r = "-" if c.mean_ecce_r is None else f"{c.mean_ecce_r:.4f}"
            ll = "-" if c.mean_log_loss is None else f"{c.mean_log_loss:.4f}"
            mark = " <- selected" if c.candidate_id == out.selected else ""
            print(f"{text:<20}{c.candidate_id:<14}{r:>10}{ll:>10}  {out.rationale[c.candidate_id]}{mark}")
        print()


if __name__ == "__main__":
    main()
