"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 no feasible selection.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .calibrators import Kind, fit
from .core import PredictionSet, canonical_sort, cumulative_curve, make_prediction_set
from .errors import CalibrationError, InputError, NoUncalibrated
from .metrics import (
    DEFAULT_BIN_COUNTS,
    DEFAULT_BINNINGS,
    BinningSpec,
    Scheme,
    Weighting,
    metric_report,
)
from .selection import jsonable, run_selection
from .synth import SynthSpec, generate, parse_distortion, parse_truth

EXIT_OK, EXIT_INPUT, EXIT_NO_SELECTION = 0, 2, 3


class CsvInput:
    """A validated ``score,label[,id]`` file."""

    def __init__(self, ps: PredictionSet, ids: list[str] | None):
        self.ps = ps
        self.ids = ids


def read_csv(path: str | Path) -> CsvInput:
    """Parse and validate an input file; errors name the 1-based data row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if header[:2] != ["score", "label"] or header[2:] not in ([], ["id"]):
            raise InputError(f"{path}: header must be 'score,label' or 'score,label,id', got {','.join(header)!r}")
        has_id = len(header) == 3
        scores, labels, ids = [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"row {row_no}: expected {len(header)} fields, got {len(row)}")
            try:
                s = float(row[0])
            except ValueError:
                raise InputError(f"row {row_no}: score {row[0]!r} is not a number") from None
            if not (0.0 <= s <= 1.0):
                raise InputError(f"row {row_no}: score {row[0]!r} is outside [0, 1]")
            if row[1].strip() not in ("0", "1"):
                raise InputError(f"row {row_no}: label {row[1]!r} is not 0 or 1")
            scores.append(s)
            labels.append(int(row[1]))
            if has_id:
                ids.append(row[2])
    if not scores:
        raise InputError(f"{path}: no data rows")
    return CsvInput(make_prediction_set(scores, labels), ids if has_id else None)


def _bin_counts(text: str) -> list[int]:
    """``10,15,20`` or ``10-30`` or a mix: ``1,10-12``."""
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition("-")
        out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    return out


def _binnings(args) -> list[BinningSpec]:
    if args.bins is None and args.schemes is None:
        return list(DEFAULT_BINNINGS)
    counts = _bin_counts(args.bins) if args.bins else list(DEFAULT_BIN_COUNTS)
    schemes = [Scheme(s) for s in args.schemes.split(",")] if args.schemes else list(Scheme)
    return [BinningSpec(s, b) for s in schemes for b in counts]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else ("" if v is None else v) for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(jsonable(obj), indent=2) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands -----------------------------------------------------------------

def cmd_metrics(args) -> int:
    data = read_csv(args.input)
    report = metric_report(data.ps, _binnings(args), Weighting(args.weighting))
    if args.format == "csv":
        rows = [(k, report.to_dict()[k]) for k in ("n", "ecce_mad", "ecce_r", "brier", "log_loss")]
        for b in report.ece1:
            rows.append((f"ece1[{b.key}]", report.ece1[b]))
            rows.append((f"ece2[{b.key}]", report.ece2[b]))
        _emit(_csv_text(["metric", "value"], rows), args.out)
    else:
        _emit(_json_text(report.to_dict()), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    data = read_csv(args.input)
    binnings = _binnings(args)
    report = metric_report(data.ps, binnings, Weighting(args.weighting))
    rows = [
        (b.scheme.value, b.num_bins, report.ece1[b], report.ece2[b], report.ecce_mad, report.ecce_r)
        for b in binnings
    ]
    header = ["scheme", "num_bins", "ece1", "ece2", "ecce_mad", "ecce_r"]
    if args.format == "json":
        _emit(_json_text([dict(zip(header, r)) for r in rows]), args.out)
    else:
        _emit(_csv_text(header, rows), args.out)
    return EXIT_OK


def cmd_curve(args) -> int:
    ps = canonical_sort(read_csv(args.input).ps)
    values = cumulative_curve(ps).values
    rows = [(0, None, float(values[0]))]
    rows += [(k, float(ps.scores[k - 1]), float(values[k])) for k in range(1, ps.n + 1)]
    header = ["k", "score", "C"]
    if args.format == "json":
        _emit(_json_text([dict(zip(header, r)) for r in rows]), args.out)
    else:
        _emit(_csv_text(header, rows), args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    ps = read_csv(args.input).ps
    cal = fit(Kind(args.kind), ps, seed=args.seed)
    _emit(_json_text(cal.to_dict()), args.out)
    return EXIT_OK


def cmd_select(args) -> int:
    data = read_csv(args.input)
    ratios = tuple(float(x) for x in args.ratios.split(","))
    if args.fold is not None and not 0 <= args.fold < args.folds:
        raise InputError(f"--fold must be in 0..{args.folds - 1}")
    outcome = run_selection(
        data.ps,
        k_folds=args.folds,
        ratios=ratios,
        seed=args.seed,
        binnings=_binnings(args),
        ids=data.ids,
        fold=args.fold,
        workers=args.jobs,
    )
    if args.format == "csv":
        rows = [(c.candidate_id, c.mean_ecce_r, c.mean_log_loss, str(c.feasible).lower(),
                 str(c.candidate_id in outcome.guard_survivors).lower(),
                 str(c.candidate_id == outcome.selected).lower())
                for c in outcome.candidates]
        text = _csv_text(["id", "mean_ecce_r", "mean_log_loss", "feasible", "guard_survivor", "selected"],
                         [[jsonable(v) for v in r] for r in rows])
    else:
        text = outcome.to_json()
    if args.out:
        Path(args.out).write_text(text)
        print(outcome.selected)
    else:
        sys.stdout.write(text)
        print(f"selected: {outcome.selected}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = SynthSpec(
        n=args.n,
        truth=parse_truth(args.truth),
        distortion=parse_distortion(args.distortion),
        seed=args.seed,
    )
    ps, p = generate(spec)
    out = Path(args.out)
    out.write_text(_csv_text(["score", "label"], zip(ps.scores.tolist(), ps.labels.tolist())))
    sidecar = Path(args.truth_out) if args.truth_out else out.with_name(out.stem + ".true_p.csv")
    sidecar.write_text(_csv_text(["score", "true_p"], zip(ps.scores.tolist(), np.asarray(p).tolist())))
    print(sidecar, file=sys.stderr)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--out", default=None, help="output path (default stdout)")

    binning = argparse.ArgumentParser(add_help=False)
    binning.add_argument("--bins", default=None, help="bin counts, e.g. 10,15,20 or 10-30")
    binning.add_argument("--schemes", default=None, help="equal_width,equal_frequency")
    binning.add_argument("--weighting", choices=[w.value for w in Weighting], default="bin_count")

    p = argparse.ArgumentParser(prog="ecce-select", description="Calibration metrics and guarded calibrator selection.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("metrics", parents=[common, binning], help="all metrics for one file")
    sp.add_argument("input")
    sp.set_defaults(func=cmd_metrics, default_format="json")

    sp = sub.add_parser("sweep", parents=[common, binning], help="ECE as a function of the bin count")
    sp.add_argument("input")
    sp.set_defaults(func=cmd_sweep, default_format="csv")

    sp = sub.add_parser("curve", parents=[common], help="cumulative-difference curve points")
    sp.add_argument("input")
    sp.set_defaults(func=cmd_curve, default_format="csv")

    sp = sub.add_parser("fit", parents=[common], help="fit one calibrator, write its JSON")
    sp.add_argument("input")
    sp.add_argument("--kind", required=True, choices=("platt", "isotonic", "spline"))
    sp.set_defaults(func=cmd_fit, default_format="json")

    sp = sub.add_parser("select", parents=[common, binning], help="cross-validated guarded selection")
    sp.add_argument("input")
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--fold", type=int, default=None, help="report a single outer fold")
    sp.add_argument("--ratios", default="0.75,0.25", help="train_model,train_calibration share of non-test data")
    sp.add_argument("--jobs", type=int, default=1, help="worker threads")
    sp.set_defaults(func=cmd_select, default_format="json")

    sp = sub.add_parser("simulate", parents=[common], help="write a synthetic score,label file")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--truth", default="uniform", help="uniform | beta:A,B")
    sp.add_argument("--distortion", default="none", help="none | temp:T | shift:D | overconfident:G")
    sp.add_argument("--truth-out", default=None, help="sidecar path (default <out>.true_p.csv)")
    sp.set_defaults(func=cmd_simulate, default_format="csv")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    if args.command == "simulate" and not args.out:
        parser.error("simulate needs --out")
    try:
        return args.func(args)
    except NoUncalibrated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SELECTION
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
