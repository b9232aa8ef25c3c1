"""Cross-validated calibrator evaluation and guarded model selection.

Per outer fold the data is split into train_model / train_calibration / test
(60/20/20 with the defaults). Base-model scores are taken as given, so
train_model rows are planned but unused. Each calibrator is fit on
train_calibration and scored on test; candidates are compared by mean ECCE-R
over folds, and a calibrated candidate is eligible only if its mean log-loss
does not exceed the uncalibrated one.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .calibrators import Kind, fit
from .core import PredictionSet
from .errors import CalibrationError, NoUncalibrated, OneClassOnly, TooFewObservations
from .metrics import DEFAULT_BINNINGS, BinningSpec, MetricReport, metric_report

TRAIN_MODEL, TRAIN_CALIBRATION, TEST = 0, 1, 2
ROLE_NAMES = ("train_model", "train_calibration", "test")

CANDIDATE_ORDER = ("uncalibrated", "platt", "isotonic", "spline")
CANDIDATE_KIND = {
    "uncalibrated": Kind.IDENTITY,
    "platt": Kind.PLATT,
    "isotonic": Kind.ISOTONIC,
    "spline": Kind.SPLINE,
}
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SplitPlan:
    """Outer fold per observation and the role of every observation in every fold.

    ``roles[f, i]`` is one of ``TRAIN_MODEL``, ``TRAIN_CALIBRATION``, ``TEST``.
    """

    n: int
    k_folds: int
    seed: int
    ratios: tuple[float, float]
    fold: np.ndarray
    roles: np.ndarray

    def positions(self, fold: int, role: int) -> np.ndarray:
        return np.flatnonzero(self.roles[fold] == role)


def make_split_plan(
    labels: Sequence[int],
    k_folds: int = 5,
    ratios: tuple[float, float] = (0.75, 0.25),
    seed: int = 0,
    ids: Sequence[str] | None = None,
) -> SplitPlan:
    """Stratified outer K-fold plan with an inner train_model/train_calibration split.

    Within each label stratum the observations are shuffled with ``seed`` and
    dealt round-robin into folds, so fold sizes per stratum differ by at most
    one. The non-test part of each fold is split by ``ratios`` in the same
    shuffled order.

    If ``ids`` is given, observations are ordered by id before shuffling, so
    each observation's assignment does not depend on its row position.

    Raises
    ------
    TooFewObservations
        If ``len(labels) < k_folds``.
    OneClassOnly
    """
    y = np.asarray(labels).astype(np.int64)
    n = y.shape[0]
    if k_folds < 2:
        raise ValueError("k_folds must be at least 2")
    if n < k_folds:
        raise TooFewObservations(f"{n} observations cannot fill {k_folds} folds")
    if y.min() == y.max():
        raise OneClassOnly("split planning needs both label classes")
    r_model, r_cal = ratios
    if r_model < 0 or r_cal < 0 or not math.isclose(r_model + r_cal, 1.0):
        raise ValueError(f"ratios must be non-negative and sum to 1, got {ratios}")

    rng = np.random.default_rng(seed)
    fold = np.empty(n, dtype=np.int64)
    shuffled = {}
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if ids is not None:
            keys = np.asarray([str(ids[i]) for i in members])
            members = members[np.argsort(keys, kind="stable")]
        members = members[rng.permutation(members.shape[0])]
        fold[members] = np.arange(members.shape[0]) % k_folds
        shuffled[cls] = members

    roles = np.empty((k_folds, n), dtype=np.int8)
    for f in range(k_folds):
        roles[f, fold == f] = TEST
        for members in shuffled.values():
            rest = members[fold[members] != f]
            n_model = int(math.floor(r_model * rest.shape[0] + 0.5))
            roles[f, rest[:n_model]] = TRAIN_MODEL
            roles[f, rest[n_model:]] = TRAIN_CALIBRATION
    fold.flags.writeable = False
    roles.flags.writeable = False
    return SplitPlan(n=n, k_folds=k_folds, seed=seed, ratios=(r_model, r_cal), fold=fold, roles=roles)


# -- candidate evaluation -----------------------------------------------------

@dataclass(frozen=True)
class CandidateResult:
    candidate_id: str
    per_fold: list[MetricReport]
    mean_ecce_r: float | None
    mean_log_loss: float | None
    feasible: bool
    errors: dict[int, str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.candidate_id,
            "per_fold": [r.to_dict() for r in self.per_fold],
            "mean_ecce_r": self.mean_ecce_r,
            "mean_log_loss": self.mean_log_loss,
            "feasible": self.feasible,
            "errors": {str(k): v for k, v in self.errors.items()},
            "notes": self.notes,
        }


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def _evaluate_one(ps, plan, fold, candidate, binnings):
    cal_set = ps.subset(plan.positions(fold, TRAIN_CALIBRATION))
    test_set = ps.subset(plan.positions(fold, TEST))
    try:
        cal = fit(CANDIDATE_KIND[candidate], cal_set, seed=_fold_seed(plan.seed, fold))
    except CalibrationError as exc:
        return None, f"{type(exc).__name__}: {exc}", None
    report = metric_report(test_set.with_scores(cal.apply(test_set.scores)), binnings)
    note = None
    if cal.parameters.get("negative_slope"):
        note = f"fold {fold}: Platt slope {cal.parameters['slope']:.6g} is negative"
    return report, None, note


def evaluate_candidates(
    ps: PredictionSet,
    plan: SplitPlan,
    binnings: Iterable[BinningSpec] = DEFAULT_BINNINGS,
    candidates: Sequence[str] = CANDIDATE_ORDER,
    folds: Sequence[int] | None = None,
    workers: int = 1,
) -> list[CandidateResult]:
    """Fit every candidate calibrator per fold and score it on the test split.

    A fit error in any fold marks the candidate infeasible (the error is
    recorded per fold) without affecting the other candidates. ``folds``
    restricts evaluation to a subset of folds, e.g. a single-split report.
    Results do not depend on ``workers``.
    """
    if plan.n != ps.n:
        raise ValueError(f"plan covers {plan.n} observations, prediction set has {ps.n}")
    binnings = list(binnings)
    folds = list(range(plan.k_folds)) if folds is None else list(folds)
    for f in folds:
        if not 0 <= f < plan.k_folds:
            raise ValueError(f"fold {f} outside 0..{plan.k_folds - 1}")
    tasks = [(f, c) for c in candidates for f in folds]

    def run(task):
        return _evaluate_one(ps, plan, task[0], task[1], binnings)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run, tasks))
    else:
        outputs = [run(t) for t in tasks]

    results = []
    for c in candidates:
        per_fold, errors, notes = [], {}, []
        for (f, cand), (report, err, note) in zip(tasks, outputs):
            if cand != c:
                continue
            if err is not None:
                errors[f] = err
            else:
                per_fold.append(report)
            if note:
                notes.append(note)
        feasible = not errors
        mean_r = mean_ll = None
        if feasible:
            mean_r = math.fsum(r.ecce_r for r in per_fold) / len(per_fold)
            lls = [r.log_loss for r in per_fold]
            mean_ll = math.inf if any(math.isinf(v) for v in lls) else math.fsum(lls) / len(lls)
        results.append(CandidateResult(c, per_fold, mean_r, mean_ll, feasible, errors, notes))
    return results


# -- selection ----------------------------------------------------------------

@dataclass(frozen=True)
class SelectionOutcome:
    candidates: list[CandidateResult]
    guard_survivors: list[str]
    selected: str
    rationale: dict[str, str]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "candidates": [c.to_dict() for c in self.candidates],
            "guard_survivors": self.guard_survivors,
            "selected": self.selected,
            "rationale": self.rationale,
        }

    def to_json(self) -> str:
        return json.dumps(jsonable(self.to_dict()), indent=2) + "\n"


def jsonable(obj):
    """Replace non-finite floats: +inf -> "inf", -inf -> "-inf", nan -> null."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def _preference(candidate_id: str) -> int:
    try:
        return CANDIDATE_ORDER.index(candidate_id)
    except ValueError:
        return len(CANDIDATE_ORDER)


def select_model(candidates: Sequence[CandidateResult], config: dict | None = None) -> SelectionOutcome:
    """Lowest mean ECCE-R among the uncalibrated model and the calibrated
    candidates whose mean log-loss is at most the uncalibrated one.

    Infeasible candidates and candidates with infinite log-loss never pass.
    ECCE-R ties within 1e-12 go to uncalibrated, then platt, isotonic, spline.

    Raises
    ------
    NoUncalibrated
        If there is no feasible ``uncalibrated`` candidate.
    """
    by_id = {c.candidate_id: c for c in candidates}
    base = by_id.get("uncalibrated")
    if base is None or not base.feasible:
        raise NoUncalibrated("selection needs a feasible uncalibrated candidate")

    rationale = {"uncalibrated": "baseline; always eligible"}
    survivors = [base]
    for c in sorted(candidates, key=lambda c: (_preference(c.candidate_id), c.candidate_id)):
        if c is base:
            continue
        if not c.feasible:
            folds = ", ".join(str(f) for f in sorted(c.errors))
            rationale[c.candidate_id] = f"excluded: calibration failed on fold(s) {folds}"
        elif math.isinf(c.mean_log_loss):
            rationale[c.candidate_id] = "excluded: infinite mean log-loss"
        elif c.mean_log_loss <= base.mean_log_loss:
            rationale[c.candidate_id] = (
                f"eligible: mean log-loss {c.mean_log_loss!r} <= uncalibrated {base.mean_log_loss!r}"
            )
            survivors.append(c)
        else:
            rationale[c.candidate_id] = (
                f"excluded: mean log-loss {c.mean_log_loss!r} > uncalibrated {base.mean_log_loss!r}"
            )

    best = min(c.mean_ecce_r for c in survivors)
    tied = [c for c in survivors if c.mean_ecce_r <= best + TIE_TOL]
    chosen = min(tied, key=lambda c: (_preference(c.candidate_id), c.candidate_id))
    return SelectionOutcome(
        candidates=list(candidates),
        guard_survivors=[c.candidate_id for c in survivors],
        selected=chosen.candidate_id,
        rationale=rationale,
        config=config or {},
    )


def run_selection(
    ps: PredictionSet,
    k_folds: int = 5,
    ratios: tuple[float, float] = (0.75, 0.25),
    seed: int = 0,
    binnings: Iterable[BinningSpec] = DEFAULT_BINNINGS,
    ids: Sequence[str] | None = None,
    fold: int | None = None,
    workers: int = 1,
) -> SelectionOutcome:
    """Plan splits, evaluate the four candidates and apply the guarded selector."""
    binnings = list(binnings)
    plan = make_split_plan(ps.labels, k_folds, ratios, seed, ids)
    results = evaluate_candidates(
        ps, plan, binnings, folds=None if fold is None else [fold], workers=workers
    )
    config = {
        "k_folds": k_folds,
        "ratios": list(plan.ratios),
        "seed": seed,
        "binnings": [b.key for b in binnings],
    }
    if fold is not None:
        config["fold"] = fold
    return select_model(results, config)
