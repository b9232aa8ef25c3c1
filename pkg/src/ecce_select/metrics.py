"""Calibration metrics and proper scoring rules for binary forecasts.

Cumulative metrics (ECCE-MAD, ECCE-R) are read off the cumulative-difference
curve and need no tuning parameter. Binned ECE depends on a ``BinningSpec``;
empty bins are skipped, and equal-frequency edges with duplicate values are
merged, so the effective number of bins can be smaller than requested.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import CumulativeCurve, PredictionSet, canonical_sort, cumulative_curve


class Scheme(str, enum.Enum):
    EQUAL_WIDTH = "equal_width"
    EQUAL_FREQUENCY = "equal_frequency"


class Norm(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"


class Weighting(str, enum.Enum):
    BIN_COUNT = "bin_count"
    BIN_WIDTH = "bin_width"


@dataclass(frozen=True, order=True)
class BinningSpec:
    scheme: Scheme
    num_bins: int

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if int(self.num_bins) != self.num_bins or self.num_bins < 1:
            raise ValueError(f"num_bins must be a positive integer, got {self.num_bins!r}")
        object.__setattr__(self, "num_bins", int(self.num_bins))

    @property
    def key(self) -> str:
        return f"{self.scheme.value}:{self.num_bins}"

    @classmethod
    def parse(cls, text: str) -> BinningSpec:
        """Parse ``"equal_width:15"`` (also accepts ``width:15`` / ``freq:15``)."""
        scheme, _, bins = text.partition(":")
        aliases = {"width": Scheme.EQUAL_WIDTH, "ew": Scheme.EQUAL_WIDTH,
                   "freq": Scheme.EQUAL_FREQUENCY, "ef": Scheme.EQUAL_FREQUENCY}
        return cls(aliases.get(scheme, scheme), int(bins))


DEFAULT_BIN_COUNTS = (10, 15, 20, 25, 30)
DEFAULT_BINNINGS = tuple(
    BinningSpec(scheme, b) for scheme in Scheme for b in DEFAULT_BIN_COUNTS
)


def _sorted(ps: PredictionSet) -> PredictionSet:
    return ps if ps.sorted_flag else canonical_sort(ps)


# -- cumulative metrics -------------------------------------------------------

def ecce_mad(curve: CumulativeCurve) -> float:
    """Maximum absolute cumulative difference, max_k |C_k| for k = 1..n."""
    return float(np.max(np.abs(curve.values[1:])))


def ecce_r(curve: CumulativeCurve) -> float:
    """Range of the cumulative differences, C_0 = 0 included."""
    return float(np.max(curve.values) - np.min(curve.values))


def ecce_r_interval_oracle(ps: PredictionSet) -> float:
    """Largest |total miscalibration| over contiguous index intervals, by enumeration.

    O(n^2). Kept as an independent check on ``ecce_r``; it never looks at the
    cumulative curve.
    """
    if not ps.sorted_flag:
        raise ValueError("the interval oracle enumerates a canonically sorted set")
    d = ps.scores - ps.labels
    best = 0.0
    for start in range(ps.n):
        sums = np.cumsum(d[start:])
        best = max(best, float(np.max(np.abs(sums))))
    return best / ps.n


# -- binned metrics -----------------------------------------------------------

def bin_edges(ps: PredictionSet, spec: BinningSpec) -> np.ndarray:
    """Bin boundaries on [0, 1], ``len(edges) == effective_bins + 1``.

    Equal-width edges are ``b / B``. Equal-frequency interior edges are the
    sorted scores at ranks ``floor(b * n / B)``; an observation equal to an
    edge belongs to the lower bin.
    """
    if spec.scheme is Scheme.EQUAL_WIDTH:
        # i / B is correctly rounded, so a score written as 0.3 sits on its edge
        return np.arange(spec.num_bins + 1) / spec.num_bins
    s = _sorted(ps).scores
    n = s.shape[0]
    ranks = (np.arange(1, spec.num_bins) * n) // spec.num_bins
    interior = np.unique(s[ranks[ranks > 0] - 1])
    interior = interior[interior < 1.0]
    return np.concatenate(([0.0], interior, [1.0]))


def assign_bins(scores: np.ndarray, spec: BinningSpec, edges: np.ndarray) -> np.ndarray:
    """Bin index per score for the edges returned by ``bin_edges``."""
    if spec.scheme is Scheme.EQUAL_WIDTH:
        # [e_b, e_{b+1}), last bin closed at 1
        idx = np.searchsorted(edges, scores, side="right") - 1
        return np.clip(idx, 0, spec.num_bins - 1).astype(np.int64)
    # (e_b, e_{b+1}], first bin closed at 0
    return np.searchsorted(edges[1:-1], scores, side="left").astype(np.int64)


@dataclass(frozen=True)
class BinStats:
    """Per-bin summaries; ``count == 0`` marks an empty bin."""

    edges: np.ndarray
    count: np.ndarray
    mean_score: np.ndarray
    mean_label: np.ndarray

    @property
    def width(self) -> np.ndarray:
        return np.diff(self.edges)


def bin_statistics(ps: PredictionSet, spec: BinningSpec) -> BinStats:
    ps = _sorted(ps)
    edges = bin_edges(ps, spec)
    nb = edges.shape[0] - 1
    idx = assign_bins(ps.scores, spec, edges)
    count = np.bincount(idx, minlength=nb)
    # sorted scores make every bin a contiguous run; fsum keeps bin means
    # correctly rounded and independent of the order inside the run
    bounds = np.concatenate(([0], np.cumsum(count)))
    mean_s = np.full(nb, np.nan)
    mean_y = np.full(nb, np.nan)
    for b in np.flatnonzero(count):
        lo, hi = bounds[b], bounds[b + 1]
        mean_s[b] = math.fsum(ps.scores[lo:hi]) / count[b]
        mean_y[b] = int(ps.labels[lo:hi].sum(dtype=np.int64)) / count[b]
    return BinStats(edges=edges, count=count, mean_score=mean_s, mean_label=mean_y)


def ece_from_stats(
    stats: BinStats,
    norm: Norm | str = Norm.L1,
    weighting: Weighting | str = Weighting.BIN_COUNT,
) -> float:
    norm, weighting = Norm(norm), Weighting(weighting)
    full = stats.count > 0
    n = int(stats.count.sum())
    gap = np.abs(stats.mean_label[full] - stats.mean_score[full])
    if weighting is Weighting.BIN_COUNT:
        w = stats.count[full] / n
    else:
        widths = stats.width[full]
        total = widths.sum()
        # all mass on a zero-width bin (every score at 0): fall back to counts
        w = widths / total if total > 0 else stats.count[full] / n
    if norm is Norm.L1:
        return float(np.sum(w * gap))
    return float(math.sqrt(np.sum(w * gap**2)))


def ece(
    ps: PredictionSet,
    spec: BinningSpec,
    norm: Norm | str = Norm.L1,
    weighting: Weighting | str = Weighting.BIN_COUNT,
) -> float:
    """Binned expected calibration error.

    Parameters
    ----------
    norm : {"l1", "l2"}
        L1 is the weighted mean absolute gap; L2 is the root of the weighted
        mean squared gap.
    weighting : {"bin_count", "bin_width"}
        Weight bins by their share of observations, or by their width over
        the total width of the nonempty bins.
    """
    return ece_from_stats(bin_statistics(ps, spec), norm, weighting)


# -- scoring rules ------------------------------------------------------------

def brier_score(ps: PredictionSet) -> float:
    """Mean squared difference between forecast and outcome."""
    return math.fsum((ps.scores - ps.labels) ** 2) / ps.n


def log_loss(ps: PredictionSet) -> float:
    """Mean negative log-likelihood (natural log); ``inf`` if any term is -ln 0."""
    s, y = ps.scores, ps.labels
    with np.errstate(divide="ignore"):
        terms = np.where(y == 1, -np.log(s), -np.log1p(-s))
    if np.isinf(terms).any():
        return math.inf
    return math.fsum(terms) / ps.n


# -- reports ------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    n: int
    ecce_mad: float
    ecce_r: float
    brier: float
    log_loss: float
    ece1: dict[BinningSpec, float] = field(default_factory=dict)
    ece2: dict[BinningSpec, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "ecce_mad": self.ecce_mad,
            "ecce_r": self.ecce_r,
            "brier": self.brier,
            "log_loss": self.log_loss,
            "ece": [
                {"scheme": b.scheme.value, "num_bins": b.num_bins,
                 "ece1": self.ece1[b], "ece2": self.ece2[b]}
                for b in self.ece1
            ],
        }


def metric_report(
    ps: PredictionSet,
    binnings: Iterable[BinningSpec] = DEFAULT_BINNINGS,
    weighting: Weighting | str = Weighting.BIN_COUNT,
) -> MetricReport:
    """Compute every metric for one prediction set."""
    ps = _sorted(ps)
    curve = cumulative_curve(ps)
    stats = {b: bin_statistics(ps, b) for b in binnings}
    return MetricReport(
        n=ps.n,
        ecce_mad=ecce_mad(curve),
        ecce_r=ecce_r(curve),
        brier=brier_score(ps),
        log_loss=log_loss(ps),
        ece1={b: ece_from_stats(st, Norm.L1, weighting) for b, st in stats.items()},
        ece2={b: ece_from_stats(st, Norm.L2, weighting) for b, st in stats.items()},
    )
