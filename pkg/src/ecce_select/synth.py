"""Synthetic forecasts with a known conditional event probability.

True probabilities ``p`` are drawn from a truth distribution, labels are
Bernoulli(p), and the reported score is ``distortion(p)``. Every distortion
is an invertible map on the logit scale, so E[p | score = s] is
``distortion.inverse(s)`` in closed form.

Randomness comes from numpy's PCG64 generator seeded with ``SynthSpec.seed``,
which gives the same stream on every platform.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np
from scipy import stats
from scipy.special import expit, logit

from .core import PredictionSet, make_prediction_set
from .metrics import BinningSpec, Norm, Scheme, ece, metric_report


# -- truth distributions ------------------------------------------------------

@dataclass(frozen=True)
class UniformP:
    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.random(n)

    def ppf(self, q: np.ndarray) -> np.ndarray:
        return np.asarray(q, dtype=np.float64)


@dataclass(frozen=True)
class BetaP:
    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("Beta parameters must be positive")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.beta(self.alpha, self.beta, n)

    def ppf(self, q: np.ndarray) -> np.ndarray:
        return stats.beta.ppf(q, self.alpha, self.beta)


TruthDist = Union[UniformP, BetaP]


# -- distortions --------------------------------------------------------------

# identity parameters return the input untouched (logit/expit round trips
# are only accurate to a few ulps)
def _scale_logit(p, factor):
    p = np.asarray(p, dtype=np.float64)
    return p.copy() if factor == 1 else expit(logit(p) * factor)


def _shift_logit(p, delta):
    p = np.asarray(p, dtype=np.float64)
    return p.copy() if delta == 0 else expit(logit(p) + delta)


@dataclass(frozen=True)
class NoDistortion:
    def __call__(self, p):
        return np.asarray(p, dtype=np.float64)

    def inverse(self, s):
        return np.asarray(s, dtype=np.float64)


@dataclass(frozen=True)
class TempScale:
    """Divide the logit by ``t``; t < 1 sharpens, t > 1 flattens."""

    t: float

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("temperature must be positive")

    def __call__(self, p):
        return _scale_logit(p, 1.0 / self.t)

    def inverse(self, s):
        return _scale_logit(s, self.t)


@dataclass(frozen=True)
class LogitShift:
    delta: float

    def __call__(self, p):
        return _shift_logit(p, self.delta)

    def inverse(self, s):
        return _shift_logit(s, -self.delta)


@dataclass(frozen=True)
class Overconfident:
    """Multiply the logit by ``gamma``; gamma > 1 pushes scores to 0 and 1."""

    gamma: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def __call__(self, p):
        return _scale_logit(p, self.gamma)

    def inverse(self, s):
        return _scale_logit(s, 1.0 / self.gamma)


Distortion = Union[NoDistortion, TempScale, LogitShift, Overconfident]


@dataclass(frozen=True)
class SynthSpec:
    n: int
    truth: TruthDist = field(default_factory=UniformP)
    distortion: Distortion = field(default_factory=NoDistortion)
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")


def draw_truth(truth: TruthDist, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """True probabilities and Bernoulli labels for ``seed``."""
    rng = np.random.default_rng(seed)
    p = truth.sample(rng, n)
    labels = (rng.random(n) < p).astype(np.int8)
    return p, labels


def generate(spec: SynthSpec) -> tuple[PredictionSet, np.ndarray]:
    """Reported scores with Bernoulli(true p) labels, plus the hidden true p."""
    p, labels = draw_truth(spec.truth, spec.n, spec.seed)
    return make_prediction_set(spec.distortion(p), labels), p


def generate_shared(
    n: int,
    distortions: Mapping[str, Distortion],
    truth: TruthDist | None = None,
    seed: int = 0,
) -> tuple[dict[str, PredictionSet], np.ndarray]:
    """Several forecasters scoring the same observations (same p and labels)."""
    p, labels = draw_truth(truth or UniformP(), n, seed)
    sets = {name: make_prediction_set(d(p), labels) for name, d in distortions.items()}
    return sets, p


def true_calibration_gap(spec: SynthSpec, resolution: int = 10_000) -> float:
    """E|E[p | s] - s| over the score distribution, by midpoint quadrature.

    Integrates over quantiles of the true probability, using that the score
    is a monotone function of p: E[p | s = distortion(p)] = p.
    """
    q = (np.arange(resolution) + 0.5) / resolution
    p = spec.truth.ppf(q)
    s = spec.distortion(p)
    return float(np.mean(np.abs(spec.distortion.inverse(s) - s)))


# -- parsing (CLI and scripts) ------------------------------------------------

def parse_truth(text: str) -> TruthDist:
    """``uniform`` or ``beta:ALPHA,BETA``."""
    name, _, args = text.partition(":")
    if name == "uniform":
        return UniformP()
    if name == "beta":
        a, b = (float(x) for x in args.split(","))
        return BetaP(a, b)
    raise ValueError(f"unknown truth distribution {text!r}")


def parse_distortion(text: str) -> Distortion:
    """``none``, ``temp:T``, ``shift:DELTA`` or ``overconfident:GAMMA``."""
    name, _, arg = text.partition(":")
    if name == "none":
        return NoDistortion()
    makers = {"temp": TempScale, "shift": LogitShift, "overconfident": Overconfident}
    if name not in makers:
        raise ValueError(f"unknown distortion {text!r}")
    return makers[name](float(arg))


# -- the frozen fragility instance --------------------------------------------

@dataclass(frozen=True)
class FragilityCase:
    """Two forecasters on shared outcomes whose ECE ranking flips with bin count.

    Found by ``scripts/find_fragility_pair.py`` and frozen here; the
    regression tests assert the flip and the stable ECCE-R ranking.
    """

    n: int
    seed: int
    truth: TruthDist
    a: Distortion
    b: Distortion
    scheme: Scheme
    bins_low: int
    bins_high: int

    def sets(self) -> tuple[PredictionSet, PredictionSet]:
        sets, _ = generate_shared(self.n, {"a": self.a, "b": self.b}, self.truth, self.seed)
        return sets["a"], sets["b"]

    def rankings(self) -> dict[str, tuple[bool, bool]]:
        """Whether A beats B (strictly) under each metric at both bin counts."""
        A, B = self.sets()
        lo = BinningSpec(self.scheme, self.bins_low)
        hi = BinningSpec(self.scheme, self.bins_high)
        ra, rb = metric_report(A, [lo, hi]), metric_report(B, [lo, hi])
        return {
            "ece1": (ece(A, lo, Norm.L1) < ece(B, lo, Norm.L1),
                     ece(A, hi, Norm.L1) < ece(B, hi, Norm.L1)),
            # ECCE-R has no bin parameter; computed once, same answer at both
            "ecce_r": (ra.ecce_r < rb.ecce_r, ra.ecce_r < rb.ecce_r),
        }


# ECE^1(A) - ECE^1(B) is about -0.011 at 14 equal-width bins and +0.011 at 26;
# ECCE-R is about 0.0117 for A and 0.0272 for B
FRAGILITY_CASE = FragilityCase(
    n=2000,
    seed=53,
    truth=UniformP(),
    a=TempScale(1.2),
    b=LogitShift(-0.15),
    scheme=Scheme.EQUAL_WIDTH,
    bins_low=14,
    bins_high=26,
)
