"""Post-hoc calibrators: identity, Platt scaling, isotonic regression, spline.

Each ``fit_*`` function takes a held-out calibration set and returns an
immutable ``Calibrator`` whose ``apply`` maps raw scores in [0, 1] to
calibrated probabilities in [0, 1]. Fitted calibrators round-trip through
JSON (``to_json`` / ``Calibrator.from_json``).
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import expit

from . import __version__
from .core import PredictionSet, canonical_sort
from .errors import NoConverge, OneClassOnly, TooFewPoints

SPLINE_EPS = 1e-6
SPLINE_RIDGE_GRID = tuple(float(x) for x in np.logspace(-6, 2, 9))
SPLINE_INNER_FOLDS = 5


class Kind(str, enum.Enum):
    IDENTITY = "identity"
    PLATT = "platt"
    ISOTONIC = "isotonic"
    SPLINE = "spline"


@dataclass(frozen=True, eq=False)
class Calibrator:
    kind: Kind
    parameters: dict[str, Any] = field(default_factory=dict)
    fitted_on_n: int = 0

    def apply(self, scores) -> np.ndarray:
        s = np.asarray(scores, dtype=np.float64)
        p = self.parameters
        if self.kind is Kind.IDENTITY:
            return s.copy()
        if self.kind is Kind.PLATT:
            return expit(p["slope"] * s + p["intercept"])
        if self.kind is Kind.ISOTONIC:
            return np.interp(s, p["breakpoints"], p["values"])
        if self.kind is Kind.SPLINE:
            eta = _spline_design(s, p) @ np.asarray(p["coef"])
            return np.clip(expit(eta), p["eps"], 1.0 - p["eps"])
        raise ValueError(f"unknown calibrator kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "parameters": self.parameters,
            "fitted_on_n": self.fitted_on_n,
            "library_version": __version__,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> Calibrator:
        return cls(Kind(doc["kind"]), dict(doc["parameters"]), int(doc["fitted_on_n"]))

    @classmethod
    def from_json(cls, text: str) -> Calibrator:
        return cls.from_dict(json.loads(text))


def apply(cal: Calibrator, scores) -> np.ndarray:
    return cal.apply(scores)


def _require_both_classes(ps: PredictionSet) -> tuple[int, int]:
    n_pos = int(ps.labels.sum())
    n_neg = ps.n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly(f"calibration set has a single class ({n_pos} positives, {n_neg} negatives)")
    return n_pos, n_neg


def identity(ps: PredictionSet | None = None) -> Calibrator:
    return Calibrator(Kind.IDENTITY, {}, 0 if ps is None else ps.n)


# -- Platt scaling ------------------------------------------------------------

def fit_platt(ps: PredictionSet, max_iter: int = 100, tol: float = 1e-10) -> Calibrator:
    """Fit p(s) = 1 / (1 + exp(-(a s + b))) by Newton's method.

    Targets are smoothed to (N+ + 1)/(N+ + 2) for positives and 1/(N- + 2)
    for negatives. Convergence is declared when the gradient of the mean
    negative log-likelihood has norm below ``tol``.

    Raises
    ------
    OneClassOnly
    NoConverge
        If ``max_iter`` Newton steps do not reach ``tol``.
    """
    n_pos, n_neg = _require_both_classes(ps)
    s = ps.scores
    t = np.where(ps.labels == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    X = np.column_stack([s, np.ones_like(s)])

    beta0 = np.array([0.0, math.log((n_pos + 1.0) / (n_neg + 1.0))])
    beta, converged = _newton_logistic(X, t, np.zeros(2), beta0, max_iter, tol)
    if not converged:
        raise NoConverge(f"Platt scaling did not reach gradient norm {tol:g} in {max_iter} iterations")

    a, b = float(beta[0]), float(beta[1])
    return Calibrator(
        Kind.PLATT,
        {"slope": a, "intercept": b, "negative_slope": a < 0},
        ps.n,
    )


# -- isotonic regression ------------------------------------------------------

def pava(y, w=None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit to ``y`` (pool adjacent violators)."""
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64)
    # each block: (weighted mean, total weight, length)
    means: list[float] = []
    weights: list[float] = []
    sizes: list[int] = []
    for yi, wi in zip(y, w):
        means.append(float(yi))
        weights.append(float(wi))
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, k2 = means.pop(), weights.pop(), sizes.pop()
            m1, w1, k1 = means.pop(), weights.pop(), sizes.pop()
            wt = w1 + w2
            means.append((w1 * m1 + w2 * m2) / wt)
            weights.append(wt)
            sizes.append(k1 + k2)
    return np.repeat(means, sizes)


def isotonic_fitted_values(ps: PredictionSet) -> tuple[np.ndarray, np.ndarray]:
    """Distinct sorted scores and the monotone least-squares fit at each.

    Tied scores are pooled first, so the fit is a function of the score.
    """
    ps = canonical_sort(ps)
    xs, start, counts = np.unique(ps.scores, return_index=True, return_counts=True)
    sums = np.add.reduceat(ps.labels.astype(np.float64), start)
    return xs, pava(sums / counts, counts)


def fit_isotonic(ps: PredictionSet) -> Calibrator:
    """Monotone least-squares fit; linear between breakpoints, clamped outside."""
    xs, fitted = isotonic_fitted_values(ps)
    # only the two ends of each constant block matter for interpolation
    keep = np.ones(xs.shape[0], dtype=bool)
    if xs.shape[0] > 2:
        same_prev = fitted[1:-1] == fitted[:-2]
        same_next = fitted[1:-1] == fitted[2:]
        keep[1:-1] = ~(same_prev & same_next)
    return Calibrator(
        Kind.ISOTONIC,
        {"breakpoints": xs[keep].tolist(), "values": fitted[keep].tolist()},
        ps.n,
    )


# -- spline calibration -------------------------------------------------------

def natural_cubic_basis(x: np.ndarray, knots) -> np.ndarray:
    """Truncated-power natural cubic spline basis without the intercept.

    Returns ``len(knots) - 1`` columns: x, then one column per interior knot.
    Linear beyond the boundary knots.
    """
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(knots, dtype=np.float64)
    K = k.shape[0]

    def d(j):
        return (np.maximum(x - k[j], 0.0) ** 3 - np.maximum(x - k[K - 1], 0.0) ** 3) / (k[K - 1] - k[j])

    cols = [x]
    if K > 2:
        last = d(K - 2)
        cols.extend(d(j) - last for j in range(K - 2))
    return np.column_stack(cols)


def _spline_design(s: np.ndarray, params: dict) -> np.ndarray:
    B = natural_cubic_basis(s, params["knots"])
    B = (B - np.asarray(params["center"])) / np.asarray(params["scale"])
    return np.column_stack([np.ones(s.shape[0]), B])


def _newton_logistic(X, t, pen, beta, max_iter=100, tol=1e-10):
    """Minimize mean logistic loss against targets ``t`` + sum(pen * beta**2) / 2.

    Damped Newton with Armijo backtracking. Near the optimum the objective
    stops resolving decreases, so a full step is also taken whenever it
    shrinks the gradient. Returns ``(beta, converged)``.
    """
    n = X.shape[0]

    def objective(b):
        z = X @ b
        return float(np.sum(np.logaddexp(0.0, z) - t * z)) / n + 0.5 * float(np.sum(pen * b * b))

    def gradient(b):
        return X.T @ (expit(X @ b) - t) / n + pen * b

    f = objective(beta)
    grad = gradient(beta)
    for _ in range(max_iter):
        gnorm = np.linalg.norm(grad)
        if gnorm < tol:
            return beta, True
        p = expit(X @ beta)
        hess = (X.T * (p * (1.0 - p))) @ X / n + np.diag(pen)
        step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        full = beta + step
        g_full = gradient(full)
        if np.linalg.norm(g_full) < gnorm and objective(full) <= f + 1e-12 * max(1.0, abs(f)):
            beta, f, grad = full, objective(full), g_full
            continue
        size = 0.5
        while size > 1e-10:
            cand = beta + size * step
            fc = objective(cand)
            if fc <= f + 1e-4 * size * float(grad @ step):
                break
            size /= 2.0
        else:
            return beta, False
        beta, f, grad = cand, fc, gradient(cand)
    return beta, bool(np.linalg.norm(grad) < tol)


def _stratified_folds(labels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    fold = np.empty(labels.shape[0], dtype=np.int64)
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.shape[0])]
        fold[members] = np.arange(members.shape[0]) % k
    return fold


def fit_spline(ps: PredictionSet, num_knots: int = 6, seed: int = 0) -> Calibrator:
    """Logistic regression on a natural cubic spline basis of the raw score.

    Knots sit at equally spaced empirical quantiles of the scores. The ridge
    strength is picked from ``SPLINE_RIDGE_GRID`` by stratified 5-fold
    log-loss on ``ps`` (folds drawn with ``seed``), then the model is refit
    on all of ``ps``. Outputs are clamped to [1e-6, 1 - 1e-6].

    Raises
    ------
    OneClassOnly
    TooFewPoints
        If ``n < 10`` or there are fewer distinct scores than knots.
    """
    if num_knots < 2:
        raise ValueError("num_knots must be at least 2")
    _require_both_classes(ps)
    distinct = np.unique(ps.scores)
    if ps.n < 10 or distinct.shape[0] < num_knots:
        raise TooFewPoints(
            f"spline calibration needs n >= 10 and >= {num_knots} distinct scores "
            f"(got n={ps.n}, {distinct.shape[0]} distinct)"
        )
    ps = canonical_sort(ps)
    s, y = ps.scores, ps.labels.astype(np.float64)

    q = np.linspace(0.0, 1.0, num_knots)
    knots = np.quantile(s, q)
    if np.any(np.diff(knots) <= 0):
        # heavy ties collapse quantiles; spread knots over the distinct values
        knots = np.quantile(distinct, q)

    raw = natural_cubic_basis(s, knots)
    center = raw.mean(axis=0)
    scale = raw.std(axis=0)
    scale[scale == 0] = 1.0
    params = {"knots": knots.tolist(), "center": center.tolist(), "scale": scale.tolist(),
              "eps": SPLINE_EPS}
    X = _spline_design(s, params)

    pen = np.zeros(X.shape[1])

    def beta0(y_fit):
        prev = float(np.clip(y_fit.mean(), 1e-6, 1 - 1e-6))
        b = np.zeros(X.shape[1])
        b[0] = math.log(prev / (1 - prev))
        return b

    rng = np.random.default_rng(seed)
    fold = _stratified_folds(ps.labels, SPLINE_INNER_FOLDS, rng)
    cv_loss = []
    for ridge in SPLINE_RIDGE_GRID:
        pen[1:] = ridge
        total = 0.0
        for f in range(SPLINE_INNER_FOLDS):
            train, held = fold != f, fold == f
            if not held.any():
                continue
            beta, _ = _newton_logistic(X[train], y[train], pen, beta0(y[train]))
            p = np.clip(expit(X[held] @ beta), SPLINE_EPS, 1 - SPLINE_EPS)
            total += float(-np.sum(y[held] * np.log(p) + (1 - y[held]) * np.log1p(-p)))
        cv_loss.append(total / ps.n)
    ridge = SPLINE_RIDGE_GRID[int(np.argmin(cv_loss))]

    pen[1:] = ridge
    beta, converged = _newton_logistic(X, y, pen, beta0(y))
    params.update(coef=beta.tolist(), ridge=ridge, converged=converged)
    return Calibrator(Kind.SPLINE, params, ps.n)


FITTERS = {
    Kind.IDENTITY: lambda ps, seed=0: identity(ps),
    Kind.PLATT: lambda ps, seed=0: fit_platt(ps),
    Kind.ISOTONIC: lambda ps, seed=0: fit_isotonic(ps),
    Kind.SPLINE: lambda ps, seed=0: fit_spline(ps, seed=seed),
}


def fit(kind: Kind | str, ps: PredictionSet, seed: int = 0) -> Calibrator:
    return FITTERS[Kind(kind)](ps, seed=seed)
