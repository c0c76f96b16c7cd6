"""Soft-margin RBF support vector machine trained with SMO, one-vs-one multiclass.

Binary problems solve the standard dual

    min_a  1/2 a' Q a - sum(a)     s.t.  0 <= a_i <= C,  y' a = 0,
    Q_ij = y_i y_j K(x_i, x_j),   K(x, z) = exp(-gamma |x - z|^2)

by sequential minimal optimization.  The working pair is the maximal
violating pair: among the coefficients free to move in each direction, the
two with the largest gap ``E_j - E_i`` between their prediction errors.
Iteration stops once that gap falls below ``tol``, which is exactly the
KKT condition at tolerance ``tol``.

Features are min-max scaled to [0, 1] with training statistics before
training and prediction.
"""

from __future__ import annotations

import itertools
import json
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cube import derive_rng

log = logging.getLogger(__name__)

MODEL_FORMAT = "hsiselect-svm"
MODEL_VERSION = 1
# kernel matrices up to this many samples are precomputed in full
FULL_KERNEL_LIMIT = 3000
ROW_CACHE_SIZE = 2000
TAU = 1e-12
# decision values within this (relative) distance of 0 count as ties -> lower class id
DECISION_TOL = 1e-12


@dataclass
class SvmParams:
    c: float = 100.0
    gamma: Optional[float] = None   # None -> 1 / (n_features * mean feature variance)
    tol: float = 1e-3
    max_passes: int = 1000

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError(f"C must be > 0, got {self.c}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_passes < 1:
            raise ValueError(f"max_passes must be >= 1, got {self.max_passes}")


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_matrix(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]} features")
    d2 = (np.einsum("ij,ij->i", a, a)[:, None] + np.einsum("ij,ij->i", b, b)[None, :]
          - 2.0 * a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


class _Kernel:
    """Kernel rows over one training set; full matrix when small, LRU rows otherwise."""

    def __init__(self, x: np.ndarray, gamma: float):
        self.x = x
        self.gamma = gamma
        n = x.shape[0]
        self.full = None
        if n <= FULL_KERNEL_LIMIT:
            self.full = rbf_matrix(x, x, gamma)
            np.fill_diagonal(self.full, 1.0)
        self.cache: OrderedDict = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        r = self.cache.get(i)
        if r is None:
            r = rbf_matrix(self.x[i:i + 1], self.x, self.gamma)[0]
            r[i] = 1.0
            self.cache[i] = r
            if len(self.cache) > ROW_CACHE_SIZE:
                self.cache.popitem(last=False)
        else:
            self.cache.move_to_end(i)
        return r


@dataclass
class BinarySolution:
    alpha: np.ndarray
    bias: float
    iterations: int
    gap: float


def dual_objective(alpha, y, kernel) -> float:
    """Dual objective ``sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij`` (to be maximized)."""
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ np.asarray(kernel) @ ay)


def smo_binary(x: np.ndarray, y: np.ndarray, c: float, gamma: float,
               tol: float = 1e-3, max_iter: Optional[int] = None) -> BinarySolution:
    """Solve one binary soft-margin problem; ``y`` in {-1, +1}."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if max_iter is None:
        max_iter = 1000 * max(n, 100)
    kern = _Kernel(np.asarray(x, dtype=np.float64), gamma)
    alpha = np.zeros(n)
    # F_t = u(x_t) - y_t with u the decision function without bias
    f_err = -y.copy()
    pos, neg = y > 0, y < 0
    gap = np.inf
    it = 0
    while it < max_iter:
        at_low = alpha <= 0.0
        at_up = alpha >= c
        up = (pos & ~at_up) | (neg & ~at_low)
        low = (pos & ~at_low) | (neg & ~at_up)
        cand_i = np.where(up, f_err, np.inf)
        cand_j = np.where(low, f_err, -np.inf)
        i = int(np.argmin(cand_i))
        j = int(np.argmax(cand_j))
        gap = cand_j[j] - cand_i[i]
        if not gap > tol:
            break
        ki, kj = kern.row(i), kern.row(j)
        eta = ki[i] + kj[j] - 2.0 * ki[j]
        if eta <= 0.0:
            eta = TAU
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            lo, hi = max(0.0, aj - ai), min(c, c + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - c), min(c, ai + aj)
        aj_new = min(hi, max(lo, aj + y[j] * (f_err[i] - f_err[j]) / eta))
        ai_new = ai + y[i] * y[j] * (aj - aj_new)
        # snap to the box so bound membership is exact
        if ai_new < 1e-12 * c:
            ai_new = 0.0
        elif ai_new > c * (1 - 1e-12):
            ai_new = c
        if aj_new < 1e-12 * c:
            aj_new = 0.0
        elif aj_new > c * (1 - 1e-12):
            aj_new = c
        di, dj = ai_new - ai, aj_new - aj
        if di == 0.0 and dj == 0.0:
            log.debug("smo: stalled at pair (%d, %d)", i, j)
            break
        alpha[i], alpha[j] = ai_new, aj_new
        f_err += di * y[i] * ki + dj * y[j] * kj
        it += 1
    else:
        log.warning("smo: iteration cap %d reached with KKT gap %.3g", max_iter, gap)

    free = (alpha > 0.0) & (alpha < c)
    if free.any():
        bias = -float(np.mean(f_err[free]))
    else:
        up = (pos & (alpha < c)) | (neg & (alpha > 0.0))
        low = (pos & (alpha > 0.0)) | (neg & (alpha < c))
        m = np.max(-f_err[up]) if up.any() else 0.0
        mm = np.min(-f_err[low]) if low.any() else 0.0
        bias = float((m + mm) / 2.0)
    return BinarySolution(alpha, bias, it, float(gap))


@dataclass
class BinaryMachine:
    classes: tuple          # (positive id, negative id); positive is the lower id
    support: np.ndarray     # scaled support vectors
    coef: np.ndarray        # alpha_i * y_i
    bias: float

    def decision(self, x_scaled: np.ndarray, gamma: float) -> np.ndarray:
        if self.coef.size == 0:
            return np.full(x_scaled.shape[0], self.bias)
        return rbf_matrix(x_scaled, self.support, gamma) @ self.coef + self.bias


@dataclass
class SvmModel:
    classes: np.ndarray
    c: float
    gamma: float
    scale_min: np.ndarray
    scale_max: np.ndarray
    machines: list = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.scale_min.size

    def scale(self, samples) -> np.ndarray:
        x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        span = self.scale_max - self.scale_min
        span = np.where(span > 0, span, 1.0)
        return (x - self.scale_min) / span


def _scaling(x: np.ndarray) -> tuple:
    return x.min(axis=0), x.max(axis=0)


def default_gamma(x_scaled: np.ndarray) -> float:
    d = x_scaled.shape[1]
    v = float(np.mean(x_scaled.var(axis=0)))
    return 1.0 / (d * v) if v > 0 else 1.0 / d


def train(samples, labels, params: Optional[SvmParams] = None) -> SvmModel:
    """Fit one binary machine per class pair on min-max scaled features."""
    params = params or SvmParams()
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels).ravel()
    if x.shape[0] != y.size:
        raise ValueError(f"{x.shape[0]} samples but {y.size} labels")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("training needs at least 2 classes")
    lo, hi = _scaling(x)
    model = SvmModel(classes, float(params.c), 0.0, lo, hi)
    xs = model.scale(x)
    model.gamma = float(params.gamma) if params.gamma is not None else default_gamma(xs)
    for a, b in itertools.combinations(classes.tolist(), 2):
        idx = np.flatnonzero((y == a) | (y == b))
        yy = np.where(y[idx] == a, 1.0, -1.0)
        sol = smo_binary(xs[idx], yy, params.c, model.gamma, params.tol,
                         params.max_passes * max(idx.size, 100))
        sv = sol.alpha > 0.0
        model.machines.append(BinaryMachine((a, b), xs[idx][sv], (sol.alpha * yy)[sv], sol.bias))
    return model


def decision_votes(model: SvmModel, samples) -> np.ndarray:
    """(n, n_classes) vote counts from the pairwise machines."""
    xs = model.scale(samples)
    pos = {c: i for i, c in enumerate(model.classes.tolist())}
    votes = np.zeros((xs.shape[0], model.classes.size), dtype=np.int64)
    for m in model.machines:
        f = m.decision(xs, model.gamma)
        tie = DECISION_TOL * (1.0 + float(np.abs(m.coef).sum()) + abs(m.bias))
        winner = np.where(f >= -tie, pos[m.classes[0]], pos[m.classes[1]])
        np.add.at(votes, (np.arange(xs.shape[0]), winner), 1)
    return votes


def predict(model: SvmModel, samples) -> np.ndarray:
    """Majority vote over pairwise machines; vote ties go to the lower class id.

    A single 1-D sample returns a scalar class id.
    """
    x = np.asarray(samples, dtype=np.float64)
    single = x.ndim == 1 and x.size == model.n_features
    if x.ndim == 1:
        x = x[None, :] if single else x[:, None]
    votes = decision_votes(model, x)
    out = model.classes[np.argmax(votes, axis=1)]
    return out[0] if single else out


def check_dual_feasibility(model: SvmModel, atol: float = 1e-8) -> None:
    for m in model.machines:
        a = np.abs(m.coef)
        if np.any(a < -atol) or np.any(a > model.c + atol):
            raise AssertionError(f"machine {m.classes}: alpha outside [0, C]")
        if abs(float(np.sum(m.coef))) > atol * max(1.0, model.c * m.coef.size):
            raise AssertionError(f"machine {m.classes}: sum(alpha * y) = {np.sum(m.coef)}")


# --------------------------------------------------------------------------
# hyperparameter search
# --------------------------------------------------------------------------

def stratified_folds(labels, folds: int, seed: int = 0) -> np.ndarray:
    """Fold id per sample; each class is dealt round-robin after a seeded shuffle.

    A class with fewer samples than ``folds`` ends up one sample per fold
    (leave-one-out within that class).
    """
    y = np.asarray(labels).ravel()
    rng = derive_rng(seed, "cv")
    fold = np.empty(y.size, dtype=np.int64)
    for c in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == c))
        fold[members] = np.arange(members.size) % folds
    return fold


def grid_search(samples, labels, c_grid: Sequence[float], gamma_grid: Sequence[float],
                folds: int = 3, seed: int = 0, tol: float = 1e-3) -> SvmParams:
    """Pick (C, gamma) by mean cross-validated overall accuracy on the training set.

    Ties prefer the smaller C, then the smaller gamma.
    """
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    x = np.asarray(samples, dtype=np.float64)
    y = np.asarray(labels).ravel()
    fold = stratified_folds(y, folds, seed)
    best, best_score = None, -np.inf
    for c in sorted(c_grid):
        for g in sorted(gamma_grid):
            accs = []
            for f in range(folds):
                test = fold == f
                if not test.any():
                    continue
                train_y = y[~test]
                if np.unique(train_y).size < 2:
                    pred = np.full(test.sum(), train_y[0])
                else:
                    model = train(x[~test], train_y, SvmParams(c=c, gamma=g, tol=tol))
                    pred = predict(model, x[test])
                accs.append(float(np.mean(pred == y[test])))
            score = float(np.mean(accs))
            log.debug("grid C=%g gamma=%g cv-oa=%.4f", c, g, score)
            if score > best_score + 1e-12:
                best, best_score = (c, g), score
    return SvmParams(c=best[0], gamma=best[1], tol=tol)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def model_to_dict(model: SvmModel) -> dict:
    """JSON-ready dict; floats keep their shortest round-trip repr, so loading is bit-exact."""
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "classes": model.classes.tolist(),
        "c": model.c,
        "gamma": model.gamma,
        "scale_min": model.scale_min.tolist(),
        "scale_max": model.scale_max.tolist(),
        "machines": [
            {"classes": list(m.classes), "support": m.support.tolist(),
             "coef": m.coef.tolist(), "bias": m.bias}
            for m in model.machines
        ],
    }


def model_from_dict(d: dict) -> SvmModel:
    if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
        raise ValueError(f"not a {MODEL_FORMAT} v{MODEL_VERSION} document")
    n_feat = len(d["scale_min"])
    model = SvmModel(np.asarray(d["classes"]), float(d["c"]), float(d["gamma"]),
                     np.asarray(d["scale_min"], dtype=np.float64),
                     np.asarray(d["scale_max"], dtype=np.float64))
    for m in d["machines"]:
        support = np.asarray(m["support"], dtype=np.float64).reshape(-1, n_feat)
        model.machines.append(BinaryMachine(tuple(m["classes"]), support,
                                            np.asarray(m["coef"], dtype=np.float64),
                                            float(m["bias"])))
    return model


def save_model(model: SvmModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> SvmModel:
    return model_from_dict(json.loads(Path(path).read_text()))
