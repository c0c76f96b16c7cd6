"""Greedy forward band selection with pluggable information criteria.

Every method starts from the band with the largest MI with the ground
truth, then adds one band per step, taking the remaining band that
maximizes its criterion.  Ties (within ``TIE_TOL``) go to the lowest band
index.

Criteria, with ``b`` the candidate, ``S`` the selected set, ``gt`` the class
labels and ``est`` the running average of the selected bands:

=======  ==============================================================
mim      MI(b, gt)
mifs     MI(b, gt) - beta * sum_s MI(b, s)
mrmr     MI(b, gt) - mean_s MI(b, s)
nmifs    MI(b, gt) - beta * sum_s MI(b, s) / min(H(b), H(s))
jmi      sum_s I((b, s); gt)
disr     sum_s I((b, s); gt) / H(b, s, gt)
mrms     MI(b, gt) + II(b, est, gt)
mibf     MI(b, gt), rejecting b when II(b, est, gt) < threshold
=======  ==============================================================

``II`` is the signed interaction information.  The ``score_*`` functions
evaluate one candidate from scratch; :func:`select` runs the greedy loop
with incremental accumulators and must agree with them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import info
from .cube import (
    DEFAULT_LEVELS,
    EstimateBand,
    GroundTruth,
    HyperCube,
    labeled_values,
    quantize_matrix,
    quantize_values,
)

log = logging.getLogger(__name__)

METHODS = ("mim", "mibf", "mifs", "mrmr", "nmifs", "jmi", "disr", "mrms")
TIE_TOL = 1e-12


@dataclass
class SelectorConfig:
    method: str
    k: int
    beta: float = 0.5
    threshold: float = -0.02
    levels: int = DEFAULT_LEVELS

    def __post_init__(self):
        self.method = self.method.lower()
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")


@dataclass
class SelectionTrace:
    method: str
    bands: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    relevance: list = field(default_factory=list)
    interaction: list = field(default_factory=list)

    def __len__(self):
        return len(self.bands)

    def prefix(self, k: int) -> list:
        return list(self.bands[:k])


# --------------------------------------------------------------------------
# single-candidate scores
# --------------------------------------------------------------------------

def score_mim(b, gt) -> float:
    return info.mutual_info(b, gt)


def score_mifs(b, gt, selected: Sequence = (), beta: float = 0.5) -> float:
    return info.mutual_info(b, gt) - beta * sum(info.mutual_info(b, s) for s in selected)


def score_mrmr(b, gt, selected: Sequence = ()) -> float:
    rel = info.mutual_info(b, gt)
    if not selected:
        return rel
    return rel - sum(info.mutual_info(b, s) for s in selected) / len(selected)


def score_nmifs(b, gt, selected: Sequence = (), beta: float = 0.5) -> float:
    return info.mutual_info(b, gt) - beta * sum(info.normalized_mi_min(b, s) for s in selected)


def score_jmi(b, gt, selected: Sequence = ()) -> float:
    if not selected:
        return info.mutual_info(b, gt)
    return sum(info.joint_pair_class_mi(b, s, gt) for s in selected)


def _disr_term(b, s, gt) -> float:
    h = info.joint_entropy3(b, s, gt)
    if h <= 0.0:
        return 0.0
    return info.joint_pair_class_mi(b, s, gt) / h


def score_disr(b, gt, selected: Sequence = ()) -> float:
    if not selected:
        h = info.joint_entropy(b, gt)
        return 0.0 if h <= 0.0 else info.mutual_info(b, gt) / h
    return sum(_disr_term(b, s, gt) for s in selected)


def _as_quantized(est, levels: int):
    if isinstance(est, EstimateBand):
        return quantize_values(est.values, levels)
    return est


def score_mrms(b, gt, est, levels: int = DEFAULT_LEVELS) -> float:
    """Relevance plus interaction with the ground-truth estimate.

    ``est`` is an :class:`EstimateBand` (quantized here at ``levels``) or an
    already discrete stream.
    """
    q = _as_quantized(est, levels)
    return info.mutual_info(b, gt) + info.interaction_info(b, q, gt)


def score_mibf(b, gt, est, threshold: float = -0.02, levels: int = DEFAULT_LEVELS) -> tuple:
    """``(accepted, MI(b, gt))``; rejected when the interaction with ``est`` is below ``threshold``."""
    q = _as_quantized(est, levels)
    accepted = info.interaction_info(b, q, gt) >= threshold
    return bool(accepted), info.mutual_info(b, gt)


# --------------------------------------------------------------------------
# greedy engine
# --------------------------------------------------------------------------

@dataclass
class LabeledData:
    """Raw and quantized labeled-pixel views of a cube, shared by every method."""

    values: np.ndarray      # (bands, n) float64
    symbols: np.ndarray     # (bands, n) int64
    classes: np.ndarray     # (n,) int64 compact class symbols 0..C-1
    class_ids: np.ndarray   # original ids for each compact symbol
    levels: int

    @property
    def bands(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_cube(cls, cube: HyperCube, gt: GroundTruth, levels: int = DEFAULT_LEVELS):
        gt.check_matches(cube)
        labels = gt.labeled()
        if labels.size == 0:
            raise ValueError("ground truth has no labeled pixels")
        class_ids, compact = np.unique(labels, return_inverse=True)
        if class_ids.size < 2:
            raise ValueError("selection needs at least 2 labeled classes in the ground truth")
        values = labeled_values(cube, gt)
        return cls(values, quantize_matrix(values, levels), compact.astype(np.int64),
                   class_ids, levels)


def _argmax(scores: np.ndarray, candidates: np.ndarray) -> int:
    s = scores[candidates]
    best = s.max()
    return int(candidates[np.flatnonzero(s >= best - TIE_TOL)[0]])


class _Engine:
    def __init__(self, data: LabeledData, config: SelectorConfig):
        self.d = data
        self.cfg = config
        g = data.classes
        self.h_g = info._h(g)
        q = data.symbols
        self.h_b = np.array([info._h(q[i]) for i in range(data.bands)])
        self.h_bg = np.array([info._h(q[i], g) for i in range(data.bands)])
        raw = self.h_b + self.h_g - self.h_bg
        self.relevance = np.maximum(raw, 0.0)
        self.acc = np.zeros(data.bands)

    def _add_redundancy(self, s: int, remaining: np.ndarray) -> None:
        q, method = self.d.symbols, self.cfg.method
        for b in remaining:
            mi = max(0.0, self.h_b[b] + self.h_b[s] - info._h(q[b], q[s]))
            if method == "nmifs":
                h_min = min(self.h_b[b], self.h_b[s])
                mi = 0.0 if h_min <= 0.0 else min(1.0, mi / h_min)
            self.acc[b] += mi

    def _add_pair_relevance(self, s: int, remaining: np.ndarray) -> None:
        q, g = self.d.symbols, self.d.classes
        for b in remaining:
            h_bs = info._h(q[b], q[s])
            h_bsg = info._h(q[b], q[s], g)
            jmi = max(0.0, h_bs + self.h_g - h_bsg)
            if self.cfg.method == "disr":
                jmi = 0.0 if h_bsg <= 0.0 else jmi / h_bsg
            self.acc[b] += jmi

    def _interaction(self, est_q: np.ndarray, remaining: np.ndarray) -> np.ndarray:
        q, g = self.d.symbols, self.d.classes
        h_e = info._h(est_q)
        mi_e = h_e + self.h_g - info._h(est_q, g)
        out = np.zeros(self.d.bands)
        for b in remaining:
            pair = info._h(q[b], est_q) + self.h_g - info._h(q[b], est_q, g)
            mi_b = self.h_b[b] + self.h_g - self.h_bg[b]
            out[b] = pair - mi_b - mi_e
        return out

    def run(self) -> SelectionTrace:
        cfg, d = self.cfg, self.d
        if cfg.k > d.bands:
            raise ValueError(f"k={cfg.k} exceeds the number of bands ({d.bands})")
        trace = SelectionTrace(cfg.method)
        uses_est = cfg.method in ("mrms", "mibf")
        remaining = np.arange(d.bands)

        first = _argmax(self.relevance, remaining)
        trace.bands.append(first)
        trace.scores.append(float(self.relevance[first]))
        trace.relevance.append(float(self.relevance[first]))
        trace.interaction.append(None)
        remaining = remaining[remaining != first]
        est = d.values[first].copy() if uses_est else None

        while len(trace.bands) < cfg.k:
            last = trace.bands[-1]
            inter = None
            pick = None
            if cfg.method == "mim":
                scores = self.relevance
            elif cfg.method in ("mifs", "mrmr", "nmifs"):
                self._add_redundancy(last, remaining)
                if cfg.method == "mrmr":
                    scores = self.relevance - self.acc / len(trace.bands)
                else:
                    scores = self.relevance - cfg.beta * self.acc
            elif cfg.method in ("jmi", "disr"):
                self._add_pair_relevance(last, remaining)
                scores = self.acc
            else:
                est_q = quantize_values(est, cfg.levels).symbols
                inter = self._interaction(est_q, remaining)
                if cfg.method == "mrms":
                    scores = self.relevance + inter
                else:
                    accepted = remaining[inter[remaining] >= cfg.threshold]
                    scores = self.relevance
                    if accepted.size:
                        pick = _argmax(scores, accepted)
                    else:
                        log.info("mibf: every candidate rejected at step %d; taking best MI",
                                 len(trace.bands) + 1)
            if pick is None:
                pick = _argmax(scores, remaining)

            trace.bands.append(pick)
            trace.scores.append(float(scores[pick]))
            trace.relevance.append(float(self.relevance[pick]))
            trace.interaction.append(None if inter is None else float(inter[pick]))
            remaining = remaining[remaining != pick]
            if uses_est:
                est = (est + d.values[pick]) / 2.0
        return trace


def select_prepared(data: LabeledData, config: SelectorConfig) -> SelectionTrace:
    return _Engine(data, config).run()


def select(cube: HyperCube, gt: GroundTruth, config: SelectorConfig) -> SelectionTrace:
    """Run greedy selection of ``config.k`` bands with ``config.method``."""
    if config.k > cube.bands:
        raise ValueError(f"k={config.k} exceeds the number of bands ({cube.bands})")
    data = LabeledData.from_cube(cube, gt, config.levels)
    return select_prepared(data, config)
