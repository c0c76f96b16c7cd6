"""Select-then-classify runs shared by the CLI and the benchmark tests."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import metrics, svm
from .cube import GroundTruth, HyperCube, Split, labeled_values, stratified_split
from .datasets import RunReport
from .selectors import LabeledData, SelectionTrace, SelectorConfig, select_prepared

log = logging.getLogger(__name__)

GRID_C = (1.0, 10.0, 100.0, 1000.0)
# multiples of the default gamma
GRID_GAMMA_SCALE = (0.1, 1.0, 10.0)
GRID_FOLDS = 3


@dataclass
class Classification:
    split: Split
    model: svm.SvmModel
    confusion: np.ndarray
    metrics: dict
    predictions: np.ndarray   # one per labeled pixel, in gt.pixel_index() order


def classify_bands(cube: HyperCube, gt: GroundTruth, bands: Sequence[int], fraction: float,
                   seed: int, params: Optional[svm.SvmParams] = None,
                   grid: bool = False) -> Classification:
    """Train on a stratified split restricted to ``bands``; score the held-out pixels."""
    if not bands:
        raise ValueError("no bands to classify with")
    x = labeled_values(cube.subset(bands), gt).T
    y = gt.labeled()
    split = stratified_split(gt, fraction, seed)
    xtr, ytr = x[split.train_indices], y[split.train_indices]
    params = params or svm.SvmParams()
    if grid:
        lo, hi = xtr.min(axis=0), xtr.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        g0 = svm.default_gamma((xtr - lo) / span)
        params = svm.grid_search(xtr, ytr, GRID_C, [s * g0 for s in GRID_GAMMA_SCALE],
                                 GRID_FOLDS, seed, params.tol)
        log.info("grid search picked C=%g gamma=%g", params.c, params.gamma)
    model = svm.train(xtr, ytr, params)
    pred = svm.predict(model, x)
    n_classes = int(gt.classes.max())
    cm = metrics.confusion(pred[split.test_indices], y[split.test_indices], n_classes)
    return Classification(split, model, cm, metrics.summarize(cm), pred)


def run_cell(cube: HyperCube, gt: GroundTruth, trace: SelectionTrace, config: SelectorConfig,
             k: int, fraction: float, seed: int, dataset: str,
             params: Optional[svm.SvmParams] = None, grid: bool = False) -> tuple:
    """Classify with the first ``k`` bands of ``trace``; returns ``(RunReport, Classification)``."""
    t0 = time.perf_counter()
    bands = trace.prefix(k)
    result = classify_bands(cube, gt, bands, fraction, seed, params, grid)
    elapsed = (time.perf_counter() - t0) * 1000.0
    report_params = {
        "levels": config.levels,
        "beta": config.beta,
        "threshold": config.threshold,
        "svm_c": result.model.c,
        "svm_gamma": result.model.gamma,
        "grid_search": bool(grid),
        "bands_total": cube.bands,
    }
    report = RunReport(dataset, config.method, k, fraction, seed, report_params, bands,
                       result.metrics, elapsed)
    return report, result


def select_for(cube: HyperCube, gt: GroundTruth, config: SelectorConfig,
               data: Optional[LabeledData] = None) -> SelectionTrace:
    if config.k > cube.bands:
        raise ValueError(f"k={config.k} exceeds the number of bands ({cube.bands})")
    data = data or LabeledData.from_cube(cube, gt, config.levels)
    return select_prepared(data, config)
