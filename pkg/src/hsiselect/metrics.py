"""Confusion-matrix accuracy measures and classification-map rendering."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .cube import GroundTruth

# index 0 is the background; classes 1..16 cycle through the rest
PALETTE = np.array([
    (0, 0, 0),
    (255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 0),
    (0, 255, 255), (255, 0, 255), (192, 192, 192), (128, 128, 128),
    (128, 0, 0), (128, 128, 0), (0, 128, 0), (128, 0, 128),
    (0, 128, 128), (0, 0, 128), (255, 165, 0), (139, 69, 19),
], dtype=np.uint8)


def confusion(pred, truth, n_classes: Optional[int] = None) -> np.ndarray:
    """C x C counts, rows = true class, columns = predicted class, ids 1..C."""
    p = np.asarray(pred).ravel().astype(np.int64)
    t = np.asarray(truth).ravel().astype(np.int64)
    if p.size != t.size:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} labels")
    if p.size and (p.min() < 1 or t.min() < 1):
        raise ValueError("labels must be >= 1; filter out unlabeled (0) pixels first")
    c = n_classes if n_classes is not None else int(max(p.max(initial=0), t.max(initial=0)))
    if p.size and max(p.max(), t.max()) > c:
        raise ValueError(f"label exceeds n_classes={c}")
    cm = np.zeros((c, c), dtype=np.int64)
    np.add.at(cm, (t - 1, p - 1), 1)
    return cm


def _check(cm) -> np.ndarray:
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {cm.shape}")
    if cm.sum() <= 0:
        raise ValueError("confusion matrix is empty")
    return cm.astype(np.float64)


def overall_accuracy(cm) -> float:
    cm = _check(cm)
    return float(np.trace(cm) / cm.sum())


def per_class_accuracy(cm) -> np.ndarray:
    """Recall per class; NaN for classes with no test pixels."""
    cm = _check(cm)
    support = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(support > 0, np.diag(cm) / support, np.nan)


def average_accuracy(cm) -> float:
    return float(np.nanmean(per_class_accuracy(cm)))


def kappa(cm) -> float:
    """Cohen's kappa ``(p_o - p_e) / (1 - p_e)``."""
    cm = _check(cm)
    total = cm.sum()
    p_o = np.trace(cm) / total
    p_e = float(np.sum(cm.sum(axis=1) * cm.sum(axis=0))) / total ** 2
    if p_e >= 1.0:
        # only when every pixel sits in one diagonal cell, i.e. perfect agreement
        return 1.0
    return float((p_o - p_e) / (1.0 - p_e))


def specificity(cm) -> float:
    """Macro-average one-vs-rest ``TN / (TN + FP)``; classes with TN + FP = 0 are skipped."""
    cm = _check(cm)
    total = cm.sum()
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    tn = total - tp - fp - fn
    denom = tn + fp
    ok = denom > 0
    return float(np.mean(tn[ok] / denom[ok]))


def summarize(cm) -> dict:
    ica = per_class_accuracy(cm)
    return {
        "oa": overall_accuracy(cm),
        "aa": average_accuracy(cm),
        "kappa": kappa(cm),
        "specificity": specificity(cm),
        "ica": [None if np.isnan(v) else float(v) for v in ica],
    }


# --------------------------------------------------------------------------
# maps
# --------------------------------------------------------------------------

def label_raster(predictions, gt: GroundTruth) -> np.ndarray:
    """Scatter per-labeled-pixel predictions back onto the grid; background stays 0."""
    p = np.asarray(predictions).ravel()
    idx = gt.pixel_index()
    if p.size != idx.size:
        raise ValueError(f"{p.size} predictions for {idx.size} labeled pixels")
    out = np.zeros(gt.rows * gt.cols, dtype=np.int64)
    out[idx] = p
    return out.reshape(gt.rows, gt.cols)


def colorize(raster: np.ndarray) -> np.ndarray:
    r = np.asarray(raster, dtype=np.int64)
    colors = np.where(r > 0, (r - 1) % (len(PALETTE) - 1) + 1, 0)
    return PALETTE[colors]


def ppm_bytes(rgb: np.ndarray) -> bytes:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    return b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes()


def render_map(predictions, gt: GroundTruth, rows: Optional[int] = None,
               cols: Optional[int] = None) -> bytes:
    """Binary PPM (P6) of predicted classes at labeled pixels, black elsewhere."""
    if (rows, cols) != (None, None) and (rows, cols) != (gt.rows, gt.cols):
        raise ValueError(f"map is {rows}x{cols} but ground truth is {gt.rows}x{gt.cols}")
    return ppm_bytes(colorize(label_raster(predictions, gt)))


def render_ground_truth(gt: GroundTruth) -> bytes:
    return ppm_bytes(colorize(gt.labels))
