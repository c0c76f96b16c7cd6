"""Hyperspectral cube, ground truth and the per-pixel views used by selection.

Everything downstream works on *labeled* pixels only: label 0 marks
background and never enters a histogram, a split or an estimate.  Labeled
pixels are kept in row-major order of the spatial grid, and that ordering
is shared by every quantized band derived from the same cube/GT pair.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

DEFAULT_LEVELS = 256
# relative guard on the bin width; keeps the max value inside the top bin
RANGE_EPS = 1e-12


@dataclass(frozen=True)
class HyperCube:
    """Reflectance cube indexed ``(row, col, band)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3:
            raise ValueError(f"cube must be 3-D (rows, cols, bands), got shape {v.shape}")
        if min(v.shape) < 1:
            raise ValueError(f"cube dimensions must be >= 1, got {v.shape}")
        if v.dtype.kind == "f" and not np.all(np.isfinite(v)):
            raise ValueError("cube contains NaN or Inf values")
        if v.dtype.kind not in "fiu":
            raise ValueError(f"unsupported cube dtype {v.dtype}")
        v = v.view()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]

    def band(self, index: int) -> np.ndarray:
        if not 0 <= index < self.bands:
            raise IndexError(f"band index {index} out of range [0, {self.bands})")
        return self.values[:, :, index]

    def subset(self, band_indices: Sequence[int]) -> "HyperCube":
        return HyperCube(np.ascontiguousarray(self.values[:, :, list(band_indices)]))


@dataclass(frozen=True)
class GroundTruth:
    """Per-pixel class ids; 0 is unlabeled background."""

    labels: np.ndarray
    class_names: Optional[tuple] = None

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError(f"ground truth must be 2-D, got shape {lab.shape}")
        if lab.dtype.kind not in "iu":
            if lab.dtype.kind == "f" and np.all(lab == np.round(lab)):
                lab = lab.astype(np.int64)
            else:
                raise ValueError("ground truth labels must be integers")
        if lab.size and lab.min() < 0:
            raise ValueError("ground truth labels must be non-negative")
        lab = lab.astype(np.int64, copy=False).view()
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def rows(self) -> int:
        return self.labels.shape[0]

    @property
    def cols(self) -> int:
        return self.labels.shape[1]

    @property
    def classes(self) -> np.ndarray:
        """Sorted nonzero class ids present in the raster."""
        u = np.unique(self.labels)
        return u[u > 0]

    def pixel_index(self) -> np.ndarray:
        """Row-major flat indices of labeled pixels."""
        return np.flatnonzero(self.labels.ravel() > 0)

    def labeled(self) -> np.ndarray:
        """Class ids of labeled pixels, in ``pixel_index`` order."""
        return self.labels.ravel()[self.pixel_index()]

    def check_matches(self, cube: HyperCube) -> None:
        if (self.rows, self.cols) != (cube.rows, cube.cols):
            raise ValueError(
                f"ground truth is {self.rows}x{self.cols} but cube is {cube.rows}x{cube.cols}"
            )


@dataclass(frozen=True)
class QuantizedBand:
    levels: int
    symbols: np.ndarray
    source_min: float
    source_max: float


@dataclass
class EstimateBand:
    """Running average of the selected bands over labeled pixels.

    ``weights`` keeps the exact mixing weight of every band that went into
    the average, so convexity can be checked without floating point noise.
    """

    values: np.ndarray
    pixel_index: np.ndarray
    weights: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Split:
    train_indices: np.ndarray
    test_indices: np.ndarray
    fraction: float
    seed: int


def derive_rng(seed: int, purpose: str) -> np.random.Generator:
    """Independent generator for one purpose (``"split"``, ``"cv"`` ...) under a run seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF,
                                                         zlib.crc32(purpose.encode())]))


def quantize_values(values, levels: int) -> QuantizedBand:
    """Uniform min-max binning of a 1-D sample into ``levels`` half-open bins."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot quantize an empty sample (no labeled pixels)")
    lo = float(v.min())
    hi = float(v.max())
    span = hi - lo
    if span <= 0.0:
        symbols = np.zeros(v.shape, dtype=np.int64)
    else:
        symbols = np.floor((v - lo) * levels / (span * (1.0 + RANGE_EPS))).astype(np.int64)
        np.clip(symbols, 0, levels - 1, out=symbols)
    return QuantizedBand(levels, symbols, lo, hi)


def quantize_matrix(values: np.ndarray, levels: int) -> np.ndarray:
    """Row-wise ``quantize_values`` for a (bands, pixels) array."""
    v = np.asarray(values, dtype=np.float64)
    lo = v.min(axis=1, keepdims=True)
    span = v.max(axis=1, keepdims=True) - lo
    safe = np.where(span > 0, span, 1.0) * (1.0 + RANGE_EPS)
    symbols = np.floor((v - lo) * levels / safe).astype(np.int64)
    np.clip(symbols, 0, levels - 1, out=symbols)
    symbols[(span <= 0).ravel()] = 0
    return symbols


def labeled_values(cube: HyperCube, gt: GroundTruth) -> np.ndarray:
    """(bands, n_labeled) float array of reflectances at labeled pixels."""
    gt.check_matches(cube)
    idx = gt.pixel_index()
    flat = cube.values.reshape(-1, cube.bands)
    return np.ascontiguousarray(flat[idx].T, dtype=np.float64)


def quantize_band(cube: HyperCube, gt: GroundTruth, band_index: int,
                  levels: int = DEFAULT_LEVELS) -> QuantizedBand:
    gt.check_matches(cube)
    band = cube.band(band_index)
    idx = gt.pixel_index()
    if idx.size == 0:
        raise ValueError("ground truth has no labeled pixels")
    return quantize_values(band.ravel()[idx], levels)


def quantize_estimate(est: EstimateBand, levels: int = DEFAULT_LEVELS) -> QuantizedBand:
    return quantize_values(est.values, levels)


def init_estimate(cube: HyperCube, gt: GroundTruth, band_index: int) -> EstimateBand:
    """Estimate seeded with the first selected band."""
    gt.check_matches(cube)
    idx = gt.pixel_index()
    values = cube.band(band_index).ravel()[idx].astype(np.float64)
    return EstimateBand(values, idx, {band_index: Fraction(1)})


def update_estimate(est: EstimateBand, cube: HyperCube, band_index: int) -> EstimateBand:
    """Average the estimate with a newly selected band: ``(est + band) / 2``."""
    if est.pixel_index.size and est.pixel_index.max() >= cube.rows * cube.cols:
        raise ValueError("estimate pixel index does not fit the cube")
    band = cube.band(band_index).ravel()[est.pixel_index].astype(np.float64)
    if band.shape != est.values.shape:
        raise ValueError("estimate and band differ in size")
    weights = {b: w / 2 for b, w in est.weights.items()}
    weights[band_index] = weights.get(band_index, Fraction(0)) + Fraction(1, 2)
    return EstimateBand((est.values + band) / 2.0, est.pixel_index, weights)


def estimate_weights(order: Sequence[int]) -> list:
    """Exact weight of each step's band after averaging them in ``order``.

    The first band starts with weight 1 and every later step halves all
    previous weights, so after n steps the weights are
    ``2^-(n-1), 2^-(n-1), 2^-(n-2), ..., 1/2``.
    """
    weights: list = []
    for step, _ in enumerate(order):
        if step == 0:
            weights = [Fraction(1)]
        else:
            weights = [w / 2 for w in weights] + [Fraction(1, 2)]
    return weights


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(gt: GroundTruth, fraction: float, seed: int) -> Split:
    """Per-class random train/test split over labeled pixels.

    Indices refer to positions in ``gt.pixel_index()`` order.  Each class
    contributes ``max(1, round(fraction * n_c))`` training pixels, capped at
    ``n_c - 1`` so that every class keeps at least one test pixel.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"training fraction must be in (0, 1), got {fraction}")
    labels = gt.labeled()
    rng = derive_rng(seed, "split")
    train, test = [], []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        n = members.size
        if n < 2:
            raise ValueError(f"class {int(c)} has {n} labeled pixel(s); need >= 2 to stratify")
        n_train = min(n - 1, max(1, _round_half_up(fraction * n)))
        perm = rng.permutation(members)
        train.append(np.sort(perm[:n_train]))
        test.append(np.sort(perm[n_train:]))
    return Split(np.sort(np.concatenate(train)), np.sort(np.concatenate(test)),
                 float(fraction), int(seed))
