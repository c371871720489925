"""Scalar and mask evaluation metrics: MAE, MRE, IoU, image MSE, histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError


@dataclass(frozen=True)
class ScalarPair:
    truth: float
    prediction: float

    def __post_init__(self):
        if not (np.isfinite(self.truth) and np.isfinite(self.prediction)):
            raise ParameterError("scalar pairs must be finite")


@dataclass
class MaskPair:
    truth: np.ndarray
    prediction: np.ndarray
    binarize_threshold: float = 0.5

    def __post_init__(self):
        if self.truth.shape != self.prediction.shape:
            raise ShapeError(
                f"mask shapes differ: {self.truth.shape} vs {self.prediction.shape}")


def mae_mre(pairs: list[ScalarPair]) -> tuple[float, float]:
    """Mean absolute error and mean relative error over the pairs."""
    if not pairs:
        raise ParameterError("mae_mre needs at least one pair")
    y = np.array([p.truth for p in pairs])
    yh = np.array([p.prediction for p in pairs])
    if np.any(y == 0.0):
        raise ParameterError("MRE undefined: a truth value is zero")
    err = np.abs(y - yh)
    return float(err.mean()), float((err / np.abs(y)).mean())


def iou(m: MaskPair) -> float:
    """Intersection over union of the binarized masks (1.0 when both empty)."""
    a = m.truth >= m.binarize_threshold
    b = m.prediction >= m.binarize_threshold
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def mse_image(m: MaskPair) -> float:
    """Pixel-mean squared error between the (non-binarized) maps."""
    diff = np.asarray(m.truth, dtype=np.float64) - np.asarray(m.prediction, dtype=np.float64)
    return float(np.mean(diff**2))


def histogram(values, edges) -> np.ndarray:
    """Counts per half-open bin [e_i, e_{i+1}); values outside all bins
    (including values equal to the last edge) are dropped."""
    edges = np.asarray(edges, dtype=np.float64)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ParameterError("histogram edges must be strictly increasing")
    values = np.asarray(list(values), dtype=np.float64)
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    if len(values):
        idx = np.searchsorted(edges, values, side="right") - 1
        ok = (idx >= 0) & (idx < len(counts)) & (values < edges[-1])
        np.add.at(counts, idx[ok], 1)
    return counts
