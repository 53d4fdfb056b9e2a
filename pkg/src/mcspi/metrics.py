"""Image quality metrics for reconstruction results."""

from __future__ import annotations

import math

import numpy as np


def minmax_normalize(image: np.ndarray) -> np.ndarray:
    """Affine map of [min, max] onto [0, 1]; constant images map to zeros.

    Reconstructions carry an arbitrary positive scale, so metrics only
    make sense after both images are brought to this common range.
    """
    img = np.asarray(image, dtype=np.float64)
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(a: np.ndarray, b: np.ndarray, peakval: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    if peakval <= 0:
        raise ValueError("peakval must be positive")
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peakval * peakval / err)


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("images must have the same size")
    return float(np.corrcoef(a, b)[0, 1])


def normalized_metrics(image: np.ndarray, reference: np.ndarray) -> dict:
    """MSE/PSNR after min-max normalizing both images (peakval 1)."""
    a = minmax_normalize(image)
    b = minmax_normalize(reference)
    err = mse(a, b)
    return {"mse": err, "psnr": psnr(a, b, 1.0), "pearson": pearson(a, b)}
