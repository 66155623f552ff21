"""Per-channel pixel-value histograms, the pipeline's distribution-shift gauge.

Used three ways: as the editor's "did this key actually move the data"
diagnostic, as the fitting statistic of the surrogate-transform attack,
and in lock reports.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .core import Image


def pixel_histograms(images: Iterable[Image], bins: int = 32) -> np.ndarray:
    """Normalized (channels, bins) histogram over all pixels of all images."""
    arrays = [im.array for im in images]
    if not arrays:
        raise ValueError("need at least one image")
    channels = arrays[0].shape[2]
    edges = np.linspace(0.0, 1.0, bins + 1)
    out = np.zeros((channels, bins), dtype=np.float64)
    for arr in arrays:
        for c in range(channels):
            counts, _ = np.histogram(arr[:, :, c], bins=edges)
            out[c] += counts
    totals = out.sum(axis=1, keepdims=True)
    return out / np.maximum(totals, 1.0)


def histogram_l1(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-channel L1 distance between two normalized histogram stacks."""
    if a.shape != b.shape:
        raise ValueError(f"histogram shape mismatch: {a.shape} vs {b.shape}")
    return np.abs(a - b).sum(axis=1)


def histogram_shift(clean: Sequence[Image], edited: Sequence[Image],
                    bins: int = 32) -> np.ndarray:
    return histogram_l1(pixel_histograms(clean, bins), pixel_histograms(edited, bins))
