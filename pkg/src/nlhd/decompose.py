"""Illumination / reflectance decomposition over the whole image.

Every reference position yields one similar pixel group per block-matrix row
and channel. Each group is Haar transformed, reconstructed from its DC
coefficient (illumination) or from the remaining coefficients (reflectance),
and written back to its source pixels. Overlapping estimates are averaged
with unit weights.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grouping import ILLUMINATION, REFLECTANCE, GroupProvenance, iter_groups
from .image import as_rgb

_MODES = {"low": kernels.MODE_LOW, "high": kernels.MODE_HIGH}


class Aggregator:
    """Per-channel value and count accumulators over flat pixel indices."""

    def __init__(self, n_pixels, n_channels=3):
        self.value = np.zeros((n_channels, n_pixels))
        self.weight = np.zeros((n_channels, n_pixels))

    def add(self, channel, pixels, values):
        n = self.value.shape[1]
        pixels = pixels.ravel()
        self.value[channel] += np.bincount(pixels, weights=values.ravel(), minlength=n)
        self.weight[channel] += np.bincount(pixels, minlength=n)

    def add_blocks(self, block_pix, acc, cnt):
        """Merge per-position accumulators from :func:`kernels.filter_groups`.

        ``block_pix`` is ``(P, R, N2)``, ``acc`` ``(P, C, R, N2)`` and
        ``cnt`` ``(P, C, R)``.
        """
        n = self.value.shape[1]
        pixels = block_pix.ravel()
        for c in range(self.value.shape[0]):
            self.value[c] += np.bincount(pixels, weights=acc[:, c].ravel(), minlength=n)
            weight = np.broadcast_to(cnt[:, c, :, None], block_pix.shape)
            self.weight[c] += np.bincount(pixels, weights=weight.ravel(), minlength=n)

    def result(self):
        if np.any(self.weight <= 0):
            raise RuntimeError("aggregation left pixels without any estimate")
        return self.value / self.weight


def decompose_pass(img, params, mode, backend=None, provenance=None):
    """Low- or high-frequency reconstruction of each channel, shape ``(H, W, 3)``.

    ``provenance``, when a list, receives the :class:`GroupIndex` chunks so the
    caller can reuse the matching.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be 'low' or 'high', got {mode!r}")
    img = as_rgb(img)
    h, w, _ = img.shape
    flat = np.ascontiguousarray(img.transpose(2, 0, 1)).reshape(3, -1)
    agg = Aggregator(h * w)
    for groups in iter_groups(img, params, backend=backend):
        bp = groups.block_pixels()
        acc, cnt = kernels.filter_groups(flat, bp, groups.rows, _MODES[mode], backend=backend)
        agg.add_blocks(bp, acc, cnt)
        if provenance is not None:
            provenance.append(groups)
    return agg.result().reshape(3, h, w).transpose(1, 2, 0)


def fuse_illumination(l_r, l_g, l_b):
    return np.maximum(np.maximum(l_r, l_g), l_b)


def fuse_reflectance(r_r, r_g, r_b, abs_all=False):
    """Pixelwise ``min(r_r, |r_g|, |r_b|)``; ``abs_all`` also takes ``|r_r|``."""
    first = np.abs(r_r) if abs_all else np.asarray(r_r)
    return np.minimum(np.minimum(first, np.abs(r_g)), np.abs(r_b))


@dataclass
class DecompositionResult:
    illumination_channels: np.ndarray  # (H, W, 3)
    reflectance_channels: np.ndarray   # (H, W, 3)
    illumination: np.ndarray           # (H, W)
    reflectance: np.ndarray            # (H, W)
    provenance: GroupProvenance | None = None


def decompose(img, illum_params=ILLUMINATION, refl_params=REFLECTANCE,
              abs_all_reflectance=False, keep_provenance=False, backend=None):
    """Run both passes and fuse the channels.

    With ``keep_provenance`` the illumination-pass groups of the matching
    channel are kept on the result for later colour correction.
    """
    chunks = [] if keep_provenance else None
    low = decompose_pass(img, illum_params, "low", backend=backend, provenance=chunks)
    high = decompose_pass(img, refl_params, "high", backend=backend)
    return DecompositionResult(
        illumination_channels=low,
        reflectance_channels=high,
        illumination=fuse_illumination(low[..., 0], low[..., 1], low[..., 2]),
        reflectance=fuse_reflectance(high[..., 0], high[..., 1], high[..., 2],
                                     abs_all=abs_all_reflectance),
        provenance=GroupProvenance.from_chunks(chunks) if keep_provenance else None,
    )


def reflectance_for_display(plane):
    """Shift a reflectance plane into the visible range: ``clip(v + 0.5, 0, 1)``."""
    return np.clip(np.asarray(plane) + 0.5, 0.0, 1.0)
