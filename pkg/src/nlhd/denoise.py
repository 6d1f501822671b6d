"""Simplified non-local Haar denoising with a locally estimated noise level.

The noise level of a reference patch comes from the nearest-row distances of
its row matching. Each group is hard-thresholded in the Haar domain with a
threshold that grows with the local noise level and shrinks with the group
mean and with the spread of those distances.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .decompose import Aggregator
from .grouping import MatchParams, iter_groups
from .image import as_rgb


@dataclass(frozen=True)
class DenoiseParams:
    patch_side: int = 6
    step: int = 5
    search_radius: int = 13
    num_blocks: int = 16
    num_rows: int = 4
    k: float | str = "auto"
    eps: float = 1e-6
    passes: int = 2

    def __post_init__(self):
        if self.k != "auto" and not float(self.k) > 0:
            raise ValueError(f"k must be positive or 'auto', got {self.k!r}")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.passes < 1:
            raise ValueError("passes must be >= 1")
        self.match  # validates the matching fields

    @property
    def match(self):
        return MatchParams(self.patch_side, self.num_blocks, self.num_rows,
                           self.step, self.search_radius)


def estimate_sigma(min_dists):
    """Root mean square of the nearest-row distances (last axis)."""
    d = np.asarray(min_dists, dtype=np.float64)
    return np.sqrt(np.mean(d * d, axis=-1))


def estimate_sigma_d(min_dists):
    """Root of the summed squared deviations from the mean (no 1/n inside the root)."""
    d = np.asarray(min_dists, dtype=np.float64)
    # centre on the first sample first so equal distances give exactly 0
    shifted = d - d[..., :1]
    dev = shifted - shifted.mean(axis=-1, keepdims=True)
    return np.sqrt(np.sum(dev * dev, axis=-1))


def compute_threshold(sigma, sigma_d, group_mean, k, eps=1e-6):
    """``sigma / (group_mean * k * sigma_d)`` with both denominator factors floored at eps."""
    denom = np.maximum(group_mean, eps) * np.maximum(k * np.asarray(sigma_d), eps)
    return np.asarray(sigma, dtype=np.float64) / denom


def calibrate_k(group_means, sigma_ds, eps=1e-6):
    """Scale factor bringing the average ``k * sigma_d`` onto the average group mean."""
    return float(np.mean(group_means)) / max(float(np.mean(sigma_ds)), eps)


def hard_threshold(coeffs, thr):
    """Zero small coefficients of one spectrum or a stack of spectra.

    Non-DC coefficients with ``|c| < thr`` are dropped, then every row other
    than the first whose root-mean-square (measured on the input spectrum) is
    below ``thr`` is zeroed. The DC coefficient is never changed. ``thr`` is a
    scalar or broadcasts against the leading axes.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    t = np.asarray(thr, dtype=np.float64)[..., None, None]
    out = np.where(np.abs(c) < t, 0.0, c)
    row_rms = np.sqrt(np.mean(c * c, axis=-1, keepdims=True))
    weak = row_rms < t
    weak = weak & (np.arange(c.shape[-2])[:, None] > 0)
    out = np.where(weak, 0.0, out)
    out[..., 0, 0] = c[..., 0, 0]
    return out


def denoise_pass(img, params=DenoiseParams(), backend=None):
    """One matching + thresholding + aggregation sweep.

    With ``params.k == "auto"`` each channel gets ``k`` from
    :func:`calibrate_k` over all of its groups in this pass.
    """
    img = as_rgb(img)
    h, w, _ = img.shape
    flat = np.ascontiguousarray(img.transpose(2, 0, 1)).reshape(3, -1)

    # first sweep keeps only indices and per-group statistics
    chunks = []
    for groups in iter_groups(img, params.match, backend=backend):
        means = kernels.group_means(flat, groups.block_pixels(), groups.rows,
                                    backend=backend)                     # (P, 3, R)
        chunks.append((groups, means, estimate_sigma(groups.min_dist),
                       estimate_sigma_d(groups.min_dist)))              # sigmas: (P, 3)

    if params.k == "auto":
        k = np.array([
            calibrate_k(np.concatenate([m[:, c].ravel() for _, m, _, _ in chunks]),
                        np.concatenate([sd[:, c] for _, _, _, sd in chunks]), params.eps)
            for c in range(3)
        ])
    else:
        k = np.full(3, float(params.k))

    agg = Aggregator(h * w)
    for groups, means, sigma, sigma_d in chunks:
        bp = groups.block_pixels()
        thr = compute_threshold(sigma[..., None], sigma_d[..., None], means,
                                k[:, None], params.eps)
        acc, cnt = kernels.filter_groups(flat, bp, groups.rows, kernels.MODE_THRESHOLD,
                                         thr=thr, backend=backend)
        agg.add_blocks(bp, acc, cnt)
    return agg.result().reshape(3, h, w).transpose(1, 2, 0)


def denoise(img, params=DenoiseParams(), backend=None):
    """Run :func:`denoise_pass` ``params.passes`` times, each on the previous output."""
    out = as_rgb(img)
    for _ in range(params.passes):
        out = denoise_pass(out, params, backend=backend)
    return out
