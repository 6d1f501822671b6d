"""Full-reference and lightness-order quality metrics."""
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image import as_rgb, rgb_to_lab
from .kernels import order_mismatch_count

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class MetricReport:
    psnr: float = math.nan
    ssim: float = math.nan
    delta_e: float = math.nan
    loe: float = math.nan

    def as_row(self):
        return [self.psnr, self.ssim, self.delta_e, self.loe]


def _pair(a, b):
    a, b = as_rgb(a), as_rgb(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b):
    """PSNR in dB for [0, 1] data, MSE pooled over all channels; ``inf`` if identical."""
    a, b = _pair(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(1.0 / mse))


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x, g):
    rows = sliding_window_view(x, g.size, axis=1) @ g
    return sliding_window_view(rows, g.size, axis=0) @ g


def ssim(a, b):
    """Single-scale SSIM on Rec.601 luma, Gaussian-weighted, mean over the valid region."""
    a, b = _pair(a, b)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    x = a @ LUMA_WEIGHTS
    y = b @ LUMA_WEIGHTS
    g = _gaussian_window()
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def delta_e(a, b):
    """Mean CIE76 colour difference."""
    a, b = _pair(a, b)
    la = np.stack(rgb_to_lab(a), axis=-1)
    lb = np.stack(rgb_to_lab(b), axis=-1)
    return float(np.mean(np.sqrt(np.sum((la - lb) ** 2, axis=-1))))


def loe_from_lightness(light, light_e, backend=None):
    """Mismatched ``>=`` orderings over all ordered pixel pairs, divided by the pixel count."""
    light = np.asarray(light, dtype=np.float64)
    light_e = np.asarray(light_e, dtype=np.float64)
    if light.shape != light_e.shape:
        raise ValueError("lightness maps differ in shape")
    return order_mismatch_count(light, light_e, backend=backend) / light.size


def downsample_nearest(plane, max_side):
    """Keep every f-th pixel so the longer side is at most ``max_side``."""
    f = max(1, math.ceil(max(plane.shape) / max_side))
    return plane[::f, ::f]


def loe(original, enhanced, max_side=100, backend=None):
    """Lightness order error with lightness = max(R, G, B)."""
    original, enhanced = _pair(original, enhanced)
    light = downsample_nearest(original.max(axis=-1), max_side)
    light_e = downsample_nearest(enhanced.max(axis=-1), max_side)
    return loe_from_lightness(light, light_e, backend=backend)


def evaluate(enhanced, reference=None, original=None, loe_max_side=100):
    """Metrics available for the given inputs; missing ones stay NaN."""
    kw = {}
    if reference is not None:
        kw.update(psnr=psnr(enhanced, reference), ssim=ssim(enhanced, reference),
                  delta_e=delta_e(enhanced, reference))
    if original is not None:
        kw["loe"] = loe(original, enhanced, max_side=loe_max_side)
    return MetricReport(**kw)
