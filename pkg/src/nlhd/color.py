"""Colour-cast measurement and non-local saturation reduction."""
from dataclasses import dataclass

import numpy as np

from .decompose import Aggregator
from .image import as_rgb, hsv_to_rgb, rgb_to_hsv, rgb_to_lab

_POSITIONS_PER_CHUNK = 4096


@dataclass(frozen=True)
class ColorCorrectParams:
    k: float = 0.013
    alpha: float = 4.5
    eps: float = 1e-6

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")


@dataclass(frozen=True)
class DeviationStats:
    mean_a: float
    mean_b: float

    @property
    def magnitude(self):
        return float(np.hypot(self.mean_a, self.mean_b))


def compute_color_deviation(img):
    """Mean Lab a/b offsets of the whole image; ``.magnitude`` is the cast strength."""
    _, a, b = rgb_to_lab(img)
    return DeviationStats(float(a.mean()), float(b.mean()))


def compute_saturation_gamma(deviation, m_r, m_g, m_b, params=ColorCorrectParams()):
    """Saturation exponent for groups with per-channel means ``m_r, m_g, m_b``.

    Works elementwise on arrays of group means. Smaller (darker) and more
    uniform channel means give a larger exponent, capped at ``alpha``.
    """
    means = np.stack(np.broadcast_arrays(
        np.asarray(m_r, dtype=np.float64), np.asarray(m_g, dtype=np.float64),
        np.asarray(m_b, dtype=np.float64)))
    spread = means.min(axis=0) + means.std(axis=0)
    return np.minimum(1.0 + params.k * deviation / (spread + params.eps), params.alpha)


def correct_saturation(img, deviation, provenance, params=ColorCorrectParams()):
    """Raise every saturation group to its own exponent and re-aggregate.

    ``provenance`` is the :class:`~nlhd.grouping.GroupProvenance` recorded by
    the illumination pass of the decomposition; its groups index the S plane.
    """
    img = as_rgb(img)
    if provenance is None:
        raise ValueError("saturation correction needs the illumination-pass groups")
    h, w, _ = img.shape
    if provenance.width != w:
        raise ValueError("group provenance was recorded on an image of another width")
    hue, sat, val = rgb_to_hsv(img)
    rgb = img.reshape(-1, 3)
    sat_flat = sat.ravel()
    acc = Aggregator(h * w, n_channels=1)
    for start in range(0, len(provenance), _POSITIONS_PER_CHUNK):
        pix = provenance.pixels(start, start + _POSITIONS_PER_CHUNK)   # (P, R, N3, N2)
        if pix.max() >= h * w:
            raise ValueError("group provenance does not fit this image")
        means = [rgb[pix, c].mean(axis=(-1, -2)) for c in range(3)]
        gamma = compute_saturation_gamma(deviation, *means, params=params)
        acc.add(0, pix, sat_flat[pix] ** gamma[..., None, None])
    new_sat = acc.result()[0].reshape(h, w)
    return hsv_to_rgb(hue, new_sat, val)
