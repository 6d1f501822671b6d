"""Adaptive illumination brightening and Retinex recomposition."""
import math
from dataclasses import dataclass

import numpy as np

from .image import as_rgb, hsv_to_rgb, rgb_to_hsv


@dataclass(frozen=True)
class EnhanceParams:
    alpha1: float = 0.35
    alpha2: float = 0.005
    alpha3: float = 0.05
    beta1: float = 0.45
    beta2: float = 0.61
    theta: float = 0.9
    theta1: float = 0.05
    theta2: float = 0.15
    step: float = 0.15
    mean_stop: float = 0.6
    min_stop: float = 0.1
    k_scale: float = 30.0

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha3", "theta", "theta1", "theta2",
                     "mean_stop", "min_stop"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name}={v} outside (0, 1]")
        if self.step < 0 or self.k_scale < 0:
            raise ValueError("step and k_scale must be non-negative")


BRANCHES = ("min", "exp", "log")


def count_ratio(plane, t):
    """Fraction of the non-zero pixels whose value is below ``t`` (0 for an all-zero plane)."""
    plane = np.asarray(plane)
    nonzero = plane != 0
    total = np.count_nonzero(nonzero)
    if total == 0:
        return 0.0
    return np.count_nonzero(nonzero & (plane < t)) / total


def compute_gamma1(illum, params=EnhanceParams()):
    return min(count_ratio(illum, params.alpha1), params.beta1)


def compute_gamma2(illum, params=EnhanceParams()):
    illum = np.asarray(illum)
    below2 = np.count_nonzero(illum < params.theta2)
    guard = np.count_nonzero(illum < params.theta1) / below2 if below2 else 0.0
    alpha = params.alpha2 if guard > params.theta else params.alpha3
    return min(count_ratio(illum, alpha), params.beta2)


def exp_enhance(illum, gamma1):
    """``illum ** gamma1``; where ``gamma1 == 0`` the plane is left unchanged.

    ``gamma1`` may be a scalar or an array broadcasting against ``illum``.
    """
    illum = np.maximum(np.asarray(illum, dtype=np.float64), 0.0)
    g = np.asarray(gamma1, dtype=np.float64)
    if np.any(g < 0):
        raise ValueError("gamma1 must be non-negative")
    # no pixel fell below alpha1; a literal x**0 would flatten the plane to 1
    return np.where(g == 0, illum, illum ** np.where(g == 0, 1.0, g))


def log_enhance(illum, gamma2):
    """``log2(1 + illum) / gamma2 + illum``; ``+inf`` where ``gamma2 == 0``."""
    illum = np.asarray(illum, dtype=np.float64)
    g = np.asarray(gamma2, dtype=np.float64)
    if np.any(g < 0):
        raise ValueError("gamma2 must be non-negative")
    return np.where(g == 0, np.inf, np.log2(1.0 + illum) / np.where(g == 0, 1.0, g) + illum)


def min_fuse(a, b):
    return np.minimum(a, b)


def _brighten(illum, gamma1, gamma2, branch):
    if branch == "exp":
        return exp_enhance(illum, gamma1)
    if branch == "log":
        return log_enhance(illum, gamma2)
    return min_fuse(exp_enhance(illum, gamma1), log_enhance(illum, gamma2))


def iteration_limit(image_mean, params=EnhanceParams()):
    """``max(1, round((1 - mean) * k_scale))`` with halves rounded up."""
    return max(1, math.floor((1.0 - image_mean) * params.k_scale + 0.5))


def enhance_illumination(illum0, image_mean, params=EnhanceParams(), branch="min",
                         return_iterations=False):
    """Iteratively brighten the illumination plane.

    Both exponents are fixed from ``illum0``. Each iteration brightens the
    current iterate; the candidate is accepted once its mean exceeds
    ``mean_stop`` or its minimum exceeds ``min_stop``, otherwise the iterate
    grows by ``step * illum0``. After the iteration limit the last candidate
    is returned.
    """
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")
    illum0 = np.asarray(illum0, dtype=np.float64)
    gamma1 = compute_gamma1(illum0, params)
    gamma2 = compute_gamma2(illum0, params)
    limit = iteration_limit(image_mean, params)

    current = illum0
    for k in range(limit):
        candidate = _brighten(current, gamma1, gamma2, branch)
        if candidate.mean() > params.mean_stop or candidate.min() > params.min_stop:
            break
        current = current + params.step * illum0
    if return_iterations:
        return candidate, k + 1
    return candidate


def enhance_reflectance(refl):
    return 1.0 + np.asarray(refl, dtype=np.float64)


def compose(illum_e, refl_e, original):
    """Multiply the components, clamp to [0, 1] and use the result as HSV value."""
    original = as_rgb(original)
    value = np.clip(np.asarray(illum_e) * np.asarray(refl_e), 0.0, 1.0)
    value = np.broadcast_to(value, original.shape[:2])
    h, s, _ = rgb_to_hsv(original)
    return hsv_to_rgb(h, s, value)
