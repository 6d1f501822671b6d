"""Image buffers, colour conversions and file I/O.

Images are plain float64 numpy arrays: an RGB image is ``(H, W, 3)``, a single
plane is ``(H, W)``. Samples live nominally in [0, 1]; intermediate planes
(reflectance, for instance) may leave that range.
"""
from pathlib import Path

import cv2
import numpy as np

SUPPORTED_SUFFIXES = (".png", ".jpg", ".jpeg")


class ImageError(ValueError):
    """Raised for images that cannot be decoded or have an unusable shape."""


def as_rgb(img):
    """Validate and return *img* as a float64 ``(H, W, 3)`` array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageError("image has a zero dimension")
    return arr


def as_plane(plane):
    arr = np.asarray(plane, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageError(f"expected a non-empty (H, W) plane, got shape {arr.shape}")
    return arr


def load_image(path):
    """Read an 8/16-bit PNG or JPEG into an RGB float image in [0, 1].

    Samples are divided by the container maximum (255 or 65535). Alpha is
    dropped and greyscale files are replicated into three channels.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image: {path}")
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise ImageError(f"unsupported image format: {path.suffix or path.name}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageError(f"could not decode {path}")
    if raw.size == 0:
        raise ImageError(f"zero-dimension image: {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageError(f"unsupported sample type {raw.dtype} in {path}")

    if raw.ndim == 2:
        raw = np.repeat(raw[:, :, None], 3, axis=2)
    elif raw.shape[2] == 4:
        raw = cv2.cvtColor(raw, cv2.COLOR_BGRA2RGB)
    elif raw.shape[2] == 3:
        raw = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    else:
        raise ImageError(f"unsupported channel count {raw.shape[2]} in {path}")
    return raw.astype(np.float64) / scale


def quantize(img):
    """Clamp to [0, 1] and map to bytes with round-half-up."""
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_image(img, path):
    """Write *img* (RGB or a single plane) as an 8-bit PNG."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    arr = as_rgb(arr)
    data = cv2.cvtColor(quantize(arr), cv2.COLOR_RGB2BGR)
    ok, buf = cv2.imencode(".png", data)
    if not ok:  # pragma: no cover - encoder failure on valid uint8 data
        raise ImageError(f"PNG encoding failed for {path}")
    Path(path).write_bytes(buf.tobytes())


# --------------------------------------------------------------------------
# HSV (hexcone model, H in degrees)
# --------------------------------------------------------------------------

def rgb_to_hsv(img):
    """Return the H (degrees, [0, 360)), S and V planes of an RGB image."""
    img = as_rgb(img)
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    v = img.max(axis=-1)
    delta = v - img.min(axis=-1)
    s = np.divide(delta, v, out=np.zeros_like(v), where=v > 0)

    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(
        v == r,
        ((g - b) / safe) % 6.0,
        np.where(v == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(delta > 0, h * 60.0, 0.0) % 360.0
    return h, s, v


def hsv_to_rgb(h, s, v):
    h = np.asarray(h, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    hp = (h % 360.0) / 60.0
    c = v * s
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    m = v - c
    sector = np.floor(hp).astype(np.int64) % 6
    zero = np.zeros_like(c)
    r = np.choose(sector, [c, x, zero, zero, x, c])
    g = np.choose(sector, [x, c, c, x, zero, zero])
    b = np.choose(sector, [zero, zero, x, c, c, x])
    return np.stack([r + m, g + m, b + m], axis=-1)


# --------------------------------------------------------------------------
# CIE L*a*b* (sRGB primaries, D65 white)
# --------------------------------------------------------------------------

_SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
# white taken as the image of RGB (1, 1, 1) so neutral greys land on a = b = 0
_WHITE_XYZ = _SRGB_TO_XYZ.sum(axis=1)
_EPS = (6.0 / 29.0) ** 3


def srgb_to_linear(c):
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((np.maximum(c, 0.04045) + 0.055) / 1.055) ** 2.4)


def rgb_to_lab(img):
    """Return the L, a, b planes of an sRGB image."""
    img = as_rgb(img)
    xyz = srgb_to_linear(img) @ _SRGB_TO_XYZ.T / _WHITE_XYZ
    f = np.where(xyz > _EPS, np.cbrt(xyz), xyz / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return L, a, b
