"""Separable orthonormal Haar transform of pixel groups.

All functions accept a single ``(N3, N2)`` matrix or a stack ``(..., N3, N2)``;
both sides must be powers of two. The forward transform is
``C = H(N3) @ M @ H(N2).T`` with full-depth orthonormal Haar matrices, so
``C[0, 0]`` is the group mean scaled by ``sqrt(N3 * N2)``.
"""
from functools import lru_cache

import numpy as np


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _haar_matrix(n):
    if n == 1:
        return np.ones((1, 1))
    half = _haar_matrix(n // 2)
    top = np.kron(half, [1.0, 1.0])
    bottom = np.kron(np.eye(n // 2), [1.0, -1.0])
    return np.vstack([top, bottom]) / np.sqrt(2.0)


def haar_matrix(n):
    """Orthonormal ``n x n`` Haar matrix; row 0 is the scaled average."""
    if not is_power_of_two(n):
        raise ValueError(f"Haar size must be a power of two, got {n}")
    m = _haar_matrix(n).copy()
    m.flags.writeable = False
    return m


def _check(m):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim < 2:
        raise ValueError(f"expected at least a 2-D array, got shape {m.shape}")
    n3, n2 = m.shape[-2:]
    if not (is_power_of_two(n3) and is_power_of_two(n2)):
        raise ValueError(f"group shape {(n3, n2)} is not a pair of powers of two")
    return m, _haar_matrix(n3), _haar_matrix(n2)


def _sandwich(left, m, right):
    # left @ m @ right for a stack of matrices, as two large 2-D products
    n3, n2 = m.shape[-2:]
    y = (m.reshape(-1, n2) @ right).reshape(m.shape)
    y = y.swapaxes(-1, -2)
    y = (y.reshape(-1, n3) @ left.T).reshape(y.shape)
    return y.swapaxes(-1, -2)


def haar_forward(m):
    m, hl, hr = _check(m)
    return _sandwich(hl, m, hr.T)


def haar_inverse(c):
    c, hl, hr = _check(c)
    return _sandwich(hl.T, c, hr)


def reconstruct_low(c):
    """Inverse transform keeping only the DC coefficient."""
    c, _, _ = _check(c)
    dc = np.zeros_like(c)
    dc[..., 0, 0] = c[..., 0, 0]
    return haar_inverse(dc)


def reconstruct_high(c):
    """Inverse transform with the DC coefficient zeroed."""
    c, _, _ = _check(c)
    ac = c.copy()
    ac[..., 0, 0] = 0.0
    return haar_inverse(ac)
