"""Hot inner loops: block search, row matching, per-group filtering and the
lightness-order pair count.

Each kernel has a numba implementation (``*_nb``) and a numpy one (``*_np``)
with the same contract. The public wrappers pick one according to
:data:`nlhd._accel.USE_NUMBA`, or an explicit ``backend=`` argument.

Every kernel writes each output slot from exactly one loop iteration, so
results do not depend on the number of worker threads.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _accel
from ._accel import njit, prange
from .haar import haar_forward, haar_inverse, reconstruct_high, reconstruct_low

MODE_LOW, MODE_HIGH, MODE_THRESHOLD = 0, 1, 2
_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def _pick(backend):
    if backend is None:
        return "numba" if _accel.USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not _accel.HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


@njit(cache=True)
def _topk_insert(keys, idxs, count, k, d, j):
    # stable: candidates arrive in ascending j, equal keys keep arrival order
    if count == k:
        if d >= keys[k - 1]:
            return count
        pos = k - 1
    else:
        pos = count
        count += 1
    while pos > 0 and keys[pos - 1] > d:
        keys[pos] = keys[pos - 1]
        idxs[pos] = idxs[pos - 1]
        pos -= 1
    keys[pos] = d
    idxs[pos] = j
    return count


# --------------------------------------------------------------------------
# block matching
# --------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def _match_blocks_nb(planes, positions, p, n_blocks, radius):
    H = planes.shape[1]
    W = planes.shape[2]
    P = positions.shape[0]
    channels = np.empty(P, np.int64)
    origins = np.empty((P, n_blocks, 2), np.int64)
    for q in prange(P):
        r0 = positions[q, 0]
        c0 = positions[q, 1]
        best = 0
        best_sum = -np.inf
        for ch in range(3):
            s = 0.0
            for i in range(p):
                for j in range(p):
                    s += planes[ch, r0 + i, c0 + j]
            if s > best_sum:
                best_sum = s
                best = ch
        channels[q] = best

        rlo = max(0, r0 - radius)
        rhi = min(H - p, r0 + radius)
        clo = max(0, c0 - radius)
        chi = min(W - p, c0 + radius)
        nc = chi - clo + 1
        keys = np.empty(n_blocks)
        sel = np.empty(n_blocks, np.int64)
        # the reference goes first whatever its duplicates look like
        count = _topk_insert(keys, sel, 0, n_blocks, -1.0, (r0 - rlo) * nc + (c0 - clo))
        for a in range(rhi - rlo + 1):
            for b in range(nc):
                r = rlo + a
                c = clo + b
                if r == r0 and c == c0:
                    continue
                s = 0.0
                for i in range(p):
                    for j in range(p):
                        t = planes[best, r + i, c + j] - planes[best, r0 + i, c0 + j]
                        s += t * t
                count = _topk_insert(keys, sel, count, n_blocks, s, a * nc + b)
        for l in range(n_blocks):
            k = sel[l % count]
            origins[q, l, 0] = rlo + k // nc
            origins[q, l, 1] = clo + k % nc
    return channels, origins


def _match_blocks_np(planes, positions, p, n_blocks, radius):
    _, H, W = planes.shape
    P = positions.shape[0]
    channels = np.empty(P, np.int64)
    origins = np.empty((P, n_blocks, 2), np.int64)
    views = [sliding_window_view(planes[ch], (p, p)) for ch in range(3)]
    for q in range(P):
        r0, c0 = int(positions[q, 0]), int(positions[q, 1])
        sums = [planes[ch, r0:r0 + p, c0:c0 + p].sum() for ch in range(3)]
        best = int(np.argmax(sums))
        channels[q] = best

        rlo, rhi = max(0, r0 - radius), min(H - p, r0 + radius)
        clo, chi = max(0, c0 - radius), min(W - p, c0 + radius)
        nc = chi - clo + 1
        cand = views[best][rlo:rhi + 1, clo:chi + 1]
        ref = planes[best, r0:r0 + p, c0:c0 + p]
        # accumulate in scan order so exact ties round the same way as the loop kernel
        dist = np.zeros(cand.shape[:2])
        for i in range(p):
            for j in range(p):
                dist += (cand[:, :, i, j] - ref[i, j]) ** 2
        dist = dist.ravel()
        dist[(r0 - rlo) * nc + (c0 - clo)] = -1.0
        order = np.argsort(dist, kind="stable")
        take = order[np.arange(n_blocks) % dist.size]
        origins[q, :, 0] = rlo + take // nc
        origins[q, :, 1] = clo + take % nc
    return channels, origins


def match_blocks(planes, positions, patch_side, n_blocks, radius, backend=None):
    """Choose the matching channel and the ``n_blocks`` most similar blocks.

    ``planes`` is a ``(3, H, W)`` stack, ``positions`` an ``(P, 2)`` array of
    reference top-left corners. Returns ``channels`` of shape ``(P,)`` and
    ``origins`` of shape ``(P, n_blocks, 2)`` with the reference in slot 0.
    If the clipped search window holds fewer than ``n_blocks`` candidates the
    ranked list is repeated cyclically.
    """
    planes = np.ascontiguousarray(planes, dtype=np.float64)
    positions = np.ascontiguousarray(positions, dtype=np.int64).reshape(-1, 2)
    args = (planes, positions, int(patch_side), int(n_blocks), int(radius))
    if _pick(backend) == "numba":
        return _match_blocks_nb(*args)
    return _match_blocks_np(*args)


# --------------------------------------------------------------------------
# row matching
# --------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def _match_rows_nb(mb, n_rows):
    G, R, N = mb.shape
    idx = np.empty((G, R, n_rows), np.int64)
    mind = np.zeros((G, R))
    for g in prange(G):
        d = np.zeros((R, R))
        for i in range(R):
            for j in range(i + 1, R):
                s = 0.0
                for l in range(N):
                    t = mb[g, i, l] - mb[g, j, l]
                    s += t * t
                d[i, j] = s
                d[j, i] = s
        keys = np.empty(n_rows)
        sel = np.empty(n_rows, np.int64)
        for i in range(R):
            count = _topk_insert(keys, sel, 0, n_rows, -1.0, i)
            m = np.inf
            for j in range(R):
                if j == i:
                    continue
                if d[i, j] < m:
                    m = d[i, j]
                count = _topk_insert(keys, sel, count, n_rows, d[i, j], j)
            for k in range(n_rows):
                idx[g, i, k] = sel[k]
            if R > 1:
                mind[g, i] = np.sqrt(m)
    return idx, mind


def _match_rows_np(mb, n_rows):
    G, R, N = mb.shape
    idx = np.empty((G, R, n_rows), np.int64)
    mind = np.zeros((G, R))
    diag = np.arange(R)
    for g in range(G):
        rows = mb[g]
        d = np.zeros((R, R))
        for l in range(N):
            d += (rows[:, None, l] - rows[None, :, l]) ** 2
        if R > 1:
            off = d.copy()
            off[diag, diag] = np.inf
            mind[g] = np.sqrt(off.min(axis=1))
        d[diag, diag] = -1.0
        idx[g] = np.argsort(d, axis=1, kind="stable")[:, :n_rows]
    return idx, mind


def match_rows(mb, n_rows, backend=None):
    """Row matching for a stack of block matrices.

    ``mb`` has shape ``(G, R, N2)``. Every row serves once as the reference.
    Returns ``idx`` of shape ``(G, R, n_rows)`` (reference first, then nearest
    rows by Euclidean distance, ties by ascending index) and ``min_dist`` of
    shape ``(G, R)``: the distance from each row to its nearest other row.
    """
    mb = np.ascontiguousarray(mb, dtype=np.float64)
    if mb.ndim != 3:
        raise ValueError(f"expected a (G, R, N2) stack, got shape {mb.shape}")
    if not 1 <= n_rows <= mb.shape[1]:
        raise ValueError(f"n_rows={n_rows} outside [1, {mb.shape[1]}]")
    if _pick(backend) == "numba":
        return _match_rows_nb(mb, int(n_rows))
    return _match_rows_np(mb, int(n_rows))


# --------------------------------------------------------------------------
# group filtering: gather, Haar transform, coefficient edit, local write-back
# --------------------------------------------------------------------------

@njit(cache=True)
def _haar1_forward(x, n, tmp):
    length = n
    while length > 1:
        half = length // 2
        for i in range(half):
            a = x[2 * i]
            b = x[2 * i + 1]
            tmp[i] = (a + b) * _INV_SQRT2
            tmp[half + i] = (a - b) * _INV_SQRT2
        for i in range(length):
            x[i] = tmp[i]
        length = half


@njit(cache=True)
def _haar1_inverse(x, n, tmp):
    length = 2
    while length <= n:
        half = length // 2
        for i in range(half):
            a = x[i]
            d = x[half + i]
            tmp[2 * i] = (a + d) * _INV_SQRT2
            tmp[2 * i + 1] = (a - d) * _INV_SQRT2
        for i in range(length):
            x[i] = tmp[i]
        length *= 2


@njit(cache=True)
def _haar2(g, line, tmp, inverse):
    n3, n2 = g.shape
    for k in range(n3):
        for l in range(n2):
            line[l] = g[k, l]
        if inverse:
            _haar1_inverse(line, n2, tmp)
        else:
            _haar1_forward(line, n2, tmp)
        for l in range(n2):
            g[k, l] = line[l]
    for l in range(n2):
        for k in range(n3):
            line[k] = g[k, l]
        if inverse:
            _haar1_inverse(line, n3, tmp)
        else:
            _haar1_forward(line, n3, tmp)
        for k in range(n3):
            g[k, l] = line[k]


@njit(cache=True)
def _threshold_spectrum(g, thr, rms):
    n3, n2 = g.shape
    for k in range(n3):
        s = 0.0
        for l in range(n2):
            s += g[k, l] * g[k, l]
        rms[k] = np.sqrt(s / n2)
    dc = g[0, 0]
    for k in range(n3):
        weak = k > 0 and rms[k] < thr
        for l in range(n2):
            if weak or abs(g[k, l]) < thr:
                g[k, l] = 0.0
    g[0, 0] = dc


@njit(parallel=True, cache=True)
def _filter_groups_nb(flat, block_pix, rows, mode, thr):
    P, C, R, N3 = rows.shape
    N2 = block_pix.shape[2]
    acc = np.zeros((P, C, R, N2))
    cnt = np.zeros((P, C, R))
    n = max(N3, N2)
    for q in prange(P):
        g = np.empty((N3, N2))
        line = np.empty(n)
        tmp = np.empty(n)
        rms = np.empty(N3)
        for c in range(C):
            for i in range(R):
                for k in range(N3):
                    rr = rows[q, c, i, k]
                    for l in range(N2):
                        g[k, l] = flat[c, block_pix[q, rr, l]]
                if mode == 2:
                    _haar2(g, line, tmp, False)
                    _threshold_spectrum(g, thr[q, c, i], rms)
                    _haar2(g, line, tmp, True)
                else:
                    # the DC-only inverse is the group mean everywhere, so
                    # both decomposition modes skip the transform
                    mean = g.sum() / (N3 * N2)
                    if mode == 0:
                        g[:, :] = mean
                    else:
                        g -= mean
                for k in range(N3):
                    rr = rows[q, c, i, k]
                    cnt[q, c, rr] += 1.0
                    for l in range(N2):
                        acc[q, c, rr, l] += g[k, l]
    return acc, cnt


def _filter_groups_np(flat, block_pix, rows, mode, thr):
    P, C, R, N3 = rows.shape
    N2 = block_pix.shape[2]
    q = np.arange(P)[:, None, None, None]
    pix = block_pix[q, rows]                                  # (P, C, R, N3, N2)
    coef = haar_forward(flat[np.arange(C)[None, :, None, None, None], pix])
    if mode == MODE_LOW:
        rec = reconstruct_low(coef)
    elif mode == MODE_HIGH:
        rec = reconstruct_high(coef)
    else:
        # local import: denoise imports this module
        from .denoise import hard_threshold
        rec = haar_inverse(hard_threshold(coef, thr))
    # local row index of every group entry inside its position's block matrices
    local = (q * C + np.arange(C)[None, :, None, None]) * R + rows
    lin = (local[..., None] * N2 + np.arange(N2)).ravel()
    acc = np.bincount(lin, weights=rec.ravel(), minlength=P * C * R * N2)
    cnt = np.bincount(local.ravel(), minlength=P * C * R).astype(np.float64)
    return acc.reshape(P, C, R, N2), cnt.reshape(P, C, R)


def filter_groups(flat, block_pix, rows, mode, thr=None, backend=None):
    """Transform, edit and write back every similar pixel group of a chunk.

    ``flat`` is the ``(C, H*W)`` image, ``block_pix`` the ``(P, R, N2)`` flat
    pixel indices of the block matrices and ``rows`` the ``(P, C, R, N3)``
    row-matching result. ``mode`` keeps the DC coefficient only
    (``MODE_LOW``), drops it (``MODE_HIGH``), or hard-thresholds each group
    with ``thr[q, c, i]`` (``MODE_THRESHOLD``).

    Returns per-position accumulators ``acc`` ``(P, C, R, N2)`` (summed group
    estimates for each block-matrix entry) and ``cnt`` ``(P, C, R)`` (how
    many groups wrote each block-matrix row).
    """
    flat = np.ascontiguousarray(flat, dtype=np.float64)
    block_pix = np.ascontiguousarray(block_pix, dtype=np.int64)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if mode == MODE_THRESHOLD:
        if thr is None:
            raise ValueError("thresholding mode needs per-group thresholds")
        thr = np.ascontiguousarray(np.broadcast_to(thr, rows.shape[:3]), dtype=np.float64)
    else:
        thr = np.zeros((1, 1, 1))
    if _pick(backend) == "numba":
        return _filter_groups_nb(flat, block_pix, rows, int(mode), thr)
    return _filter_groups_np(flat, block_pix, rows, int(mode), thr)


@njit(parallel=True, cache=True)
def _group_means_nb(flat, block_pix, rows):
    P, C, R, N3 = rows.shape
    N2 = block_pix.shape[2]
    out = np.empty((P, C, R))
    for q in prange(P):
        for c in range(C):
            for i in range(R):
                s = 0.0
                for k in range(N3):
                    rr = rows[q, c, i, k]
                    for l in range(N2):
                        s += flat[c, block_pix[q, rr, l]]
                out[q, c, i] = s / (N3 * N2)
    return out


def _group_means_np(flat, block_pix, rows):
    q = np.arange(rows.shape[0])[:, None, None, None]
    chan = np.arange(rows.shape[1])[None, :, None, None, None]
    return flat[chan, block_pix[q, rows]].mean(axis=(-1, -2))


def group_means(flat, block_pix, rows, backend=None):
    """Mean of every similar pixel group, shape ``(P, C, R)``."""
    flat = np.ascontiguousarray(flat, dtype=np.float64)
    block_pix = np.ascontiguousarray(block_pix, dtype=np.int64)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if _pick(backend) == "numba":
        return _group_means_nb(flat, block_pix, rows)
    return _group_means_np(flat, block_pix, rows)


# --------------------------------------------------------------------------
# lightness order pair count
# --------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def _order_mismatch_nb(a, b):
    m = a.size
    counts = np.zeros(m, np.int64)
    for x in prange(m):
        c = 0
        ax = a[x]
        bx = b[x]
        for y in range(m):
            if (ax >= a[y]) != (bx >= b[y]):
                c += 1
        counts[x] = c
    return counts.sum()


def _order_mismatch_np(a, b, chunk=512):
    total = 0
    for s in range(0, a.size, chunk):
        ua = a[s:s + chunk, None] >= a[None, :]
        ub = b[s:s + chunk, None] >= b[None, :]
        total += int(np.count_nonzero(ua != ub))
    return total


def order_mismatch_count(a, b, backend=None):
    """Number of ordered pairs (x, y) whose ``>=`` relation differs between a and b."""
    a = np.ascontiguousarray(a, dtype=np.float64).ravel()
    b = np.ascontiguousarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError("lightness maps differ in size")
    if _pick(backend) == "numba":
        return int(_order_mismatch_nb(a, b))
    return _order_mismatch_np(a, b)
