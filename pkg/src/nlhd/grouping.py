"""Similar pixel groups: block matching followed by row matching.

Blocks are unrolled column-major, so row ``i`` of a block matrix holds pixel
``(i % p, i // p)`` of every matched block, and column ``l`` is block ``l``.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .haar import is_power_of_two
from .image import as_plane, as_rgb

# keeps one chunk of gathered group values around 32 MB
_CHUNK_VALUES = 1 << 22


@dataclass(frozen=True)
class MatchParams:
    patch_side: int
    num_blocks: int
    num_rows: int
    step: int
    search_radius: int

    def __post_init__(self):
        for name in ("patch_side", "num_blocks", "num_rows", "step", "search_radius"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not is_power_of_two(self.num_blocks):
            raise ValueError(f"num_blocks={self.num_blocks} is not a power of two")
        if not is_power_of_two(self.num_rows):
            raise ValueError(f"num_rows={self.num_rows} is not a power of two")
        if self.num_rows > self.patch_side ** 2:
            raise ValueError("num_rows cannot exceed the number of pixels in a patch")
        if self.step > self.patch_side:
            raise ValueError("step larger than patch_side would leave pixels uncovered")
        if self.search_radius < self.patch_side:
            raise ValueError("search_radius must be at least patch_side")

    @property
    def rows_per_block(self):
        return self.patch_side * self.patch_side


ILLUMINATION = MatchParams(patch_side=6, num_blocks=8, num_rows=2, step=6, search_radius=13)
REFLECTANCE = MatchParams(patch_side=11, num_blocks=16, num_rows=16, step=10, search_radius=23)
DENOISING = MatchParams(patch_side=6, num_blocks=16, num_rows=4, step=5, search_radius=13)


@dataclass(frozen=True)
class SimilarPixelGroup:
    matrix: np.ndarray  # (N3, N2); row 0 is the reference row
    rows: np.ndarray    # source row indices into the block matrix
    ref_row: int


def _axis_origins(length, patch, step):
    if length < patch:
        raise ValueError(f"image side {length} is smaller than the patch side {patch}")
    last = length - patch
    origins = list(range(0, last + 1, step))
    if origins[-1] != last:
        origins.append(last)
    return origins


def reference_positions(height, width, params):
    """Reference block origins on a ``step`` grid, clamped to reach the borders.

    Returned as an ``(P, 2)`` int array of ``(row, col)`` in row-major order.
    """
    rows = _axis_origins(height, params.patch_side, params.step)
    cols = _axis_origins(width, params.patch_side, params.step)
    grid = np.array([(r, c) for r in rows for c in cols], dtype=np.int64)
    return grid.reshape(-1, 2)


def select_matching_channel(img, block_origin, params):
    """Channel index (0=R, 1=G, 2=B) whose block has the largest mean; ties go to the lower index."""
    img = as_rgb(img)
    r, c = block_origin
    p = params.patch_side
    means = [img[r:r + p, c:c + p, ch].mean() for ch in range(3)]
    return int(np.argmax(means))


def block_match(plane, ref_origin, params, backend=None):
    """The ``num_blocks`` closest block origins to ``ref_origin`` in one plane.

    The reference comes first; the rest are ranked by squared Euclidean
    distance, ties in row-major scan order.
    """
    plane = as_plane(plane)
    stack = np.broadcast_to(plane, (3,) + plane.shape)
    _, origins = kernels.match_blocks(
        stack, np.asarray([ref_origin]), params.patch_side, params.num_blocks,
        params.search_radius, backend=backend)
    return origins[0]


def block_pixel_index(origins, patch_side, width):
    """Flat (row-major) pixel indices of block matrices.

    ``origins`` is ``(..., N2, 2)``; the result is ``(..., p*p, N2)``.
    """
    origins = np.asarray(origins, dtype=np.int64)
    i = np.arange(patch_side * patch_side)
    dr = i % patch_side
    dc = i // patch_side
    rows = origins[..., None, :, 0] + dr[:, None]
    cols = origins[..., None, :, 1] + dc[:, None]
    return rows * width + cols


def extract_block_groups(img, origins, params):
    """Block matrices for all three channels at shared origins, shape ``(3, p*p, N2)``."""
    img = as_rgb(img)
    idx = block_pixel_index(origins, params.patch_side, img.shape[1])
    flat = img.reshape(-1, 3)
    return np.stack([flat[idx, ch] for ch in range(3)])


def row_match(block_matrix, ref_row, num_rows, backend=None):
    """Group ``ref_row`` with its ``num_rows - 1`` nearest rows.

    Returns the :class:`SimilarPixelGroup` and the distance from the reference
    row to its nearest other row.
    """
    mb = np.asarray(block_matrix, dtype=np.float64)
    if not 0 <= ref_row < mb.shape[0]:
        raise IndexError(f"ref_row {ref_row} outside 0..{mb.shape[0] - 1}")
    idx, mind = kernels.match_rows(mb[None], num_rows, backend=backend)
    rows = idx[0, ref_row]
    return SimilarPixelGroup(mb[rows], rows, int(ref_row)), float(mind[0, ref_row])


@dataclass
class GroupIndex:
    """Matching results for a batch of reference positions.

    ``rows[q, c, i]`` lists the block-matrix rows grouped with row ``i`` in
    channel ``c`` of position ``q``; ``min_dist`` has the matching nearest
    distances.
    """

    positions: np.ndarray  # (P, 2)
    channels: np.ndarray   # (P,)
    origins: np.ndarray    # (P, N2, 2)
    rows: np.ndarray       # (P, 3, p*p, N3)
    min_dist: np.ndarray   # (P, 3, p*p)
    patch_side: int
    width: int

    def block_pixels(self):
        return block_pixel_index(self.origins, self.patch_side, self.width)

    def group_pixels(self):
        """Flat pixel indices of every group, shape ``(P, 3, p*p, N3, N2)``."""
        bp = self.block_pixels()
        q = np.arange(len(bp))[:, None, None, None]
        return bp[q, self.rows]

    def matching_channel_pixels(self):
        """Group pixel indices for the matching channel only, ``(P, p*p, N3, N2)``."""
        gp = self.group_pixels()
        return gp[np.arange(len(gp)), self.channels]


def match_groups(img, params, positions=None, backend=None):
    """Block matching and per-channel row matching at the given positions."""
    img = as_rgb(img)
    h, w, _ = img.shape
    if positions is None:
        positions = reference_positions(h, w, params)
    positions = np.asarray(positions, dtype=np.int64).reshape(-1, 2)
    planes = np.ascontiguousarray(img.transpose(2, 0, 1))
    channels, origins = kernels.match_blocks(
        planes, positions, params.patch_side, params.num_blocks,
        params.search_radius, backend=backend)
    bp = block_pixel_index(origins, params.patch_side, w)
    mb = planes.reshape(3, -1)[:, bp]                 # (3, P, R, N2)
    mb = mb.transpose(1, 0, 2, 3).reshape(-1, *bp.shape[1:])
    rows, mind = kernels.match_rows(mb, params.num_rows, backend=backend)
    P, R = len(positions), params.rows_per_block
    return GroupIndex(
        positions=positions,
        channels=channels,
        origins=origins,
        rows=rows.reshape(P, 3, R, params.num_rows),
        min_dist=mind.reshape(P, 3, R),
        patch_side=params.patch_side,
        width=w,
    )


def chunk_size(params):
    per_position = 3 * params.rows_per_block * params.num_rows * params.num_blocks
    return max(1, _CHUNK_VALUES // per_position)


def iter_groups(img, params, backend=None):
    """Yield :class:`GroupIndex` chunks covering every reference position in order.

    The chunk size depends only on ``params``, never on the thread count.
    """
    img = as_rgb(img)
    positions = reference_positions(img.shape[0], img.shape[1], params)
    step = chunk_size(params)
    for s in range(0, len(positions), step):
        yield match_groups(img, params, positions[s:s + step], backend=backend)


@dataclass
class GroupProvenance:
    """Compact record of the matching-channel groups of one pass.

    Enough to rebuild the pixel sets of every group on another plane of the
    same image (the saturation plane, for colour correction).
    """

    origins: np.ndarray  # (P, N2, 2)
    rows: np.ndarray     # (P, p*p, N3), rows from the matching channel
    patch_side: int
    width: int

    @classmethod
    def from_chunks(cls, chunks):
        chunks = list(chunks)
        if not chunks:
            raise ValueError("no group chunks to record")
        rows = [g.rows[np.arange(len(g.rows)), g.channels] for g in chunks]
        return cls(
            origins=np.concatenate([g.origins for g in chunks]),
            rows=np.concatenate(rows).astype(np.int32),
            patch_side=chunks[0].patch_side,
            width=chunks[0].width,
        )

    def __len__(self):
        return len(self.origins)

    def pixels(self, start=0, stop=None):
        """Flat pixel indices ``(P, p*p, N3, N2)`` for positions ``start:stop``."""
        bp = block_pixel_index(self.origins[start:stop], self.patch_side, self.width)
        rows = self.rows[start:stop]
        q = np.arange(len(bp))[:, None, None]
        return bp[q, rows]
