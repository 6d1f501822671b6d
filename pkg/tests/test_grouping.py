import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlhd.grouping import (DENOISING, ILLUMINATION, REFLECTANCE, GroupProvenance, MatchParams,
                           block_match, block_pixel_index, chunk_size, extract_block_groups,
                           iter_groups, match_groups, reference_positions, row_match,
                           select_matching_channel)

from _oracles import (block_match_bruteforce, block_matrix_direct,
                      row_match_bruteforce)

BACKENDS = ["numba", "numpy"]


def test_presets():
    assert (ILLUMINATION.patch_side, ILLUMINATION.num_blocks, ILLUMINATION.num_rows,
            ILLUMINATION.step, ILLUMINATION.search_radius) == (6, 8, 2, 6, 13)
    assert (REFLECTANCE.patch_side, REFLECTANCE.num_blocks, REFLECTANCE.num_rows,
            REFLECTANCE.step, REFLECTANCE.search_radius) == (11, 16, 16, 10, 23)
    assert DENOISING == MatchParams(6, 16, 4, 5, 13)


@pytest.mark.parametrize("kw", [
    dict(num_blocks=3), dict(num_rows=6), dict(num_rows=64), dict(search_radius=2),
    dict(step=0), dict(step=5),
])
def test_match_params_validation(kw):
    base = dict(patch_side=4, num_blocks=4, num_rows=2, step=2, search_radius=5)
    base.update(kw)
    with pytest.raises(ValueError):
        MatchParams(**base)


@pytest.mark.parametrize("width, cols", [(11, {0}), (21, {0, 10}), (25, {0, 10, 14})])
def test_reference_position_columns(width, cols):
    pos = reference_positions(11, width, MatchParams(11, 16, 16, 10, 23))
    assert set(pos[:, 1].tolist()) == cols


def test_reference_positions_too_small():
    with pytest.raises(ValueError):
        reference_positions(5, 20, ILLUMINATION)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 20), st.integers(0, 20))
def test_reference_positions_tile_the_image(p, step, dh, dw):
    step = min(step, p)
    h, w = p + dh, p + dw
    params = MatchParams(p, 1, 1, step, p)
    cover = np.zeros((h, w), bool)
    pos = reference_positions(h, w, params)
    assert len({tuple(x) for x in pos.tolist()}) == len(pos)
    for r, c in pos:
        cover[r:r + p, c:c + p] = True
    assert cover.all()


@pytest.mark.parametrize("block, expected", [
    ((1.0, 0.0, 0.0), 0), ((0.5, 0.5, 0.5), 0), ((0.1, 0.4, 0.2), 1), ((0.1, 0.2, 0.2), 1),
])
def test_select_matching_channel(block, expected):
    img = np.ones((6, 6, 3)) * np.array(block)
    assert select_matching_channel(img, (0, 0), ILLUMINATION) == expected


@pytest.mark.parametrize("backend", BACKENDS)
def test_block_match_constant_plane_takes_scan_order(backend):
    params = MatchParams(2, 4, 1, 1, 3)
    got = block_match(np.full((8, 8), 0.3), (3, 3), params, backend=backend)
    assert got.tolist() == [[3, 3], [0, 0], [0, 1], [0, 2]]


@pytest.mark.parametrize("backend", BACKENDS)
def test_block_match_duplicate_ranks_second(backend, rng):
    plane = rng.random((12, 12))
    plane[7:10, 1:4] = plane[2:5, 5:8]
    got = block_match(plane, (2, 5), MatchParams(3, 4, 1, 1, 8), backend=backend)
    assert got[0].tolist() == [2, 5] and got[1].tolist() == [7, 1]


@pytest.mark.parametrize("backend", BACKENDS)
def test_block_match_small_window_repeats_cyclically(backend, rng):
    plane = rng.random((4, 4))
    params = MatchParams(3, 8, 1, 1, 3)   # only 4 candidate positions exist
    got = block_match(plane, (0, 0), params, backend=backend).tolist()
    ranked = block_match_bruteforce(plane, (0, 0), 3, 8, 3)
    assert got == [list(x) for x in ranked]
    assert got[4:] == got[:4]


@pytest.mark.parametrize("backend", BACKENDS)
def test_block_match_matches_bruteforce_16x16(backend, rng):
    plane = rng.random((16, 16))
    params = MatchParams(3, 4, 1, 1, 5)
    for ref in [(0, 0), (6, 9), (13, 13), (4, 12)]:
        got = block_match(plane, ref, params, backend=backend).tolist()
        assert got == [list(x) for x in block_match_bruteforce(plane, ref, 3, 4, 5)]


def test_extract_block_groups_direct_reads(rng):
    img = rng.random((10, 12, 3))
    origins = np.array([[0, 0], [4, 7], [2, 3], [6, 1]])
    params = MatchParams(4, 4, 2, 1, 4)
    mb = extract_block_groups(img, origins, params)
    assert mb.shape == (3, 16, 4)
    for ch in range(3):
        np.testing.assert_array_equal(mb[ch], block_matrix_direct(img[..., ch], origins, 4))


def test_extract_single_block_and_constant_channel(rng):
    img = rng.random((5, 5, 3))
    img[..., 2] = 0.7
    mb = extract_block_groups(img, np.array([[1, 1]]), MatchParams(2, 1, 1, 1, 2))
    np.testing.assert_array_equal(mb[0][:, 0], [img[1, 1, 0], img[2, 1, 0], img[1, 2, 0], img[2, 2, 0]])
    assert np.all(mb[2] == 0.7)


@pytest.mark.parametrize("backend", BACKENDS)
def test_row_match_distance_sqrt3(backend):
    group, d = row_match(np.array([[0.0, 0, 0], [1, 1, 1]]), 0, 2, backend=backend)
    assert d == pytest.approx(np.sqrt(3))
    assert group.rows.tolist() == [0, 1]
    np.testing.assert_array_equal(group.matrix, [[0, 0, 0], [1, 1, 1]])


@pytest.mark.parametrize("backend", BACKENDS)
def test_row_match_identical_rows(backend):
    mb = np.ones((9, 4))
    group, d = row_match(mb, 5, 4, backend=backend)
    assert group.rows.tolist() == [5, 0, 1, 2] and d == 0.0 and group.ref_row == 5


@pytest.mark.parametrize("backend", BACKENDS)
def test_row_match_matches_oracle_36x16(backend, rng):
    mb = rng.random((36, 16))
    for ref in range(36):
        group, d = row_match(mb, ref, 4, backend=backend)
        rows, dist = row_match_bruteforce(mb, ref, 4)
        assert group.rows.tolist() == rows
        assert d == pytest.approx(dist, rel=1e-12)
        np.testing.assert_array_equal(group.matrix[0], mb[ref])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_min_distance_zero_iff_duplicate(seed):
    rng = np.random.default_rng(seed)
    mb = rng.integers(0, 3, size=(9, 2)).astype(float)
    for ref in range(9):
        _, d = row_match(mb, ref, 2)
        dup = any(np.array_equal(mb[ref], mb[j]) for j in range(9) if j != ref)
        assert (d == 0.0) == dup


def test_row_match_rejects_bad_reference():
    with pytest.raises(IndexError):
        row_match(np.zeros((4, 2)), 4, 2)


def test_block_pixel_index_layout():
    idx = block_pixel_index(np.array([[1, 2]]), 2, width=10)
    # rows of the block matrix walk down each column first
    assert idx[:, 0].tolist() == [12, 22, 13, 23]


@pytest.mark.parametrize("backend", BACKENDS)
def test_match_groups_consistent_with_public_ops(backend, rng):
    img = rng.random((20, 22, 3))
    params = MatchParams(4, 4, 2, 3, 6)
    g = match_groups(img, params, backend=backend)
    for q, origin in enumerate(g.positions):
        ch = select_matching_channel(img, origin, params)
        assert g.channels[q] == ch
        origins = block_match(img[..., ch], origin, params, backend=backend)
        np.testing.assert_array_equal(g.origins[q], origins)
        mbs = extract_block_groups(img, origins, params)
        for c in range(3):
            for i in (0, 7, 15):
                group, d = row_match(mbs[c], i, 2, backend=backend)
                np.testing.assert_array_equal(g.rows[q, c, i], group.rows)
                assert g.min_dist[q, c, i] == d
    pix = g.group_pixels()
    flat = img.reshape(-1, 3)
    mb = extract_block_groups(img, g.origins[3], params)
    np.testing.assert_array_equal(flat[pix[3, 1, 5], 1], mb[1][g.rows[3, 1, 5]])


def test_iter_groups_chunks_cover_every_position(rng):
    img = rng.random((40, 40, 3))
    chunks = list(iter_groups(img, ILLUMINATION))
    pos = np.concatenate([c.positions for c in chunks])
    np.testing.assert_array_equal(pos, reference_positions(40, 40, ILLUMINATION))
    assert chunk_size(ILLUMINATION) >= 1


def test_provenance_keeps_matching_channel_rows(rng):
    img = rng.random((24, 24, 3))
    chunks = list(iter_groups(img, ILLUMINATION))
    prov = GroupProvenance.from_chunks(chunks)
    assert len(prov) == sum(len(c.positions) for c in chunks)
    np.testing.assert_array_equal(prov.pixels(), chunks[0].matching_channel_pixels())
    with pytest.raises(ValueError):
        GroupProvenance.from_chunks([])
