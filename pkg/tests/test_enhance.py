import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlhd.enhance import (EnhanceParams, compose, compute_gamma1, compute_gamma2, count_ratio,
                          enhance_illumination, enhance_reflectance, exp_enhance, iteration_limit,
                          log_enhance, min_fuse)
from nlhd.image import rgb_to_hsv

from _oracles import gamma1_oracle, gamma2_oracle

P = EnhanceParams()
unit = st.floats(0.0, 1.0, allow_nan=False)
gam = st.floats(1e-6, 1.0, allow_nan=False)


def mixed(fractions, size=1000):
    """Plane with the given (fraction, value) pairs, remainder 0.9."""
    out = np.full(size, 0.9)
    start = 0
    for frac, value in fractions:
        n = int(round(frac * size))
        out[start:start + n] = value
        start += n
    return out.reshape(20, -1)


def test_defaults():
    assert (P.alpha1, P.alpha2, P.alpha3, P.beta1, P.beta2) == (0.35, 0.005, 0.05, 0.45, 0.61)
    assert (P.theta, P.theta1, P.theta2) == (0.9, 0.05, 0.15)
    assert (P.step, P.mean_stop, P.min_stop, P.k_scale) == (0.15, 0.6, 0.1, 30.0)


@pytest.mark.parametrize("kw", [dict(alpha1=1.5), dict(beta1=0.0), dict(beta2=1.2), dict(theta=-0.1)])
def test_param_validation(kw):
    with pytest.raises(ValueError):
        EnhanceParams(**kw)


def test_count_ratio_examples():
    assert count_ratio(np.full((4, 4), 0.2), 0.35) == 1.0
    assert count_ratio(np.full((4, 4), 0.9), 0.35) == 0.0
    assert count_ratio(mixed([(0.5, 0.2)]), 0.35) == 0.5
    assert count_ratio(np.zeros((3, 3)), 0.35) == 0.0


def test_count_ratio_ignores_zeros():
    plane = np.array([[0.0, 0.0, 0.1, 0.9]])
    assert count_ratio(plane, 0.35) == 0.5


def test_gamma1_examples():
    assert compute_gamma1(np.full((5, 5), 0.1)) == 0.45
    assert compute_gamma1(np.full((5, 5), 0.9)) == 0.0
    assert compute_gamma1(mixed([(0.3, 0.2)])) == pytest.approx(0.30, abs=0)


def test_gamma2_examples():
    assert compute_gamma2(np.full((5, 5), 0.01)) == 0.0
    assert compute_gamma2(mixed([(0.1, 0.03), (0.2, 0.10)])) == pytest.approx(0.10, abs=0)
    assert compute_gamma2(np.full((5, 5), 0.9)) == 0.0


def test_gamma2_uses_alpha2_when_very_dark():
    plane = mixed([(0.95, 0.001), (0.01, 0.1)])
    # guard 950 / 960 > 0.9, so the fraction below alpha2 counts
    assert compute_gamma2(plane) == pytest.approx(0.61)
    assert gamma2_oracle(plane) == compute_gamma2(plane)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (6, 7), elements=unit), st.integers(0, 2**31 - 1))
def test_gamma_permutation_invariant_and_oracle(plane, seed):
    perm = np.random.default_rng(seed).permutation(plane.ravel()).reshape(plane.shape)
    assert compute_gamma1(plane) == compute_gamma1(perm) == gamma1_oracle(plane)
    assert compute_gamma2(plane) == compute_gamma2(perm) == gamma2_oracle(plane)


def test_exp_examples():
    assert exp_enhance(np.array(0.25), 0.5) == 0.5
    x = np.linspace(0, 1, 11)
    np.testing.assert_array_equal(exp_enhance(x, 1.0), x)
    assert exp_enhance(np.array(1.0), 0.3) == 1.0
    # a zero exponent leaves the plane as it is
    np.testing.assert_array_equal(exp_enhance(x, 0.0), x)
    with pytest.raises(ValueError):
        exp_enhance(x, -0.1)


def test_log_examples():
    assert log_enhance(np.array(0.0), 0.3) == 0.0
    assert log_enhance(np.array(1.0), 1.0) == 2.0
    assert log_enhance(np.array(1.0), 0.5) == 3.0
    assert np.all(np.isinf(log_enhance(np.zeros(3), 0.0)))
    with pytest.raises(ValueError):
        log_enhance(np.zeros(3), -1.0)


def test_min_fuse_examples():
    assert min_fuse(0.7, 0.9) == 0.7
    assert min_fuse(0.4, 0.4) == 0.4


@settings(max_examples=500, deadline=None)
@given(unit, gam, gam)
def test_branches_brighten(x, g1, g2):
    a = float(exp_enhance(np.array(x), g1))
    b = float(log_enhance(np.array(x), g2))
    f = min(a, b)
    assert a >= x and b >= x and f >= x
    assert f <= a and f <= b


def test_iteration_limit():
    assert iteration_limit(0.0) == 30
    assert iteration_limit(1.0) == 1
    assert iteration_limit(0.95) == 2          # 1.5 rounds up
    assert iteration_limit(0.8) == 6


def test_bright_plane_stops_after_one_iteration():
    plane = np.full((10, 10), 0.8)
    out, k = enhance_illumination(plane, 0.8, return_iterations=True)
    assert k == 1
    # gamma1 = gamma2 = 0 here: exp branch is the identity, log branch infinite
    np.testing.assert_array_equal(out, plane)


def test_zero_plane_runs_the_full_budget():
    out, k = enhance_illumination(np.zeros((8, 8)), 0.0, return_iterations=True)
    assert k == iteration_limit(0.0)
    assert np.all(out == 0)


def test_dark_plane_reaches_a_stop(rng):
    plane = rng.uniform(0.01, 0.1, (16, 16))
    out, k = enhance_illumination(plane, float(plane.mean()), return_iterations=True)
    assert out.mean() > P.mean_stop or out.min() > P.min_stop
    assert k <= iteration_limit(plane.mean())
    assert out.mean() >= plane.mean()


@pytest.mark.parametrize("branch", ["exp", "log", "min"])
def test_branch_selection(branch, rng):
    plane = rng.uniform(0.0, 0.4, (12, 12))
    out = enhance_illumination(plane, 0.2, branch=branch)
    assert out.mean() >= plane.mean()
    with pytest.raises(ValueError):
        enhance_illumination(plane, 0.2, branch="max")


def test_candidate_is_computed_from_current_iterate(rng):
    # replay the loop by hand and compare
    plane = rng.uniform(0.0, 0.05, (10, 10))
    m = 0.03
    g1, g2 = compute_gamma1(plane), compute_gamma2(plane)
    cur = plane
    for _ in range(iteration_limit(m)):
        cand = np.minimum(exp_enhance(cur, g1), log_enhance(cur, g2))
        if cand.mean() > 0.6 or cand.min() > 0.1:
            break
        cur = cur + 0.15 * plane
    np.testing.assert_array_equal(enhance_illumination(plane, m), cand)


def test_reflectance_shift():
    np.testing.assert_array_equal(enhance_reflectance(np.array([0.0, -0.25, 0.3])), [1.0, 0.75, 1.3])


def test_compose_examples(rng):
    img = rng.random((6, 6, 3))
    out = compose(np.ones((6, 6)), np.ones((6, 6)), img)
    np.testing.assert_allclose(rgb_to_hsv(out)[2], 1.0, atol=1e-12)
    assert np.all(compose(np.zeros((6, 6)), 1.0, img) == 0)
    grey = np.full((2, 2, 3), 0.3)
    np.testing.assert_allclose(compose(np.full((2, 2), 0.8), 1.0, grey), 0.8, atol=1e-12)


def test_compose_keeps_hue_and_saturation(rng):
    img = rng.uniform(0.05, 1, (8, 8, 3))
    out = compose(rng.uniform(0.1, 0.9, (8, 8)), 1.0, img)
    h0, s0, _ = rgb_to_hsv(img)
    h1, s1, _ = rgb_to_hsv(out)
    np.testing.assert_allclose(s1, s0, atol=1e-9)
    np.testing.assert_allclose(np.cos(np.radians(h1 - h0)), 1.0, atol=1e-9)


def test_compose_clamps_and_checks_shapes(rng):
    img = rng.random((4, 4, 3))
    out = compose(np.full((4, 4), 0.9), np.full((4, 4), 1.8), img)
    assert out.max() <= 1.0 + 1e-12
    with pytest.raises(ValueError):
        compose(np.ones((3, 3)), 1.0, img)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (9, 9), elements=unit), unit)
def test_algorithm_mean_never_drops(plane, m):
    out, k = enhance_illumination(plane, m, return_iterations=True)
    assert out.mean() >= plane.mean() - 1e-15
    assert 1 <= k <= iteration_limit(m) <= max(1, math.floor(30 * (1 - m) + 0.5))
