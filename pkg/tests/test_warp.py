import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocai.core import PipelineConfig, ShapeMismatchError
from ocai.warp import backward_warp, softmax_splat
from oracles import bilinear_reference, splat_reference


def _instance(seed, h=6, w=7, channels=1, max_flow=3.0, max_weight=50.0):
    rng = np.random.default_rng(seed)
    src = rng.random((h, w, channels)).astype(np.float32)
    flow = rng.uniform(-max_flow, max_flow, (h, w, 2)).astype(np.float32)
    weight = rng.uniform(0, max_weight, (h, w)).astype(np.float32)
    return src, flow, weight


def test_backward_zero_flow_is_identity():
    src = np.random.default_rng(0).random((5, 4, 3)).astype(np.float32)
    assert np.array_equal(backward_warp(src, np.zeros((5, 4, 2), np.float32)), src)


def test_backward_midpoint():
    src = np.array([[[0.0], [1.0]]], np.float32)
    flow = np.zeros((1, 2, 2), np.float32)
    flow[0, 0] = (0.5, 0.0)
    assert backward_warp(src, flow)[0, 0, 0] == 0.5


def test_backward_constant_image():
    src = np.full((6, 5, 1), 0.3, np.float64)
    flow = np.random.default_rng(1).uniform(-9, 9, (6, 5, 2))
    np.testing.assert_allclose(backward_warp(src, flow), 0.3, atol=1e-15)


def test_backward_matches_pointwise_reference():
    rng = np.random.default_rng(2)
    src = rng.random((5, 6, 2))
    flow = rng.uniform(-4, 4, (5, 6, 2))
    out = backward_warp(src, flow)
    for y in range(5):
        for x in range(6):
            ref = bilinear_reference(src, x + flow[y, x, 0], y + flow[y, x, 1])
            np.testing.assert_allclose(out[y, x], ref, atol=1e-12)


def test_backward_warps_flow_fields():
    flow = np.random.default_rng(3).normal(size=(4, 4, 2)).astype(np.float32)
    assert backward_warp(flow, np.zeros_like(flow)).shape == (4, 4, 2)


def test_dimension_mismatch():
    with pytest.raises(ShapeMismatchError):
        backward_warp(np.zeros((3, 3, 1)), np.zeros((3, 4, 2)))
    with pytest.raises(ShapeMismatchError):
        softmax_splat(np.zeros((3, 3, 1)), np.zeros((3, 3, 2)), np.zeros((2, 3)))


def test_splat_collision_and_hole():
    a, b, c, d = 0.1, 0.4, 0.7, 0.9
    src = np.array([[[a], [b], [c], [d]]], np.float32)
    flow = np.zeros((1, 4, 2), np.float32)
    flow[0, 0] = (1.0, 0.0)
    res = softmax_splat(src, flow, np.zeros((1, 4), np.float32))
    assert res.values[0, 1, 0] == pytest.approx((a + b) / 2, abs=1e-7)
    assert res.holes[0, 0] == 1.0 and res.values[0, 0, 0] == 0.0
    np.testing.assert_array_equal(res.holes[0, 1:], 0.0)
    np.testing.assert_allclose(res.values[0, 2:, 0], [c, d], atol=1e-7)


def test_splat_large_weight_is_finite():
    a, b = 0.1, 0.4
    src = np.array([[[a], [b], [0.7], [0.9]]], np.float32)
    flow = np.zeros((1, 4, 2), np.float32)
    flow[0, 0] = (1.0, 0.0)
    weight = np.array([[50.0, 0.0, 0.0, 0.0]], np.float32)
    res = softmax_splat(src, flow, weight)
    expected = (np.exp(50.0) * a + b) / (np.exp(50.0) + 1)
    assert res.values[0, 1, 0] == pytest.approx(expected, abs=1e-7)
    assert np.all(np.isfinite(res.values)) and np.all(np.isfinite(res.mass))


def test_splat_integer_permutation():
    rng = np.random.default_rng(4)
    h, w = 5, 6
    src = rng.random((h, w, 3)).astype(np.float32)
    perm = rng.permutation(h * w)
    ty, tx = np.divmod(perm, w)
    ys, xs = np.mgrid[0:h, 0:w]
    flow = np.stack([tx.reshape(h, w) - xs, ty.reshape(h, w) - ys], axis=-1).astype(np.float32)
    res = softmax_splat(src, flow, np.zeros((h, w), np.float32))
    expected = np.zeros_like(src)
    expected.reshape(-1, 3)[perm] = src.reshape(-1, 3)
    assert np.array_equal(res.values, expected)
    assert np.array_equal(res.mass, np.ones((h, w)))
    assert not res.hole_mask.any()


@pytest.mark.parametrize("seed", range(5))
def test_splat_matches_triple_loop(seed):
    src, flow, weight = _instance(seed, channels=2)
    ref_values, ref_mass = splat_reference(src, flow, weight)
    res = softmax_splat(src, flow, weight)
    np.testing.assert_allclose(res.values, ref_values, rtol=0, atol=1e-5)
    np.testing.assert_allclose(res.mass, ref_mass, rtol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**20), c=st.floats(0, 60))
def test_splat_shift_invariance(seed, c):
    src, flow, _ = _instance(seed)
    zero = softmax_splat(src, flow, np.zeros(src.shape[:2], np.float32))
    const = softmax_splat(src, flow, np.full(src.shape[:2], c, np.float32))
    np.testing.assert_allclose(const.values, zero.values, atol=1e-6)
    np.testing.assert_array_equal(const.holes, zero.holes)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**20))
def test_splat_mass_conservation(seed):
    src, flow, _ = _instance(seed, max_flow=2.5)
    h, w = src.shape[:2]
    res = softmax_splat(src, flow, np.zeros((h, w), np.float32))
    ys, xs = np.mgrid[0:h, 0:w]
    total = 0.0
    for y in range(h):
        for x in range(w):
            px, py = x + float(flow[y, x, 0]), y + float(flow[y, x, 1])
            for ty in (int(np.floor(py)), int(np.floor(py)) + 1):
                for tx in (int(np.floor(px)), int(np.floor(px)) + 1):
                    if 0 <= tx < w and 0 <= ty < h:
                        total += max(0, 1 - abs(tx - px)) * max(0, 1 - abs(ty - py))
    assert res.mass.sum() == pytest.approx(total, rel=1e-10)
    assert res.mass.sum() <= h * w + 1e-9


def test_splat_mass_equals_pixel_count_for_interior_motion():
    src = np.random.default_rng(5).random((8, 8, 1)).astype(np.float32)
    flow = np.zeros((8, 8, 2), np.float32)
    flow[2:6, 2:6] = (0.3, -0.6)
    res = softmax_splat(src, flow, np.zeros((8, 8), np.float32))
    assert res.mass.sum() == pytest.approx(64.0, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**20), alpha=st.sampled_from([1.0, 50.0, 100.0]))
def test_splat_values_are_convex(seed, alpha):
    src, flow, weight = _instance(seed, max_weight=alpha)
    res = softmax_splat(src, flow, weight)
    live = ~res.hole_mask
    assert np.all(np.isfinite(res.values)) and np.all(np.isfinite(res.mass))
    assert np.all(res.values[live] >= src.min() - 1e-6)
    assert np.all(res.values[live] <= src.max() + 1e-6)


def test_splat_is_deterministic():
    src, flow, weight = _instance(7, h=16, w=16, channels=3)
    a = softmax_splat(src, flow, weight)
    b = softmax_splat(src, flow, weight)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.mass, b.mass)


def test_splat_flow_source_keeps_dtype():
    src, flow, weight = _instance(8)
    res = softmax_splat(flow, flow, weight, PipelineConfig(alpha=100))
    assert res.values.dtype == np.float32 and res.values.shape == flow.shape
    assert res.mass.dtype == np.float64
