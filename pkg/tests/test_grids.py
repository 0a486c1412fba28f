"""Resampling, normalization and flatten/unflatten plumbing."""

import numpy as np
import pytest

from protomap import (
    FeatureMap,
    TokenGrid,
    TokenMatrix,
    ValidationError,
    flatten,
    l2_normalize,
    resize_bilinear,
    resize_nearest,
    stack_views,
    unflatten,
)
from protomap.grids import _bilinear


def test_identity_resize_is_bit_exact():
    rng = np.random.default_rng(0)
    src = FeatureMap(rng.standard_normal((16, 16, 5)).astype(np.float32))
    out = resize_bilinear(src, 16)
    assert np.array_equal(out.data, src.data)


def test_constant_field_survives_any_resize():
    src = FeatureMap(np.full((7, 13, 2), 0.7, np.float32))
    for d in (1, 4, 16, 33):
        out = resize_bilinear(src, d)
        assert np.array_equal(out.data, np.full((d, d, 2), 0.7, np.float32))


def test_bilinear_closed_form_1x2_to_width_4():
    src = np.array([[[0.0], [1.0]]], dtype=np.float64)
    out = _bilinear(src, 1, 4)
    assert np.allclose(out[0, :, 0], [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], atol=1e-12)


def test_bilinear_endpoints_hit_source_corners():
    rng = np.random.default_rng(1)
    src = rng.standard_normal((5, 9, 3))
    out = _bilinear(src, 11, 21)
    assert np.allclose(out[0, 0], src[0, 0])
    assert np.allclose(out[-1, -1], src[-1, -1])
    assert np.allclose(out[0, -1], src[0, -1])
    assert np.allclose(out[-1, 0], src[-1, 0])


def test_bilinear_matches_pointwise_oracle():
    # direct two-axis lerp at every output location
    rng = np.random.default_rng(2)
    src = rng.standard_normal((4, 6, 2))
    out_h, out_w = 9, 5
    out = _bilinear(src, out_h, out_w)
    for i in range(out_h):
        for j in range(out_w):
            y = i * (src.shape[0] - 1) / (out_h - 1)
            x = j * (src.shape[1] - 1) / (out_w - 1)
            y0, x0 = int(np.floor(y)), int(np.floor(x))
            y1, x1 = min(y0 + 1, src.shape[0] - 1), min(x0 + 1, src.shape[1] - 1)
            fy, fx = y - y0, x - x0
            top = src[y0, x0] + fx * (src[y0, x1] - src[y0, x0])
            bot = src[y1, x0] + fx * (src[y1, x1] - src[y1, x0])
            assert np.allclose(out[i, j], top + fy * (bot - top), atol=1e-12)


def test_nearest_ties_go_to_smaller_index():
    # upscaling 2 -> 3 puts the middle output exactly between sources
    src = FeatureMap(np.array([[[0.0], [1.0]], [[0.0], [1.0]]], dtype=np.float32))
    out = resize_nearest(src, 3)
    assert out.data[0, 1, 0] == 0.0


def test_nearest_matches_bilinear_on_identity():
    rng = np.random.default_rng(3)
    src = FeatureMap(rng.standard_normal((8, 8, 4)).astype(np.float32))
    assert np.array_equal(resize_nearest(src, 8).data, src.data)


def test_resize_rejects_bad_targets():
    src = FeatureMap(np.zeros((4, 4, 1), np.float32))
    with pytest.raises(ValidationError):
        resize_bilinear(src, 0)
    with pytest.raises(ValidationError):
        resize_nearest(src, -1)


def test_l2_normalize_rows_unit_norm():
    rng = np.random.default_rng(4)
    m = TokenMatrix(rng.standard_normal((50, 7)).astype(np.float32) * 10)
    out = l2_normalize(m)
    norms = np.linalg.norm(out.data.astype(np.float64), axis=1)
    assert np.allclose(norms, 1.0, atol=1e-6)


def test_l2_normalize_zero_rows_pass_through():
    m = TokenMatrix(np.zeros((3, 4), np.float32))
    out = l2_normalize(m)
    assert np.array_equal(out.data, np.zeros((3, 4), np.float32))


def test_l2_normalize_rejects_non_finite():
    m = TokenMatrix(np.array([[1.0, np.nan]], dtype=np.float32))
    with pytest.raises(ValidationError):
        l2_normalize(m)


def test_flatten_unflatten_round_trip():
    rng = np.random.default_rng(5)
    grid = TokenGrid(rng.standard_normal((6, 6, 3)).astype(np.float32))
    back = unflatten(flatten(grid), 6)
    assert np.array_equal(back.data, grid.data)


def test_flatten_is_row_major():
    grid = TokenGrid(np.arange(8, dtype=np.float32).reshape(2, 2, 2))
    m = flatten(grid)
    assert np.array_equal(m.data[1], grid.data[0, 1])


def test_stack_views_concatenates_view_major():
    a = TokenMatrix(np.zeros((4, 3), np.float32))
    b = TokenMatrix(np.ones((4, 3), np.float32))
    out = stack_views([a, b])
    assert out.rows == 8 and out.n_views == 2
    assert np.array_equal(out.data[4:], np.ones((4, 3), np.float32))
    with pytest.raises(ValidationError):
        stack_views([a, TokenMatrix(np.ones((4, 2), np.float32))])


def test_feature_map_expands_2d_to_one_channel():
    fm = FeatureMap(np.zeros((5, 6), np.float32))
    assert fm.channels == 1 and fm.height == 5 and fm.width == 6


def test_token_grid_rejects_non_square():
    with pytest.raises(ValidationError):
        TokenGrid(np.zeros((4, 5, 2), np.float32))
