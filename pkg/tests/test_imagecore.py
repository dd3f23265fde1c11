import numpy as np
import pytest

from anomap.imagecore import (AnomalyMap, BinaryMask, Image2D, erode,
                              median_filter, normalize_foreground, window_stats)


def test_binary_mask_requires_2d():
    with pytest.raises(ValueError):
        BinaryMask(np.ones(5, dtype=bool))


def test_image_rejects_non_finite():
    with pytest.raises(ValueError):
        Image2D(np.array([[0.0, np.nan]]))


def test_image_rejects_mismatched_mask():
    with pytest.raises(ValueError):
        Image2D(np.zeros((4, 4)), BinaryMask(np.ones((3, 3), dtype=bool)))


def test_anomaly_map_rejects_negative():
    with pytest.raises(ValueError):
        AnomalyMap(np.array([[-0.1, 0.0]]))


def test_normalize_maps_percentiles_to_unit_range():
    rng = np.random.default_rng(0)
    px = rng.uniform(10.0, 50.0, (32, 32))
    mask = BinaryMask(np.ones((32, 32), dtype=bool))
    res = normalize_foreground(Image2D(px), mask, lo_pct=0.0, hi_pct=0.99)
    assert not res.degenerate
    vals = res.image.pixels[mask.bits]
    assert vals.min() == 0.0
    assert vals.max() == 1.0
    lo = np.quantile(px, 0.0)
    hi = np.quantile(px, 0.99)
    expected = np.clip((px - lo) / (hi - lo), 0.0, 1.0)
    assert np.allclose(res.image.pixels, expected, atol=1e-12)


def test_normalize_zeroes_background():
    px = np.full((8, 8), 3.0)
    px[0, 0] = 1.0
    mask = np.zeros((8, 8), dtype=bool)
    mask[2:6, 2:6] = True
    px[mask] = np.linspace(0.0, 1.0, mask.sum())
    res = normalize_foreground(Image2D(px), BinaryMask(mask))
    assert np.all(res.image.pixels[~mask] == 0.0)


def test_normalize_constant_foreground_is_degenerate():
    mask = BinaryMask(np.ones((8, 8), dtype=bool))
    res = normalize_foreground(Image2D(np.full((8, 8), 0.7)), mask)
    assert res.degenerate
    assert np.all(res.image.pixels == 0.5)


def test_normalize_rejects_empty_foreground():
    with pytest.raises(ValueError):
        normalize_foreground(Image2D(np.zeros((4, 4))),
                             BinaryMask(np.zeros((4, 4), dtype=bool)))


def test_normalize_rejects_bad_percentiles():
    mask = BinaryMask(np.ones((4, 4), dtype=bool))
    with pytest.raises(ValueError):
        normalize_foreground(Image2D(np.zeros((4, 4))), mask,
                             lo_pct=0.5, hi_pct=0.4)


def test_window_stats_matches_direct_computation():
    rng = np.random.default_rng(1)
    x = Image2D(rng.uniform(0, 1, (10, 12)))
    y = Image2D(rng.uniform(0, 1, (10, 12)))
    W = 5
    r = W // 2
    xp = np.pad(x.pixels, r, mode="edge")
    yp = np.pad(y.pixels, r, mode="edge")
    for row, col in [(0, 0), (4, 7), (9, 11), (5, 0)]:
        ws = window_stats(x, y, row, col, W)
        wx = xp[row:row + W, col:col + W]
        wy = yp[row:row + W, col:col + W]
        assert ws.mean_x == pytest.approx(wx.mean(), abs=1e-15)
        assert ws.mean_y == pytest.approx(wy.mean(), abs=1e-15)
        assert ws.var_x == pytest.approx(wx.var(), abs=1e-15)
        assert ws.var_y == pytest.approx(wy.var(), abs=1e-15)
        assert ws.cov_xy == pytest.approx(
            ((wx - wx.mean()) * (wy - wy.mean())).mean(), abs=1e-15)


def test_window_stats_requires_odd_window():
    x = Image2D(np.zeros((6, 6)))
    with pytest.raises(ValueError):
        window_stats(x, x, 0, 0, 4)


def test_median_filter_matches_brute_force():
    rng = np.random.default_rng(2)
    a = rng.uniform(0, 1, (9, 9))
    out = median_filter(AnomalyMap(a), 3).scores
    ap = np.pad(a, 1, mode="edge")
    for i in range(9):
        for j in range(9):
            assert out[i, j] == np.median(ap[i:i + 3, j:j + 3])


def test_median_filter_requires_odd_kernel():
    with pytest.raises(ValueError):
        median_filter(AnomalyMap(np.zeros((4, 4))), 4)


def test_erode_zero_iterations_is_identity():
    rng = np.random.default_rng(3)
    m = BinaryMask(rng.uniform(size=(8, 8)) > 0.5)
    out = erode(m, 0)
    assert np.array_equal(out.bits, m.bits)
    assert out.bits is not m.bits  # defensive copy


def test_erode_shrinks_square_by_one_ring():
    m = np.zeros((7, 7), dtype=bool)
    m[1:6, 1:6] = True
    out = erode(BinaryMask(m), 1)
    expect = np.zeros((7, 7), dtype=bool)
    expect[2:5, 2:5] = True
    assert np.array_equal(out.bits, expect)


def test_erode_treats_border_as_background():
    out = erode(BinaryMask(np.ones((5, 5), dtype=bool)), 1)
    expect = np.zeros((5, 5), dtype=bool)
    expect[1:4, 1:4] = True
    assert np.array_equal(out.bits, expect)


def test_erode_rejects_negative_iterations():
    with pytest.raises(ValueError):
        erode(BinaryMask(np.ones((4, 4), dtype=bool)), -1)
