import numpy as np
import pytest

from anomap.simplex import octave_grid, simplex2d, _perm_table


def test_same_seed_is_bit_identical():
    a = octave_grid(5, 24, 24, 4, 0.6, 16.0)
    b = octave_grid(5, 24, 24, 4, 0.6, 16.0)
    assert np.array_equal(a, b)


def test_different_seeds_differ():
    a = octave_grid(0, 24, 24, 4, 0.6, 16.0)
    b = octave_grid(1, 24, 24, 4, 0.6, 16.0)
    assert not np.array_equal(a, b)


def test_single_octave_range():
    vals = simplex2d(np.linspace(0, 37, 2000), np.linspace(0, 53, 2000),
                     _perm_table(3))
    assert np.all(np.abs(vals) <= 1.0)
    assert vals.std() > 0.0


def test_field_is_smooth_at_large_scale():
    # neighboring pixels sample nearby points of a continuous field, so the
    # per-pixel increments are small relative to the overall spread
    g = octave_grid(2, 64, 64, 1, 0.5, 64.0)
    step = max(np.abs(np.diff(g, axis=0)).max(),
               np.abs(np.diff(g, axis=1)).max())
    spread = g.max() - g.min()
    assert step < 0.2 * spread


def test_octave_weights_follow_persistence():
    one = octave_grid(4, 32, 32, 1, 0.5, 32.0)
    two = octave_grid(4, 32, 32, 2, 0.5, 32.0)
    # the first octave is shared; the second adds at most persistence**1
    assert np.all(np.abs(two - one) <= 0.5 + 1e-12)
    assert not np.array_equal(one, two)


def test_parameter_validation():
    with pytest.raises(ValueError):
        octave_grid(0, 8, 8, 0, 0.5, 8.0)
    with pytest.raises(ValueError):
        octave_grid(0, 8, 8, 2, 0.0, 8.0)
    with pytest.raises(ValueError):
        octave_grid(0, 8, 8, 2, 0.5, 0.0)
