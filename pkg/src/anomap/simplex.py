"""Seeded 2-D simplex (gradient) noise, vectorized over coordinate grids.

Classic two-dimensional simplex noise: skew the plane onto a grid of
equilateral triangles, pick pseudo-random gradients at the three corners of
the containing simplex via a seeded permutation table, and sum the radially
attenuated corner contributions.  The conventional factor of 70 scales single
octave output into [-1, 1].
"""

from __future__ import annotations

import numpy as np

_F2 = 0.5 * (np.sqrt(3.0) - 1.0)
_G2 = (3.0 - np.sqrt(3.0)) / 6.0

# 8 unit-ish gradient directions, as in the reference implementation
_GRAD = np.array([
    [1, 1], [-1, 1], [1, -1], [-1, -1],
    [1, 0], [-1, 0], [0, 1], [0, -1],
], dtype=np.float64)


def _perm_table(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    p = rng.permutation(256)
    return np.concatenate([p, p]).astype(np.int64)


def simplex2d(xs: np.ndarray, ys: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Raw simplex noise at the given coordinates; output in [-1, 1]."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)

    s = (xs + ys) * _F2
    i = np.floor(xs + s).astype(np.int64)
    j = np.floor(ys + s).astype(np.int64)
    t = (i + j) * _G2
    x0 = xs - (i - t)
    y0 = ys - (j - t)

    # offsets of the middle corner: lower triangle when x0 > y0
    i1 = (x0 > y0).astype(np.int64)
    j1 = 1 - i1

    x1 = x0 - i1 + _G2
    y1 = y0 - j1 + _G2
    x2 = x0 - 1.0 + 2.0 * _G2
    y2 = y0 - 1.0 + 2.0 * _G2

    ii = i & 255
    jj = j & 255
    gi0 = perm[ii + perm[jj]] % 8
    gi1 = perm[ii + i1 + perm[jj + j1]] % 8
    gi2 = perm[ii + 1 + perm[jj + 1]] % 8

    def corner(gx, cx, cy):
        tt = 0.5 - cx * cx - cy * cy
        g = _GRAD[gx]
        val = tt * tt * tt * tt * (g[..., 0] * cx + g[..., 1] * cy)
        return np.where(tt > 0.0, val, 0.0)

    return 70.0 * (corner(gi0, x0, y0) + corner(gi1, x1, y1) + corner(gi2, x2, y2))


def octave_grid(seed: int, width: int, height: int, octaves: int,
                persistence: float, base_scale: float) -> np.ndarray:
    """Sum of ``persistence**o`` weighted octaves on a pixel grid, unnormalized."""
    if octaves < 1:
        raise ValueError("octaves must be >= 1")
    if not 0.0 < persistence <= 1.0:
        raise ValueError("persistence must lie in (0, 1]")
    if base_scale <= 0.0:
        raise ValueError("base_scale must be positive")
    perm = _perm_table(seed)
    cols, rows = np.meshgrid(np.arange(width, dtype=np.float64),
                             np.arange(height, dtype=np.float64))
    out = np.zeros((height, width))
    for o in range(octaves):
        scale = base_scale / (2.0 ** o)
        # shift octaves apart so they do not share lattice alignment
        off = 31.0 * (o + 1)
        out += (persistence ** o) * simplex2d(cols / scale + off, rows / scale + off, perm)
    return out
