"""SSIM map, SSIM/L1 losses, the fusion quality loss, and its analytic gradient.

The sliding SSIM value at pixel (i, j) is computed over the W x W window
centered there, with uniform (box) weighting, population variances, and
replicate-edge padding, so the quality map has the same shape as the input::

    SSIM = (2*mu_x*mu_y + C1) * (2*cov_xy + C2)
           -----------------------------------------
           (mu_x^2 + mu_y^2 + C1) * (var_x + var_y + C2)

The scalar SSIM loss is (1 - mean SSIM over masked window centers) / 2 and
the fusion loss blends it with the masked mean absolute error:
``alpha * ssim_loss + (1 - alpha) * l1``.  ``fusion_loss_grad`` provides the
exact derivative of that scalar with respect to the reconstruction, including
the contribution of replicated border pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imagecore import AnomalyMap, BinaryMask, Image2D

__all__ = [
    "SsimParams", "FusionParams", "AnomalyMap",
    "ssim_map", "ssim_loss", "l1_loss", "fusion_loss",
    "fusion_anomaly_map", "fusion_loss_grad",
]


@dataclass(frozen=True)
class SsimParams:
    """Window geometry, stability constants, and component exponents.

    Defaults: W=5, S=1, C1=(0.01*L)^2, C2=(0.03*L)^2 with data range L=1,
    C3=C2/2, and unit exponents, which collapses the three-component product
    to the simplified two-factor form used throughout.
    """

    W: int = 5
    S: int = 1
    C1: float = 1e-4
    C2: float = 9e-4
    C3: float = 4.5e-4
    exp_l: float = 1.0
    exp_c: float = 1.0
    exp_s: float = 1.0

    def __post_init__(self):
        if self.W % 2 != 1 or self.W < 1:
            raise ValueError("window size must be odd and positive")
        if self.S < 1:
            raise ValueError("stride must be >= 1")
        if min(self.C1, self.C2, self.C3) <= 0:
            raise ValueError("stability constants must be positive")


@dataclass(frozen=True)
class FusionParams:
    """Blend weight of the SSIM term; the L1 term gets ``1 - alpha``."""

    alpha: float = 0.84

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def _box_mean(a: np.ndarray, W: int) -> np.ndarray:
    # replicate-edge box mean, same shape as input
    return ndimage.uniform_filter(a, size=W, mode="nearest")


def _window_moments(x: np.ndarray, y: np.ndarray, W: int):
    mx = _box_mean(x, W)
    my = _box_mean(y, W)
    vx = _box_mean(x * x, W) - mx * mx
    vy = _box_mean(y * y, W) - my * my
    cov = _box_mean(x * y, W) - mx * my
    np.maximum(vx, 0.0, out=vx)
    np.maximum(vy, 0.0, out=vy)
    return mx, my, vx, vy, cov


def ssim_map(x: Image2D, y: Image2D, p: SsimParams = SsimParams()) -> np.ndarray:
    """Per-pixel sliding SSIM raster; values lie in [-1, 1]."""
    if x.pixels.shape != y.pixels.shape:
        raise ValueError("image dimensions do not match")
    mx, my, vx, vy, cov = _window_moments(x.pixels, y.pixels, p.W)
    num = (2.0 * mx * my + p.C1) * (2.0 * cov + p.C2)
    den = (mx * mx + my * my + p.C1) * (vx + vy + p.C2)
    out = num / den
    return out[::p.S, ::p.S] if p.S != 1 else out


def ssim_components(x: Image2D, y: Image2D, p: SsimParams = SsimParams()) -> np.ndarray:
    """Three-component SSIM l^a * c^b * s^g; equals :func:`ssim_map` for the defaults."""
    if x.pixels.shape != y.pixels.shape:
        raise ValueError("image dimensions do not match")
    mx, my, vx, vy, cov = _window_moments(x.pixels, y.pixels, p.W)
    sx = np.sqrt(vx)
    sy = np.sqrt(vy)
    lum = (2.0 * mx * my + p.C1) / (mx * mx + my * my + p.C1)
    con = (2.0 * sx * sy + p.C2) / (vx + vy + p.C2)
    struct = (cov + p.C3) / (sx * sy + p.C3)
    return lum ** p.exp_l * con ** p.exp_c * struct ** p.exp_s


def _require_mask(x: Image2D, mask: BinaryMask) -> np.ndarray:
    if mask.bits.shape != x.pixels.shape:
        raise ValueError("mask dimensions do not match image")
    if mask.count() == 0:
        raise ValueError("no windows")
    return mask.bits


def ssim_loss(x: Image2D, y: Image2D, p: SsimParams = SsimParams(),
              mask: BinaryMask | None = None) -> float:
    """(1 - mean SSIM over masked window centers) / 2; lies in [0, 1]."""
    if mask is None:
        mask = BinaryMask(np.ones(x.pixels.shape, dtype=bool))
    bits = _require_mask(x, mask)
    smap = ssim_map(x, y, p)
    return float((1.0 - smap[bits].mean()) / 2.0)


def l1_loss(x: Image2D, y: Image2D, mask: BinaryMask | None = None) -> float:
    """Mean absolute error over the masked pixels."""
    if mask is None:
        mask = BinaryMask(np.ones(x.pixels.shape, dtype=bool))
    bits = _require_mask(x, mask)
    return float(np.abs(x.pixels - y.pixels)[bits].mean())


def fusion_loss(x: Image2D, y: Image2D, p: SsimParams = SsimParams(),
                f: FusionParams = FusionParams(),
                mask: BinaryMask | None = None) -> float:
    """alpha * ssim_loss + (1 - alpha) * masked mean absolute error."""
    return f.alpha * ssim_loss(x, y, p, mask) + (1.0 - f.alpha) * l1_loss(x, y, mask)


def fusion_anomaly_map(x: Image2D, y: Image2D, p: SsimParams = SsimParams(),
                       f: FusionParams = FusionParams()) -> AnomalyMap:
    """Per-pixel anomaly score: alpha * (1 - SSIM)/2 + (1 - alpha) * |x - y|."""
    if x.pixels.shape != y.pixels.shape:
        raise ValueError("image dimensions do not match")
    ssim_err = (1.0 - ssim_map(x, y, p)) / 2.0
    scores = f.alpha * ssim_err + (1.0 - f.alpha) * np.abs(x.pixels - y.pixels)
    # SSIM lies in [-1, 1] so the blend is nonnegative; guard rounding only
    np.maximum(scores, 0.0, out=scores)
    return AnomalyMap(scores)


def fusion_loss_grad(x: Image2D, y: Image2D, p: SsimParams = SsimParams(),
                     f: FusionParams = FusionParams(),
                     mask: BinaryMask | None = None) -> np.ndarray:
    """Exact gradient of :func:`fusion_loss` with respect to y, per pixel.

    The SSIM part differentiates the two-factor formula through each window's
    y-statistics (mean, variance, covariance) and accumulates over every
    window containing the pixel.  Border pixels enter multiple windows via
    replicate padding; those contributions are folded back onto their source
    pixels so the result matches finite differences of the actual loss.
    The gradient of |t| at t = 0 is taken to be 0.
    """
    if mask is None:
        mask = BinaryMask(np.ones(x.pixels.shape, dtype=bool))
    bits = _require_mask(x, mask)
    if x.pixels.shape != y.pixels.shape:
        raise ValueError("image dimensions do not match")

    xa, ya = x.pixels, y.pixels
    H, Wd = xa.shape
    W = p.W
    r = W // 2
    n = W * W
    K = int(bits.sum())

    mx, my, vx, vy, cov = _window_moments(xa, ya, W)
    A1 = 2.0 * mx * my + p.C1
    A2 = 2.0 * cov + p.C2
    B1 = mx * mx + my * my + p.C1
    B2 = vx + vy + p.C2

    # dSSIM / d(window y-statistics), one value per window center
    d_mu = 2.0 * A2 * (mx * B1 - my * A1) / (B1 * B1 * B2)
    d_var = -A1 * A2 / (B1 * B2 * B2)
    d_cov = 2.0 * A1 / (B1 * B2)

    # chain through L_SSIM = (1 - mean_k SSIM_k) / 2 and the fusion blend
    scale = -f.alpha / (2.0 * K)
    c_mu = np.where(bits, scale * d_mu, 0.0)
    c_var = np.where(bits, scale * d_var, 0.0)
    c_cov = np.where(bits, scale * d_cov, 0.0)

    # box-sum each center map over the windows containing every padded pixel
    def center_boxsum(c: np.ndarray) -> np.ndarray:
        emb = np.zeros((H + 2 * r, Wd + 2 * r))
        emb[r:r + H, r:r + Wd] = c
        return ndimage.uniform_filter(emb, size=W, mode="constant", cval=0.0) * n

    s_mu = center_boxsum(c_mu)
    s_var = center_boxsum(c_var)
    s_var_my = center_boxsum(c_var * my)
    s_cov = center_boxsum(c_cov)
    s_cov_mx = center_boxsum(c_cov * mx)

    xp = np.pad(xa, r, mode="edge")
    yp = np.pad(ya, r, mode="edge")
    g_pad = (s_mu + 2.0 * (yp * s_var - s_var_my) + (xp * s_cov - s_cov_mx)) / n

    # fold replicate-padded positions back onto their source pixels
    src_r = np.clip(np.arange(H + 2 * r) - r, 0, H - 1)
    src_c = np.clip(np.arange(Wd + 2 * r) - r, 0, Wd - 1)
    grad = np.zeros((H, Wd))
    rr, cc = np.meshgrid(src_r, src_c, indexing="ij")
    np.add.at(grad, (rr, cc), g_pad)

    grad[bits] += (1.0 - f.alpha) * np.sign(ya - xa)[bits] / K
    return grad
