"""Dataset intensity statistics, the average intensity ratio (AIR), and the
intensity-flip pre-processing decision.

The flip rule is ``p(x) = 1 - x`` on the foreground exactly when the normal
region's mean intensity exceeds 0.5, otherwise identity.  Under the prior
``0 < mu_n < mu_a < 1`` the flip never decreases the AIR:
``(1 - mu_n) / (1 - mu_a) > mu_a / mu_n`` whenever ``0.5 < mu_n < mu_a < 1``.
``verify_air_monotone`` evaluates that inequality numerically for a given
pair of region means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import Image2D


@dataclass(frozen=True)
class DatasetStats:
    mu_n: float  # mean intensity of normal foreground
    mu_a: float  # mean intensity of anomalous regions
    n_pixels_normal: int
    n_pixels_anomalous: int

    def __post_init__(self):
        if not (np.isfinite(self.mu_n) and np.isfinite(self.mu_a)):
            raise ValueError("region means must be finite")
        if self.n_pixels_normal <= 0 or self.n_pixels_anomalous <= 0:
            raise ValueError("both regions must be nonempty")


@dataclass(frozen=True)
class PreprocessDecision:
    flip: bool
    source_stats: DatasetStats


def dataset_stats(samples) -> DatasetStats:
    """Pooled region means across labeled samples.

    Anomalous pixels are those flagged by each sample's ground truth; normal
    pixels are the remaining foreground.  Statistics should come from the
    unhealthy validation split only, never from test data.
    """
    sum_n = sum_a = 0.0
    cnt_n = cnt_a = 0
    for s in samples:
        fg = s.foreground.bits
        gt = s.anomaly_gt.bits
        normal = fg & ~gt
        sum_n += float(s.image.pixels[normal].sum())
        cnt_n += int(normal.sum())
        sum_a += float(s.image.pixels[gt].sum())
        cnt_a += int(gt.sum())
    if cnt_a == 0:
        raise ValueError("stats require unhealthy validation data")
    if cnt_n == 0:
        raise ValueError("no normal foreground pixels")
    return DatasetStats(sum_n / cnt_n, sum_a / cnt_a, cnt_n, cnt_a)


def air(stats: DatasetStats) -> float:
    """max(mu_a, mu_n) / min(mu_a, mu_n); always >= 1."""
    if stats.mu_a <= 0.0 or stats.mu_n <= 0.0:
        raise ValueError("AIR undefined")
    hi = max(stats.mu_a, stats.mu_n)
    lo = min(stats.mu_a, stats.mu_n)
    return hi / lo


def decide(stats: DatasetStats) -> PreprocessDecision:
    """Flip exactly when the normal mean exceeds 0.5 (boundary stays identity)."""
    return PreprocessDecision(flip=stats.mu_n > 0.5, source_stats=stats)


def apply(img: Image2D, d: PreprocessDecision) -> Image2D:
    """Intensity flip 1 - x on the foreground when decided; background untouched."""
    fg = img.fg_bits()
    vals = img.pixels[fg]
    if np.any(vals < 0.0) or np.any(vals > 1.0):
        raise ValueError("apply requires normalized input")
    if not d.flip:
        return img
    out = img.pixels.copy()
    out[fg] = 1.0 - out[fg]
    return Image2D(out, img.foreground)


@dataclass(frozen=True)
class AirMonotoneReport:
    air_before: float
    air_after: float
    holds: bool


def verify_air_monotone(stats: DatasetStats) -> AirMonotoneReport:
    """Analytic AIR before and after the decided transform.

    Requires the prior 0 < mu_n < mu_a < 1.  In the flip branch the post-flip
    ratio is (1 - mu_n) / (1 - mu_a); in the identity branch it is unchanged.
    """
    if not (0.0 < stats.mu_n < stats.mu_a < 1.0):
        raise ValueError("proof preconditions not met")
    before = air(stats)
    if decide(stats).flip:
        after = (1.0 - stats.mu_n) / (1.0 - stats.mu_a)
    else:
        after = before
    return AirMonotoneReport(before, after, after >= before - 1e-12)


def stats_csv(stats: DatasetStats) -> str:
    """CSV report ``mu_n,mu_a,air_before,air_after,flip`` with a header row."""
    d = decide(stats)
    before = air(stats)
    if d.flip:
        flipped = DatasetStats(1.0 - stats.mu_n, 1.0 - stats.mu_a,
                               stats.n_pixels_normal, stats.n_pixels_anomalous)
        after = air(flipped)
    else:
        after = before
    return ("mu_n,mu_a,air_before,air_after,flip\n"
            f"{stats.mu_n:.12g},{stats.mu_a:.12g},"
            f"{before:.12g},{after:.12g},{int(d.flip)}\n")
