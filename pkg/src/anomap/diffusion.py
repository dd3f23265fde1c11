"""Noise schedules, standardized noise fields, forward corruption, and
patch-conditioned reconstruction.

The forward corruption is the single-shot ``x_t = sqrt(abar_t) * x0 +
sqrt(1 - abar_t) * eps`` with ``eps`` drawn either as Gaussian white noise or
as a multi-octave simplex field; either kind is standardized to zero mean and
unit variance over the field so the signal-to-noise schedule is preserved.
Reconstruction is a single denoiser call at a fixed step (no iterative
sampling), optionally patch by patch with the rest of the image left clean as
conditioning context.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from . import simplex
from .imagecore import Image2D

DEFAULT_T = 1000
DEFAULT_BETA_1 = 1e-4
DEFAULT_BETA_T = 0.02
DEFAULT_OCTAVES = 6
DEFAULT_PERSISTENCE = 0.8


@dataclass(frozen=True)
class DiffusionSchedule:
    """Per-step beta/alpha/alpha-bar tables; t is 1-based in [1, T]."""

    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or b.size < 1:
            raise ValueError("schedule needs at least one step")
        if np.any(b <= 0.0) or np.any(b >= 1.0):
            raise ValueError("betas must lie in (0, 1)")
        object.__setattr__(self, "betas", b)

    @property
    def T(self) -> int:
        return self.betas.size

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def alpha_bar(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise ValueError(f"t = {t} outside schedule range [1, {self.T}]")
        return float(self.alpha_bars[t - 1])


def linear_schedule(T: int = DEFAULT_T, beta_1: float = DEFAULT_BETA_1,
                    beta_T: float = DEFAULT_BETA_T) -> DiffusionSchedule:
    """Betas linearly interpolated from beta_1 to beta_T over T steps."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_1 <= beta_T < 1.0):
        raise ValueError("require 0 < beta_1 <= beta_T < 1")
    return DiffusionSchedule(np.linspace(beta_1, beta_T, T))


@dataclass(frozen=True)
class NoiseField:
    """Standardized (zero mean, unit variance) noise raster, keyed by seed."""

    values: np.ndarray
    seed: int
    kind: str  # "gaussian" | "simplex"

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _standardize(v: np.ndarray) -> np.ndarray:
    v = v - v.mean()
    std = v.std()
    if std == 0.0:
        raise ValueError("noise field is constant; cannot standardize")
    return v / std


def derive_seed(seed: int, index: int) -> int:
    """Counter-based child seed; stable across runs and platforms."""
    return int(np.random.SeedSequence(entropy=(int(seed), int(index))).generate_state(1)[0])


def simplex_field(seed: int, width: int, height: int,
                  octaves: int = DEFAULT_OCTAVES,
                  persistence: float = DEFAULT_PERSISTENCE,
                  base_scale: float | None = None) -> NoiseField:
    """Multi-octave simplex noise, standardized; deterministic in seed."""
    if base_scale is None:
        base_scale = float(width)
    raw = simplex.octave_grid(seed, width, height, octaves, persistence, base_scale)
    return NoiseField(_standardize(raw), seed=seed, kind="simplex")


def gaussian_field(seed: int, width: int, height: int) -> NoiseField:
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((height, width))
    return NoiseField(_standardize(raw), seed=seed, kind="gaussian")


def make_field(kind: str, seed: int, width: int, height: int, **kwargs) -> NoiseField:
    if kind == "simplex":
        return simplex_field(seed, width, height, **kwargs)
    if kind == "gaussian":
        return gaussian_field(seed, width, height)
    raise ValueError(f"unknown noise kind {kind!r}")


def forward_noise(x0: Image2D, t: int, noise: NoiseField,
                  sched: DiffusionSchedule) -> Image2D:
    """Corrupt x0 at step t on the foreground only; background stays 0."""
    ab = sched.alpha_bar(t)
    if noise.values.shape != x0.pixels.shape:
        raise ValueError("noise field dimensions do not match image")
    fg = x0.fg_bits()
    out = np.zeros_like(x0.pixels)
    out[fg] = np.sqrt(ab) * x0.pixels[fg] + np.sqrt(1.0 - ab) * noise.values[fg]
    return Image2D(out, x0.foreground)


@dataclass(frozen=True)
class PatchSpec:
    patch_h: int
    patch_w: int
    stride_h: int
    stride_w: int

    def __post_init__(self):
        if self.patch_h < 1 or self.patch_w < 1:
            raise ValueError("patch dimensions must be positive")
        if self.stride_h < 1 or self.stride_w < 1:
            raise ValueError("strides must be >= 1")

    @staticmethod
    def default_for(height: int, width: int) -> "PatchSpec":
        # half-size patches with 50% overlap
        return PatchSpec(max(1, height // 2), max(1, width // 2),
                         max(1, height // 4), max(1, width // 4))


def _axis_starts(dim: int, patch: int, stride: int) -> List[int]:
    if patch > dim:
        raise ValueError("patch larger than image")
    starts = list(range(0, dim - patch + 1, stride))
    if starts[-1] != dim - patch:
        starts.append(dim - patch)
    return starts


def placements(spec: PatchSpec, height: int, width: int) -> List[Tuple[int, int]]:
    """Top-left corners of all patch placements, row-major order."""
    return [(r, c)
            for r in _axis_starts(height, spec.patch_h, spec.stride_h)
            for c in _axis_starts(width, spec.patch_w, spec.stride_w)]


def reconstruct_full(model, x: Image2D, t_test: int, sched: DiffusionSchedule,
                     seed: int, noise_kind: str = "simplex") -> Image2D:
    """Corrupt the whole image at t_test and return the model's x0 estimate."""
    noise = make_field(noise_kind, derive_seed(seed, 0), x.width, x.height)
    x_t = forward_noise(x, t_test, noise, sched)
    return model.denoise(x_t, t_test)


def reconstruct_patched(model, x: Image2D, t_test: int, sched: DiffusionSchedule,
                        spec: PatchSpec, seed: int,
                        noise_kind: str = "simplex") -> Image2D:
    """Noise one patch at a time, condition on the clean remainder, merge.

    Each placement gets its own counter-based noise field, the model sees the
    image with only that patch corrupted, and its prediction is kept inside
    the patch.  Overlaps are averaged with uniform weights via a running mean
    in fixed placement order (bit-identical merge when predictions agree).
    """
    plist = placements(spec, x.height, x.width)
    fg = x.fg_bits()
    ab = sched.alpha_bar(t_test)

    mean = np.zeros_like(x.pixels)
    count = np.zeros(x.pixels.shape, dtype=np.int64)
    for idx, (r0, c0) in enumerate(plist):
        r1, c1 = r0 + spec.patch_h, c0 + spec.patch_w
        noise = make_field(noise_kind, derive_seed(seed, idx),
                           spec.patch_w, spec.patch_h)
        noisy = x.pixels.copy()
        patch_fg = fg[r0:r1, c0:c1]
        patch = noisy[r0:r1, c0:c1]
        patch[patch_fg] = (np.sqrt(ab) * patch[patch_fg]
                           + np.sqrt(1.0 - ab) * noise.values[patch_fg])
        patch[~patch_fg] = 0.0
        pred = model.denoise(Image2D(noisy, x.foreground), t_test)
        count[r0:r1, c0:c1] += 1
        k = count[r0:r1, c0:c1]
        mslice = mean[r0:r1, c0:c1]
        mean[r0:r1, c0:c1] = mslice + (pred.pixels[r0:r1, c0:c1] - mslice) / k
    if np.any(count == 0):
        raise ValueError("patch grid does not cover image")
    mean[~fg] = 0.0
    return Image2D(mean, x.foreground)
