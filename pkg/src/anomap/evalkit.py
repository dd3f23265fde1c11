"""Inference chain, threshold selection, and segmentation metrics.

Scoring a sample runs the full post-processed chain: patch-conditioned
reconstruction, fusion anomaly map, median filtering (default K=5), and
zeroing outside the 3x-eroded foreground.  The binarization threshold is
picked by a greedy grid search maximizing pooled Dice on the unhealthy
validation set and then applied unchanged to the test set; AUPRC is computed
threshold-free over all pooled in-region pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence
from zlib import crc32

import numpy as np

from . import diffusion, imagecore, iqa
from .diffusion import DiffusionSchedule, PatchSpec
from .imagecore import AnomalyMap, BinaryMask
from .iqa import FusionParams, SsimParams
from .phantom import LabeledSample

DEFAULT_GRID_SIZE = 200


@dataclass(frozen=True)
class EvalConfig:
    t_test: int = 750
    ssim: SsimParams = field(default_factory=SsimParams)
    fusion: FusionParams = field(default_factory=FusionParams)
    median_k: int = 5
    erosion_iters: int = 3
    threshold_grid: Optional[np.ndarray] = None  # None: 200 values over [0, max]
    patch: Optional[PatchSpec] = None            # None: default half-size patches
    noise_kind: str = "simplex"


def sample_seed(seed: int, sample_id: str) -> int:
    return diffusion.derive_seed(seed, crc32(sample_id.encode("utf-8")))


def score_sample(model, sample: LabeledSample, cfg: EvalConfig,
                 sched: DiffusionSchedule, seed: int) -> AnomalyMap:
    """Reconstruct, score, smooth, and restrict to the eroded brain mask."""
    if hasattr(model, "set_current"):
        model.set_current(sample.id)
    img = sample.image
    spec = cfg.patch or PatchSpec.default_for(img.height, img.width)
    recon = diffusion.reconstruct_patched(
        model, img, cfg.t_test, sched, spec,
        sample_seed(seed, sample.id), noise_kind=cfg.noise_kind)
    amap = iqa.fusion_anomaly_map(img, recon, cfg.ssim, cfg.fusion)
    amap = imagecore.median_filter(amap, cfg.median_k)
    region = imagecore.erode(sample.foreground, cfg.erosion_iters)
    scores = amap.scores.copy()
    scores[~region.bits] = 0.0
    return AnomalyMap(scores)


def eval_region(sample: LabeledSample, cfg: EvalConfig) -> BinaryMask:
    return imagecore.erode(sample.foreground, cfg.erosion_iters)


def dice(pred: BinaryMask, gt: BinaryMask) -> float:
    """2 |pred & gt| / (|pred| + |gt|); 1.0 when both masks are empty."""
    if pred.bits.shape != gt.bits.shape:
        raise ValueError("mask dimensions do not match")
    denom = pred.count() + gt.count()
    if denom == 0:
        return 1.0
    return 2.0 * int((pred.bits & gt.bits).sum()) / denom


def _pool_pixels(maps: Sequence[AnomalyMap], gts: Sequence[BinaryMask],
                 regions: Sequence[BinaryMask]):
    scores, labels = [], []
    for amap, gt, region in zip(maps, gts, regions):
        bits = region.bits
        scores.append(amap.scores[bits])
        labels.append(gt.bits[bits])
    return np.concatenate(scores), np.concatenate(labels)


def auprc(maps: Sequence[AnomalyMap], gts: Sequence[BinaryMask],
          regions: Sequence[BinaryMask]) -> float:
    """Area under the pooled pixel-level PR curve with atomic tie groups."""
    scores, labels = _pool_pixels(maps, gts, regions)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("AUPRC undefined")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # indices where a strictly lower score starts the next tie group
    boundary = np.nonzero(np.diff(s))[0]
    group_ends = np.append(boundary, s.size - 1)
    tp = np.cumsum(y)[group_ends]
    fp = group_ends + 1 - tp
    precision = tp / (tp + fp)
    recall = tp / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def pooled_dice_curve(maps: Sequence[AnomalyMap], gts: Sequence[BinaryMask],
                      regions: Sequence[BinaryMask],
                      grid: np.ndarray) -> np.ndarray:
    """Pooled Dice (counts summed across samples) at every grid threshold."""
    scores, labels = _pool_pixels(maps, gts, regions)
    n_pos = int(labels.sum())
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # for threshold thr, predictions are score >= thr
    pos_cum = np.concatenate([[0], np.cumsum(y)])
    idx = np.searchsorted(s, grid, side="left")
    tp = n_pos - pos_cum[idx]
    n_pred = s.size - idx
    denom = n_pred + n_pos
    out = np.where(denom > 0, 2.0 * tp / np.maximum(denom, 1), 1.0)
    return out


def default_grid(maps: Sequence[AnomalyMap],
                 size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    top = max(float(m.scores.max()) for m in maps)
    if top <= 0.0:
        top = 1.0
    return np.linspace(0.0, top, size)


def greedy_threshold(val_maps: Sequence[AnomalyMap], val_gts: Sequence[BinaryMask],
                     regions: Sequence[BinaryMask], grid: np.ndarray) -> float:
    """Grid threshold maximizing pooled validation Dice; ties go to the larger."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("threshold grid is empty")
    curve = pooled_dice_curve(val_maps, val_gts, regions, grid)
    return float(grid[np.nonzero(curve == curve.max())[0][-1]])


@dataclass(frozen=True)
class FoldResult:
    dice: float
    auprc: float
    threshold: float
    per_sample_dice: List[float]
    per_sample_ids: List[str]


def evaluate_fold(model, val: Sequence[LabeledSample],
                  test: Sequence[LabeledSample], cfg: EvalConfig,
                  sched: DiffusionSchedule, seed: int,
                  score_fn=None, return_maps: bool = False):
    """Threshold from validation, metrics on test; splits must not share ids.

    ``score_fn(model, sample, cfg, sched, seed) -> AnomalyMap`` may be
    injected to parallelize or stub the scoring step.
    """
    val_ids = {s.id for s in val}
    test_ids = {s.id for s in test}
    if val_ids & test_ids:
        raise ValueError("validation/test leakage")
    fn = score_fn or score_sample

    val_maps = [fn(model, s, cfg, sched, seed) for s in val]
    val_regions = [eval_region(s, cfg) for s in val]
    val_gts = [s.anomaly_gt for s in val]
    grid = (cfg.threshold_grid if cfg.threshold_grid is not None
            else default_grid(val_maps))
    thr = greedy_threshold(val_maps, val_gts, val_regions, grid)

    test_maps = [fn(model, s, cfg, sched, seed) for s in test]
    test_regions = [eval_region(s, cfg) for s in test]
    test_gts = [s.anomaly_gt for s in test]

    tp = pred_n = pos_n = 0
    per_sample = []
    for amap, gt, region in zip(test_maps, test_gts, test_regions):
        pred = BinaryMask((amap.scores >= thr) & region.bits)
        gt_in = BinaryMask(gt.bits & region.bits)
        per_sample.append(dice(pred, gt_in))
        tp += int((pred.bits & gt_in.bits).sum())
        pred_n += pred.count()
        pos_n += gt_in.count()
    pooled = 1.0 if pred_n + pos_n == 0 else 2.0 * tp / (pred_n + pos_n)
    area = auprc(test_maps, test_gts, test_regions)
    result = FoldResult(pooled, area, thr, per_sample, [s.id for s in test])
    if return_maps:
        return result, test_maps
    return result
