"""Dataset directory layout: per-split F32R rasters plus PGM masks.

Layout::

    <root>/dataset.tsv          # id <tab> split <tab> profile
    <root>/<split>/<id>.f32r    # image
    <root>/<split>/<id>.fg.pgm  # foreground mask
    <root>/<split>/<id>.gt.pgm  # anomaly ground truth
"""

from __future__ import annotations

from pathlib import Path

from . import fileio
from .imagecore import Image2D
from .phantom import Dataset, LabeledSample

SPLITS = ("train", "val", "test")


def save_dataset(ds: Dataset, root) -> None:
    root = Path(root)
    rows = []
    for split, samples in zip(SPLITS, (ds.train_healthy, ds.val_abnormal,
                                       ds.test_abnormal)):
        d = fileio.ensure_dir(root / split)
        for s in samples:
            fileio.write_f32r(d / f"{s.id}.f32r", s.image.pixels)
            fileio.write_pgm_mask(d / f"{s.id}.fg.pgm", s.foreground)
            fileio.write_pgm_mask(d / f"{s.id}.gt.pgm", s.anomaly_gt)
            rows.append(f"{s.id}\t{split}\t{s.profile}\n")
    with open(root / "dataset.tsv", "w", encoding="utf-8") as f:
        f.writelines(rows)


def load_dataset(root) -> Dataset:
    root = Path(root)
    manifest = root / "dataset.tsv"
    if not manifest.exists():
        raise FileNotFoundError(f"{manifest}: dataset manifest not found")
    by_split = {s: [] for s in SPLITS}
    with open(manifest, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{manifest}:{lineno}: expected id, split, profile")
            sid, split, profile = parts
            if split not in by_split:
                raise ValueError(f"{manifest}:{lineno}: unknown split {split!r}")
            d = root / split
            img = fileio.read_f32r(d / f"{sid}.f32r")
            fg = fileio.read_pgm_mask(d / f"{sid}.fg.pgm")
            gt = fileio.read_pgm_mask(d / f"{sid}.gt.pgm")
            by_split[split].append(
                LabeledSample(sid, Image2D(img, fg), fg, gt, profile))
    return Dataset(by_split["train"], by_split["val"], by_split["test"])
