"""Command-line front end.

Subcommands:
  phantom   materialize a synthetic dataset on disk
  run       train and evaluate one variant across folds
  ablate    run all four variants with shared seeds
  iqa       compare two F32R rasters (losses and optional anomaly map)
  stats     intensity statistics and flip decision for a dataset directory

The log level is controlled by the ``ANOMAP_LOG`` environment variable
(error, info, debug; default error).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import airprep, config, datasetio, fileio, iqa, phantom, pipeline
from .imagecore import Image2D

log = logging.getLogger("anomap")


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO,
             "debug": logging.DEBUG}.get(os.environ.get("ANOMAP_LOG", "error"),
                                         logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")


def _load_config(args) -> config.RunConfig:
    if args.config:
        cfg = config.parse_file(args.config)
    else:
        cfg = config.RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    return cfg.validate()


def cmd_phantom(args) -> int:
    cfg = _load_config(args)
    ds = pipeline.load_fold_dataset(cfg, fold=0)
    datasetio.save_dataset(ds, cfg.out)
    print(f"wrote {len(ds.all_samples())} samples to {cfg.out}")
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args)
    report = pipeline.run(cfg, workers=args.workers, dump_maps=args.dump_maps)
    dm, dsd, am, asd = report.mean_std()
    print(f"dice {dm:.4f}+-{dsd:.4f}  auprc {am:.4f}+-{asd:.4f}  "
          f"({report.wall_clock:.1f}s)")
    return 0 if report.complete else 1


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    reports = pipeline.ablate(cfg, workers=args.workers)
    ok = True
    for variant, report in reports.items():
        dm, dsd, am, asd = report.mean_std()
        print(f"{variant:7s} dice {dm:.4f}+-{dsd:.4f}  auprc {am:.4f}+-{asd:.4f}")
        ok = ok and report.complete
    return 0 if ok else 1


def cmd_iqa(args) -> int:
    try:
        a = fileio.read_f32r(args.image_a)
        b = fileio.read_f32r(args.image_b)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if a.shape != b.shape:
        print(f"error: size mismatch {a.shape} vs {b.shape}", file=sys.stderr)
        return 1
    x, y = Image2D(a), Image2D(b)
    p = iqa.SsimParams(W=args.window)
    f = iqa.FusionParams(alpha=args.alpha)
    print(f"ssim_loss {iqa.ssim_loss(x, y, p):.6g}")
    print(f"l1 {iqa.l1_loss(x, y):.6g}")
    print(f"fusion_loss {iqa.fusion_loss(x, y, p, f):.6g}")
    if args.map:
        amap = iqa.fusion_anomaly_map(x, y, p, f)
        fileio.write_f32r(args.map, amap.scores)
    return 0


def cmd_stats(args) -> int:
    ds = datasetio.load_dataset(args.dataset)
    stats = airprep.dataset_stats(ds.val_abnormal)
    csv_text = airprep.stats_csv(stats)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    print(csv_text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anomap",
                                 description="Reconstruction-based anomaly "
                                             "detection pipeline")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="configuration file")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes for per-sample scoring")
        p.add_argument("--dump-maps", action="store_true",
                       help="write test anomaly maps as F32R")

    p = sub.add_parser("phantom", help="generate a synthetic dataset")
    common(p)
    p.set_defaults(fn=cmd_phantom)

    p = sub.add_parser("run", help="train and evaluate one variant")
    common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("ablate", help="run all four variants")
    common(p)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("iqa", help="compare two F32R rasters")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("--alpha", type=float, default=0.84)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--map", help="write the fusion anomaly map here")
    p.set_defaults(fn=cmd_iqa)

    p = sub.add_parser("stats", help="dataset statistics and flip decision")
    p.add_argument("dataset")
    p.add_argument("--out", help="write the CSV report here")
    p.set_defaults(fn=cmd_stats)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
