"""On-disk formats: F32R rasters, binary PGM masks, and dataset directories.

F32R is the repo-wide raster format: one ASCII header line
``F32R <width> <height>\\n`` followed by width*height little-endian 32-bit
floats in row-major order.  Masks are binary PGM (P5, maxval 255) with 0 for
background and 255 for foreground.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .imagecore import BinaryMask


def write_f32r(path, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError("F32R stores 2-D rasters")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"F32R {w} {h}\n".encode("ascii"))
        f.write(arr.astype("<f4").tobytes(order="C"))


def read_f32r(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline()
        parts = header.split()
        if len(parts) != 3 or parts[0] != b"F32R":
            raise ValueError(f"{path}: bad F32R magic")
        w, h = int(parts[1]), int(parts[2])
        raw = f.read()
    expected = w * h * 4
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype="<f4").reshape(h, w).astype(np.float64)


def write_pgm_mask(path, mask: BinaryMask) -> None:
    with open(path, "wb") as f:
        f.write(f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii"))
        f.write((mask.bits.astype(np.uint8) * 255).tobytes(order="C"))


def read_pgm_mask(path) -> BinaryMask:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM")
    # header: magic, width, height, maxval; '#' comments allowed between tokens
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255")
    raw = data[pos:pos + w * h]
    if len(raw) != w * h:
        raise ValueError(f"{path}: truncated PGM payload")
    bits = np.frombuffer(raw, dtype=np.uint8).reshape(h, w) >= 128
    return BinaryMask(bits)


def read_manifest_tsv(path) -> dict:
    """Parse ``manifest.tsv`` lines ``<sample_id>\\t<relative_path>``."""
    entries = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected <id>\\t<path>")
            entries[parts[0]] = parts[1]
    return entries


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
