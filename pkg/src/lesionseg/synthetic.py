"""Synthetic dermoscopy-like images with exact ground truth.

Each image has a dark elliptical lesion near the center on a shaded skin
background, thin dark hair strokes, small specular highlights and a global
color cast. Used by the end-to-end tests and ``lesionseg demo-data``.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import raster

SIZES = ((640, 480), (600, 450), (512, 512), (480, 640), (560, 420))


def _ellipse(h, w, cx, cy, a, b, theta):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    c, s = np.cos(theta), np.sin(theta)
    u = (dx * c + dy * s) / a
    v = (-dx * s + dy * c) / b
    return u * u + v * v


def _stroke(canvas_mask, rng, h, w, width):
    """Quadratic Bezier curve crossing the image, rasterized as a thick line."""
    p0 = rng.uniform([0, 0], [w, h])
    p2 = rng.uniform([0, 0], [w, h])
    p1 = (p0 + p2) / 2 + rng.normal(0, 0.15 * min(h, w), 2)
    t = np.linspace(0, 1, 4 * (h + w))[:, None]
    pts = (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t ** 2 * p2
    r = max(0, int(round(width / 2)))
    for dx, dy in raster.disk(r).offsets:
        xs = np.clip(np.rint(pts[:, 0]).astype(int) + dx, 0, w - 1)
        ys = np.clip(np.rint(pts[:, 1]).astype(int) + dy, 0, h - 1)
        canvas_mask[ys, xs] = True


def make_image(rng: np.random.Generator, size: tuple[int, int] | None = None):
    """Return ``(uint8 image (H, W, 3), bool ground-truth mask (H, W))``."""
    w, h = size or SIZES[rng.integers(len(SIZES))]
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)

    skin = np.array([212.0, 168.0, 148.0]) + rng.normal(0, 10, 3)
    shade = 1.0 + 0.06 * ((xx / w - 0.5) * rng.normal() + (yy / h - 0.5) * rng.normal())
    img = skin * shade[..., None]

    short = min(h, w)
    a = rng.uniform(0.2, 0.32) * short
    b = a * rng.uniform(0.7, 1.0)
    cx = w / 2 + rng.uniform(-0.08, 0.08) * w
    cy = h / 2 + rng.uniform(-0.08, 0.08) * h
    q = _ellipse(h, w, cx, cy, a, b, rng.uniform(0, np.pi))
    truth = q <= 1.0

    lesion = np.array([118.0, 76.0, 60.0]) + rng.normal(0, 12, 3)
    core = 1.0 - 0.18 * np.clip(1.0 - q, 0.0, 1.0)
    img = np.where(truth[..., None], lesion * core[..., None], img)

    hair = np.zeros((h, w), dtype=bool)
    for _ in range(rng.integers(0, 7)):
        _stroke(hair, rng, h, w, rng.uniform(1.0, 2.0))
    img[hair] = np.array([45.0, 32.0, 28.0]) + rng.normal(0, 5, 3)

    for _ in range(rng.integers(4, 16)):
        r = rng.uniform(1.0, 3.0)
        sx = cx + rng.normal(0, 0.5 * a)
        sy = cy + rng.normal(0, 0.5 * b)
        spot = (xx - sx) ** 2 + (yy - sy) ** 2 <= r * r
        img[spot] = 250.0

    img = img + rng.normal(0, 4.0, img.shape)
    img = img * rng.uniform(0.85, 1.15, 3)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), truth


def make_corpus(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    return [make_image(rng) for _ in range(n)]


def write_corpus(directory: str | Path, n: int, seed: int = 0,
                 mask_suffix: str = "_segmentation") -> tuple[Path, Path]:
    """Write ``images/ISIC_XXXX.png`` and matching ``masks/`` files."""
    root = Path(directory)
    img_dir, mask_dir = root / "images", root / "masks"
    img_dir.mkdir(parents=True, exist_ok=True)
    mask_dir.mkdir(parents=True, exist_ok=True)
    for i, (img, mask) in enumerate(make_corpus(n, seed)):
        stem = f"ISIC_{i:07d}"
        raster.save_image(img_dir / f"{stem}.png", img.astype(np.float64))
        raster.save_mask(mask_dir / f"{stem}{mask_suffix}.png", mask)
    return img_dir, mask_dir
