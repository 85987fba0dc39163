"""Dataset ingestion, the augmentation suite, and batch assembly.

Augmentation draw order per sample is fixed (resize scale, rotation angle,
blur coin, blur sigma, mirror coin, crop offsets) so a per-sample generator
fully determines the result regardless of worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import repeat
from pathlib import Path

import numpy as np

from . import pnm

IGNORE_LABEL = 255


@dataclass
class SegSample:
    image: np.ndarray  # float32 (3, H, W), values in [0, 1]
    labels: np.ndarray  # uint8 (H, W), values in [0, K) or 255

    def validate(self, num_classes: int) -> "SegSample":
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise ValueError(f"image must be (3, H, W), got {self.image.shape}")
        if self.labels.shape != self.image.shape[1:]:
            raise ValueError(
                f"dim mismatch: image {self.image.shape[1:]} vs labels {self.labels.shape}"
            )
        bad = (self.labels != IGNORE_LABEL) & (self.labels >= num_classes)
        if bad.any():
            raise ValueError(
                f"label {int(self.labels[bad][0])} out of range for {num_classes} classes"
            )
        return self


@dataclass
class SegBatch:
    images: np.ndarray  # float32 (N, 3, H, W)
    labels: np.ndarray  # int64 (N, H, W)


@dataclass
class AugmentConfig:
    mirror_prob: float = 0.5
    resize_range: tuple[float, float] = (0.5, 2.0)
    rotation_deg: float = 10.0
    blur_prob: float = 0.5
    blur_sigma_range: tuple[float, float] = (0.3, 1.0)
    crop_size: int = 64
    pad_value_image: tuple[float, float, float] = (0.5, 0.5, 0.5)
    pad_value_label: int = IGNORE_LABEL

    def __post_init__(self) -> None:
        lo, hi = self.resize_range
        if lo <= 0 or hi < lo:
            raise ValueError(f"resize_range must be positive and ordered, got {self.resize_range}")
        if self.crop_size % 8:
            raise ValueError(f"crop_size must be divisible by 8, got {self.crop_size}")
        if isinstance(self.pad_value_image, (int, float)):
            self.pad_value_image = (float(self.pad_value_image),) * 3


# -- sample io ----------------------------------------------------------------


def load_sample(image_path, label_path, num_classes: int) -> SegSample:
    img = pnm.read_ppm(image_path).astype(np.float32) / 255.0
    labels = pnm.read_pgm(label_path)
    sample = SegSample(np.ascontiguousarray(img.transpose(2, 0, 1)), labels.copy())
    return sample.validate(num_classes)


def save_sample(sample: SegSample, image_path, label_path) -> None:
    img = np.clip(np.rint(sample.image * 255.0), 0, 255).astype(np.uint8)
    pnm.write_ppm(image_path, np.ascontiguousarray(img.transpose(1, 2, 0)))
    pnm.write_pgm(label_path, sample.labels.astype(np.uint8))


def write_dataset(root, samples: list[SegSample]) -> None:
    """images/NNNN.ppm + labels/NNNN.pgm + manifest.txt layout."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)
    names = []
    for i, s in enumerate(samples):
        name = f"{i:04d}"
        save_sample(s, root / "images" / f"{name}.ppm", root / "labels" / f"{name}.pgm")
        names.append(name)
    (root / "manifest.txt").write_text("".join(n + "\n" for n in names))


def load_dataset(root, num_classes: int) -> list[SegSample]:
    root = Path(root)
    manifest = root / "manifest.txt"
    if not manifest.is_file():
        raise FileNotFoundError(f"no manifest.txt under {root}")
    names = [line.strip() for line in manifest.read_text().splitlines() if line.strip()]
    if not names:
        raise ValueError(f"empty manifest: {manifest}")
    return [
        load_sample(root / "images" / f"{n}.ppm", root / "labels" / f"{n}.pgm", num_classes)
        for n in names
    ]


# -- geometric primitives -----------------------------------------------------


def _axis_pos(src: int, dst: int) -> np.ndarray:
    """Align-corners source coordinates for dst output positions."""
    if dst == 1:
        return np.zeros(1)
    return np.arange(dst) * ((src - 1) / (dst - 1))


def resize_image(img: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of a (C, H, W) float map; up or down."""
    _, h, w = img.shape
    oh, ow = out_hw
    if (oh, ow) == (h, w):
        return img.copy()
    ry = _axis_pos(h, oh)
    rx = _axis_pos(w, ow)
    i0 = np.floor(ry).astype(np.int64)
    i1 = np.minimum(i0 + 1, h - 1)
    fy = (ry - i0).astype(img.dtype)[None, :, None]
    j0 = np.floor(rx).astype(np.int64)
    j1 = np.minimum(j0 + 1, w - 1)
    fx = (rx - j0).astype(img.dtype)[None, None, :]
    top = img[:, i0, :][:, :, j0] * (1 - fx) + img[:, i0, :][:, :, j1] * fx
    bot = img[:, i1, :][:, :, j0] * (1 - fx) + img[:, i1, :][:, :, j1] * fx
    return np.ascontiguousarray(top * (1 - fy) + bot * fy)


def resize_labels(labels: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resize of an (H, W) label map."""
    h, w = labels.shape
    oh, ow = out_hw
    if (oh, ow) == (h, w):
        return labels.copy()
    ri = np.clip(np.rint(_axis_pos(h, oh)).astype(np.int64), 0, h - 1)
    ci = np.clip(np.rint(_axis_pos(w, ow)).astype(np.int64), 0, w - 1)
    return np.ascontiguousarray(labels[ri[:, None], ci[None, :]])


def rotate_pair(img: np.ndarray, labels: np.ndarray, degrees: float,
                ignore: int = IGNORE_LABEL) -> tuple[np.ndarray, np.ndarray]:
    """Rotate about the center: bilinear/edge-clamp image, nearest/ignore labels."""
    _, h, w = img.shape
    rad = math.radians(degrees)
    c, s = math.cos(rad), math.sin(rad)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    sy = c * yy + s * xx + cy
    sx = -s * yy + c * xx + cx

    i0 = np.clip(np.floor(sy).astype(np.int64), 0, h - 1)
    i1 = np.clip(i0 + 1, 0, h - 1)
    j0 = np.clip(np.floor(sx).astype(np.int64), 0, w - 1)
    j1 = np.clip(j0 + 1, 0, w - 1)
    fy = np.clip(sy - np.floor(sy), 0.0, 1.0).astype(img.dtype)
    fx = np.clip(sx - np.floor(sx), 0.0, 1.0).astype(img.dtype)
    # Edge clamp: source coords are clipped, so border rows/cols extend.
    out = (
        img[:, i0, j0] * (1 - fy) * (1 - fx)
        + img[:, i0, j1] * (1 - fy) * fx
        + img[:, i1, j0] * fy * (1 - fx)
        + img[:, i1, j1] * fy * fx
    )

    ri = np.clip(np.rint(sy).astype(np.int64), 0, h - 1)
    ci = np.clip(np.rint(sx).astype(np.int64), 0, w - 1)
    lab = labels[ri, ci]
    outside = (sy < -0.5) | (sy > h - 0.5) | (sx < -0.5) | (sx > w - 0.5)
    lab = np.where(outside, np.uint8(ignore), lab)
    return np.ascontiguousarray(out), np.ascontiguousarray(lab)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian with radius ceil(3*sigma), edge-clamped."""
    radius = math.ceil(3.0 * sigma)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(t * t) / (2.0 * sigma * sigma))
    kernel = (kernel / kernel.sum()).astype(img.dtype)
    for axis in (1, 2):
        pad = [(0, 0), (0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        padded = np.pad(img, pad, mode="edge")
        win = np.lib.stride_tricks.sliding_window_view(padded, 2 * radius + 1, axis=axis)
        img = np.tensordot(win, kernel, axes=(3, 0)).astype(img.dtype, copy=False)
    return np.ascontiguousarray(img)


def pad_and_crop(img: np.ndarray, labels: np.ndarray, cfg: AugmentConfig,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    crop = cfg.crop_size
    _, h, w = img.shape
    if h < crop or w < crop:
        ph, pw = max(h, crop), max(w, crop)
        canvas = np.empty((3, ph, pw), dtype=img.dtype)
        canvas[...] = np.asarray(cfg.pad_value_image, dtype=img.dtype)[:, None, None]
        canvas[:, :h, :w] = img
        lcanvas = np.full((ph, pw), cfg.pad_value_label, dtype=labels.dtype)
        lcanvas[:h, :w] = labels
        img, labels, h, w = canvas, lcanvas, ph, pw
    y0 = int(rng.integers(0, h - crop + 1))
    x0 = int(rng.integers(0, w - crop + 1))
    return (
        np.ascontiguousarray(img[:, y0 : y0 + crop, x0 : x0 + crop]),
        np.ascontiguousarray(labels[y0 : y0 + crop, x0 : x0 + crop]),
    )


def augment(sample: SegSample, cfg: AugmentConfig, rng: np.random.Generator) -> SegSample:
    """resize -> rotate -> blur -> mirror -> pad-and-random-crop."""
    img, lab = sample.image, sample.labels
    _, h, w = img.shape

    scale = float(rng.uniform(*cfg.resize_range))
    oh, ow = max(1, round(h * scale)), max(1, round(w * scale))
    img = resize_image(img, (oh, ow))
    lab = resize_labels(lab, (oh, ow))

    degrees = float(rng.uniform(-cfg.rotation_deg, cfg.rotation_deg))
    img, lab = rotate_pair(img, lab, degrees, cfg.pad_value_label)

    if rng.random() < cfg.blur_prob:
        sigma = float(rng.uniform(*cfg.blur_sigma_range))
        img = gaussian_blur(img, sigma)

    if rng.random() < cfg.mirror_prob:
        img = np.ascontiguousarray(img[:, :, ::-1])
        lab = np.ascontiguousarray(lab[:, ::-1])

    img = np.clip(img, 0.0, 1.0)
    img, lab = pad_and_crop(img, lab, cfg, rng)
    return SegSample(img, lab)


def augment_all(samples: list[SegSample], cfg: AugmentConfig,
                rngs: list[np.random.Generator], workers: int = 1) -> list[SegSample]:
    """Order-preserving map; each sample owns its generator, so the result
    does not depend on the worker count."""
    if workers <= 1:
        return [augment(s, cfg, r) for s, r in zip(samples, rngs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(augment, samples, repeat(cfg), rngs))


# -- batches ------------------------------------------------------------------


def make_batches(samples: list[SegSample], batch_size: int, rng: np.random.Generator):
    """One epoch of shuffled batches; the final short batch is emitted."""
    if not samples:
        raise ValueError("empty dataset")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = rng.permutation(len(samples))
    for start in range(0, len(samples), batch_size):
        ids = order[start : start + batch_size]
        yield collate([samples[i] for i in ids])


def collate(samples: list[SegSample]) -> SegBatch:
    shape = samples[0].image.shape
    for s in samples[1:]:
        if s.image.shape != shape:
            raise ValueError(f"batch needs identical sizes, got {shape} vs {s.image.shape}")
    images = np.stack([s.image for s in samples]).astype(np.float32, copy=False)
    labels = np.stack([s.labels for s in samples]).astype(np.int64)
    return SegBatch(images, labels)


def class_palette(num_classes: int) -> np.ndarray:
    """Deterministic class -> RGB table (uint8, shape (K, 3)) for color dumps."""
    hues = (np.arange(num_classes) * 0.61803398875) % 1.0
    rgb = np.empty((num_classes, 3), dtype=np.uint8)
    for i, h in enumerate(hues):
        x = h * 6.0
        k = int(x) % 6
        f = x - int(x)
        v, p, q, t = 1.0, 0.25, 1.0 - 0.75 * f, 0.25 + 0.75 * f
        r, g, b = [
            (v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q),
        ][k]
        rgb[i] = np.rint(np.array([r, g, b]) * 255.0)
    return rgb
