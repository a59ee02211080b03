"""Synthetic moving-shape sequences with ground-truth boxes.

Frames are a low-chroma textured background (random sinusoid mix plus
grain, panned globally) under saturated anti-aliased rectangles and
ellipses moving at constant per-shape velocity.
"""
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    width: int = 96
    height: int = 64
    frames: int = 9
    shapes: tuple = (2, 5)
    size_range: tuple = (8, 24)
    noise: float = 3.0
    max_speed: float = 2.0
    pan: tuple = (1, 0)
    seed: int = 0
    velocities: tuple = None  # optional fixed (vx, vy) per shape

    def with_seed(self, seed):
        return replace(self, seed=seed)


@dataclass
class SyntheticSequence:
    frames: np.ndarray  # (T, 3, H, W) uint8
    boxes: list  # per frame: (k, 4) float array of (x, y, w, h)
    spec: SyntheticDatasetSpec


def _background(rng, spec):
    t = spec.frames
    px, py = spec.pan
    pad_x, pad_y = abs(px) * t + 1, abs(py) * t + 1
    h, w = spec.height + 2 * pad_y, spec.width + 2 * pad_x
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    base = np.zeros((h, w))
    for _ in range(6):
        fx, fy = rng.uniform(-0.15, 0.15, 2)
        base += rng.uniform(6, 18) * np.sin(fx * xx + fy * yy + rng.uniform(0, 2 * np.pi))
    base += rng.normal(0, spec.noise, (h, w))
    level = rng.uniform(90, 160)
    tint = rng.uniform(-6, 6, 3)
    bg = level + base[None] + tint[:, None, None]
    return bg, pad_x, pad_y


def _coverage(kind, xx, yy, cx, cy, hw, hh):
    """Fraction of each pixel inside the shape (1 px linear ramp at the edge)."""
    if kind == 0:
        sd = np.maximum(np.abs(xx - cx) - hw, np.abs(yy - cy) - hh)
    else:
        r = np.sqrt(((xx - cx) / hw) ** 2 + ((yy - cy) / hh) ** 2)
        sd = (r - 1.0) * min(hw, hh)
    return np.clip(0.5 - sd, 0.0, 1.0)


def _collide(a, b, frames, margin=3.0):
    for t in range(frames):
        ax, ay = a[1] + a[5] * t, a[2] + a[6] * t
        bx, by = b[1] + b[5] * t, b[2] + b[6] * t
        if ax < bx + b[3] + margin and bx < ax + a[3] + margin and ay < by + b[4] + margin and by < ay + a[4] + margin:
            return True
    return False


def _saturated_color(rng):
    c = np.empty(3)
    order = rng.permutation(3)
    c[order[0]] = rng.uniform(200, 255)
    c[order[1]] = rng.uniform(0, 60)
    c[order[2]] = rng.uniform(0, 255)
    return c


def generate_synthetic(spec):
    """Render one sequence; a pure function of ``spec``."""
    rng = np.random.default_rng(spec.seed)
    h, w = spec.height, spec.width
    bg, pad_x, pad_y = _background(rng, spec)
    lo, hi = spec.shapes
    count = int(rng.integers(lo, hi + 1)) if hi > lo else int(lo)
    shapes = []
    for i in range(count):
        # rejection-sample a trajectory that stays clear of the earlier shapes
        for _ in range(50):
            sw, sh = rng.uniform(*spec.size_range, 2)
            x0 = rng.uniform(0, max(w - sw, 1))
            y0 = rng.uniform(0, max(h - sh, 1))
            if spec.velocities is not None:
                vx, vy = spec.velocities[i % len(spec.velocities)]
            else:
                vx, vy = rng.uniform(-spec.max_speed, spec.max_speed, 2)
            cand = (int(rng.integers(0, 2)), x0, y0, sw, sh, vx, vy, _saturated_color(rng))
            if not any(_collide(cand, o, spec.frames) for o in shapes):
                shapes.append(cand)
                break
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64) + 0.5
    frames = np.empty((spec.frames, 3, h, w), dtype=np.uint8)
    boxes = []
    for t in range(spec.frames):
        ox, oy = pad_x + spec.pan[0] * t, pad_y + spec.pan[1] * t
        img = bg[:, oy:oy + h, ox:ox + w].copy()
        fb = []
        for kind, x0, y0, sw, sh, vx, vy, color in shapes:
            x, y = x0 + vx * t, y0 + vy * t
            cov = _coverage(kind, xx, yy, x + sw / 2, y + sh / 2, sw / 2, sh / 2)
            img = img * (1 - cov) + color[:, None, None] * cov
            bx0, by0 = max(x, 0.0), max(y, 0.0)
            bx1, by1 = min(x + sw, float(w)), min(y + sh, float(h))
            if bx1 > bx0 and by1 > by0:
                fb.append((bx0, by0, bx1 - bx0, by1 - by0))
        frames[t] = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
        boxes.append(np.array(fb, dtype=np.float64).reshape(-1, 4))
    return SyntheticSequence(frames, boxes, spec)


def generate_images(count, size=(128, 128), seed=0, **kw):
    """``count`` still images (first frames of independent sequences)."""
    h, w = size
    out = np.empty((count, 3, h, w), dtype=np.uint8)
    for i in range(count):
        spec = SyntheticDatasetSpec(width=w, height=h, frames=1, seed=seed * 100003 + i, **kw)
        out[i] = generate_synthetic(spec).frames[0]
    return out


def random_patches(rng, images, count, patch=64):
    """Random aligned crops from a stack of (N, 3, H, W) images."""
    n, _, h, w = images.shape
    idx = rng.integers(0, n, count)
    ys = rng.integers(0, h - patch + 1, count)
    xs = rng.integers(0, w - patch + 1, count)
    return np.stack([images[i, :, y:y + patch, x:x + patch] for i, y, x in zip(idx, ys, xs)])


def paired_patches(rng, originals, decoded, count, patch=64):
    """Co-located crops from two aligned stacks; also returns the source indices."""
    n, _, h, w = originals.shape
    idx = rng.integers(0, n, count)
    ys = rng.integers(0, h - patch + 1, count)
    xs = rng.integers(0, w - patch + 1, count)
    a = np.stack([originals[i, :, y:y + patch, x:x + patch] for i, y, x in zip(idx, ys, xs)])
    b = np.stack([decoded[i, :, y:y + patch, x:x + patch] for i, y, x in zip(idx, ys, xs)])
    return a, b, idx
