"""Pixel, feature and toy-detection quality measures."""
import numpy as np
from scipy import ndimage

from ..training.losses import EVAL_PROXY_SEED, extractor, proxy_loss

PSNR_CAP = 100.0


def psnr(a, b, peak=255.0):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(min(10 * np.log10(peak * peak / mse), PSNR_CAP))


def feature_fidelity(x, x_hat, ext=None):
    """-10 log10 of the evaluation-proxy feature distortion (uint8 inputs)."""
    ext = ext or extractor(EVAL_PROXY_SEED)
    a, b = np.asarray(x), np.asarray(x_hat)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 3:
        a, b = a[None], b[None]
    d = float(proxy_loss(a / 256.0, b / 256.0, ext).value)
    return float(-10 * np.log10(d + 1e-10))


def detect_shapes(frame, threshold=60, min_area=12):
    """Colored objects over a gray background: chroma threshold plus components.

    Returns ``(boxes, scores)`` with boxes as (x, y, w, h) and the component
    pixel count as the score.
    """
    f = np.asarray(frame).astype(np.int16)
    chroma = f.max(axis=0) - f.min(axis=0)
    mask = ndimage.binary_opening(chroma > threshold, structure=np.ones((3, 3), bool))
    labels, n = ndimage.label(mask)
    boxes, scores = [], []
    if n:
        areas = ndimage.sum_labels(mask, labels, index=np.arange(1, n + 1))
        for area, sl in zip(areas, ndimage.find_objects(labels)):
            if area < min_area:
                continue
            ys, xs = sl
            boxes.append((xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start))
            scores.append(float(area))
    return np.array(boxes, dtype=np.float64).reshape(-1, 4), np.array(scores, dtype=np.float64)


def box_iou(a, b):
    """IoU matrix between (n, 4) and (m, 4) boxes in (x, y, w, h)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    ax1, ay1 = a[:, 0] + a[:, 2], a[:, 1] + a[:, 3]
    bx1, by1 = b[:, 0] + b[:, 2], b[:, 1] + b[:, 3]
    iw = np.clip(np.minimum(ax1[:, None], bx1[None]) - np.maximum(a[:, None, 0], b[None, :, 0]), 0, None)
    ih = np.clip(np.minimum(ay1[:, None], by1[None]) - np.maximum(a[:, None, 1], b[None, :, 1]), 0, None)
    inter = iw * ih
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None] - inter
    return np.where(union > 0, inter / np.where(union > 0, union, 1), 0.0)


def map_score(pred, gt, iou_thr=0.5):
    """Single-class AP (all-point interpolation) with greedy IoU matching.

    ``pred`` is a list over frames of ``(boxes, scores)``, ``gt`` a list of
    box arrays; a single frame may be passed unwrapped.
    """
    if isinstance(pred, tuple) and len(pred) == 2 and np.asarray(pred[1]).ndim == 1:
        pred, gt = [pred], [gt]
    if len(pred) != len(gt):
        raise ValueError("prediction and ground-truth frame counts differ")
    dets = []
    for f, (boxes, scores) in enumerate(pred):
        boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
        for b, s in zip(boxes, np.asarray(scores, dtype=np.float64)):
            dets.append((-float(s), f, *map(float, b)))
    # sort by score; ties broken by frame and box so list order never matters
    dets.sort()
    n_gt = sum(len(np.asarray(g).reshape(-1, 4)) for g in gt)
    if n_gt == 0:
        return 1.0 if not dets else 0.0
    used = [np.zeros(len(np.asarray(g).reshape(-1, 4)), bool) for g in gt]
    tp = np.zeros(len(dets))
    for k, (_, f, *box) in enumerate(dets):
        g = np.asarray(gt[f], dtype=np.float64).reshape(-1, 4)
        if not len(g):
            continue
        iou = box_iou([box], g)[0]
        iou[used[f]] = -1.0
        j = int(np.argmax(iou))
        if iou[j] >= iou_thr:
            used[f][j] = True
            tp[k] = 1.0
    if not len(dets):
        return 0.0
    ctp = np.cumsum(tp)
    recall = ctp / n_gt
    precision = ctp / np.arange(1, len(dets) + 1)
    r = np.concatenate([[0.0], recall])
    p = np.concatenate([[1.0], precision])
    for i in range(len(p) - 2, -1, -1):
        p[i] = max(p[i], p[i + 1])
    return float(np.sum((r[1:] - r[:-1]) * p[1:]))


def sequence_map(frames, boxes, iou_thr=0.5):
    return map_score([detect_shapes(f) for f in frames], boxes, iou_thr)
