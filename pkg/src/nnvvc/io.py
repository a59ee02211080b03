"""Raw planar video files and single images.

Video: little-endian u32 width, height, frame count, then every frame as
three planes (R, G, B) of height x width bytes.
"""
import os
import struct

import numpy as np

_HEAD = struct.Struct("<III")
IMAGE_EXTS = (".png", ".ppm", ".bmp", ".tif", ".tiff")


class VideoFormatError(ValueError):
    pass


def read_video(path):
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < _HEAD.size:
        raise VideoFormatError(f"{path}: too short for a video header")
    w, h, n = _HEAD.unpack_from(buf)
    if w == 0 or h == 0 or w > 0xFFFF or h > 0xFFFF:
        raise VideoFormatError(f"{path}: bad frame size {w}x{h}")
    need = _HEAD.size + n * 3 * w * h
    if len(buf) != need:
        raise VideoFormatError(f"{path}: expected {need} bytes for {n} frames of {w}x{h}, got {len(buf)}")
    return np.frombuffer(buf, np.uint8, offset=_HEAD.size).reshape(n, 3, h, w).copy()


def write_video(path, frames):
    frames = np.asarray(frames, dtype=np.uint8)
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise VideoFormatError("frames must be (N, 3, H, W)")
    n, _, h, w = frames.shape
    with open(path, "wb") as f:
        f.write(_HEAD.pack(w, h, n))
        f.write(np.ascontiguousarray(frames).tobytes())


def is_image_path(path):
    return os.path.splitext(path)[1].lower() in IMAGE_EXTS


def read_image(path):
    from PIL import Image

    with Image.open(path) as im:
        a = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return a.transpose(2, 0, 1).copy()


def write_image(path, frame):
    from PIL import Image

    Image.fromarray(np.asarray(frame, dtype=np.uint8).transpose(1, 2, 0)).save(path)


def read_frames(path):
    """(N, 3, H, W) frames from a video file or a single image."""
    if is_image_path(path):
        return read_image(path)[None]
    return read_video(path)


def write_frames(path, frames):
    if is_image_path(path):
        if len(frames) != 1:
            raise VideoFormatError(f"{path}: image output needs exactly one frame, got {len(frames)}")
        write_image(path, frames[0])
    else:
        write_video(path, frames)
