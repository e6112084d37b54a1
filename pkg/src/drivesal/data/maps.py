"""Saliency-map normalization and 8-bit image I/O (binary PGM/PPM, optional PNG)."""

import re
from pathlib import Path

import numpy as np

from ..errors import ArgumentError, DegenerateInputError, FormatError

_TOKEN = re.compile(rb"(#[^\n]*\n)|(\S+)")


def normalize_map(values, mode="sum_to_one"):
    x = np.asarray(values, dtype=np.float64)
    if mode == "sum_to_one":
        total = x.sum()
        if not total > 0:
            raise DegenerateInputError("map has no positive mass")
        return x / total
    if mode == "standardize":
        sd = x.std()
        if sd == 0:
            raise DegenerateInputError("map has zero variance")
        return (x - x.mean()) / sd
    if mode == "max_to_one":
        peak = x.max()
        if not peak > 0:
            raise DegenerateInputError("map has no positive value")
        return x / peak
    raise ArgumentError(f"unknown normalization mode {mode!r}")


def _read_netpbm(path):
    data = Path(path).read_bytes()
    header, pos = [], 0
    while len(header) < 4:
        m = _TOKEN.search(data, pos)
        if m is None:
            raise FormatError(f"{path}: truncated header")
        pos = m.end()
        if m.group(2):
            header.append(m.group(2))
    magic = header[0]
    try:
        width, height, maxval = (int(v) for v in header[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed header") from None
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported netpbm type {magic.decode(errors='replace')}")
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit images (maxval 255) are supported, got {maxval}")
    channels = 1 if magic == b"P5" else 3
    raw = data[pos + 1:]
    need = width * height * channels
    if len(raw) < need:
        raise FormatError(f"{path}: expected {need} pixel bytes, found {len(raw)}")
    return np.frombuffer(raw[:need], dtype=np.uint8).reshape(height, width, channels)


def _write_netpbm(path, pixels):
    h, w, c = pixels.shape
    magic = b"P5" if c == 1 else b"P6"
    Path(path).write_bytes(magic + b"\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes())


def _read_png(path, channels):
    try:
        from PIL import Image
    except ImportError:  # optional dependency
        raise FormatError(f"{path}: PNG support needs Pillow") from None
    with Image.open(path) as im:
        expect = "L" if channels == 1 else "RGB"
        if im.mode != expect:
            raise FormatError(f"{path}: expected {expect} 8-bit image, got mode {im.mode}")
        return np.asarray(im, dtype=np.uint8).reshape(im.height, im.width, channels)


def _to_bytes(values):
    x = np.asarray(values, dtype=np.float64)
    if x.size and (x.min() < 0 or x.max() > 1):
        raise ArgumentError("map values must lie in [0, 1]")
    return np.rint(x * 255.0).astype(np.uint8)


def load_gray_map(path, binarize=False):
    """Read an 8-bit single-channel map as ``[H, W, 1]`` floats in [0, 1].

    With ``binarize`` (fixation maps) every non-zero pixel becomes 1.
    """
    if str(path).lower().endswith(".png"):
        px = _read_png(path, 1)
    else:
        px = _read_netpbm(path)
    if px.shape[2] != 1:
        raise FormatError(f"{path}: expected a single-channel image")
    if binarize:
        return (px > 0).astype(np.float64)
    return px.astype(np.float64) / 255.0


def write_gray_map(values, path):
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3 or x.shape[2] != 1:
        raise ArgumentError(f"expected an [H, W, 1] map, got {x.shape}")
    _write_netpbm(path, _to_bytes(x))


def load_rgb_image(path):
    """Read an 8-bit RGB image (binary PPM or PNG) as ``[H, W, 3]`` floats in [0, 1]."""
    px = _read_png(path, 3) if str(path).lower().endswith(".png") else _read_netpbm(path)
    if px.shape[2] != 3:
        raise FormatError(f"{path}: expected a 3-channel image")
    return px.astype(np.float64) / 255.0


def write_rgb_image(values, path):
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != 3:
        raise ArgumentError(f"expected an [H, W, 3] image, got {x.shape}")
    _write_netpbm(path, _to_bytes(x))
