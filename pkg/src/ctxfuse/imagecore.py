"""Grayscale rasters, PGM I/O, entropy-based change strength and error stats."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

DEPTHS = (8, 12, 16, 24)
_DTYPES = {8: np.uint8, 12: np.uint16, 16: np.uint16, 24: np.uint32}


class ImageError(ValueError):
    pass


class ImageMismatchError(ImageError):
    """Two images that must agree in shape (or depth) do not."""


class UnsupportedDepthError(ImageError):
    pass


class PGMError(ImageError):
    """Base class for PGM parse failures."""


class PGMFormatError(PGMError):
    """Not a binary (P5) PGM."""


class PGMHeaderError(PGMError):
    pass


class PGMTruncatedError(PGMError):
    pass


class PGMMaxvalError(PGMError):
    pass


@dataclass(frozen=True, eq=False)
class Image:
    width: int
    height: int
    bit_depth: int
    pixels: np.ndarray  # (height, width), row-major

    def __post_init__(self):
        if self.bit_depth not in DEPTHS:
            raise UnsupportedDepthError(f"bit depth {self.bit_depth} not in {DEPTHS}")
        if self.width < 2 or self.height < 2:
            raise ImageError(f"image must be at least 2x2, got {self.width}x{self.height}")
        px = np.asarray(self.pixels)
        if px.size != self.width * self.height:
            raise ImageError(f"{px.size} pixels for a {self.width}x{self.height} image")
        px = px.reshape(self.height, self.width)
        if px.size and (px.min() < 0 or int(px.max()) >= 1 << self.bit_depth):
            raise ImageError(f"pixel values outside [0, 2^{self.bit_depth})")
        px = px.astype(_DTYPES[self.bit_depth])
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, arr, bit_depth: int = 8) -> "Image":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ImageError("expected a 2-D array")
        return cls(arr.shape[1], arr.shape[0], bit_depth, arr)

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def maxval(self) -> int:
        return (1 << self.bit_depth) - 1

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return (self.width, self.height, self.bit_depth) == (other.width, other.height, other.bit_depth) \
            and np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"Image({self.width}x{self.height}, {self.bit_depth}-bit)"


@dataclass(frozen=True)
class Histogram:
    """Gray-level counts. ``counts`` is dense for depths up to 16 and a
    {level: count} dict for 24-bit images."""
    counts: object
    total: int
    bit_depth: int

    def nonzero(self) -> np.ndarray:
        if isinstance(self.counts, dict):
            return np.fromiter(self.counts.values(), dtype=np.int64)
        c = self.counts
        return c[c > 0]


# -- PGM ---------------------------------------------------------------

def _header_tokens(data: bytes, count: int):
    """Return the first ``count`` whitespace-separated header tokens and the
    offset of the byte following the last one. '#' comments run to end of line."""
    tokens, i, n = [], 0, len(data)
    while len(tokens) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise PGMHeaderError("header ended early")
        j = i
        while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i


def parse_pgm(data: bytes) -> Image:
    if data[:2] != b"P5":
        raise PGMFormatError(f"unsupported magic {data[:2]!r}; only binary P5 is read")
    (_, w, h, mv), end = _header_tokens(data, 4)
    try:
        width, height, maxval = int(w), int(h), int(mv)
    except ValueError:
        raise PGMHeaderError(f"non-numeric header field in {w!r} {h!r} {mv!r}") from None
    if width <= 0 or height <= 0:
        raise PGMHeaderError(f"bad dimensions {width}x{height}")
    if maxval == 255:
        depth, dtype = 8, np.dtype(np.uint8)
    elif maxval == 65535:
        depth, dtype = 16, np.dtype(">u2")
    else:
        raise PGMMaxvalError(f"maxval {maxval} unsupported (255 or 65535)")
    if end >= len(data) or not data[end:end + 1].isspace():
        raise PGMHeaderError("missing whitespace after maxval")
    start = end + 1
    need = width * height * dtype.itemsize
    if len(data) - start < need:
        raise PGMTruncatedError(f"payload has {len(data) - start} bytes, expected {need}")
    px = np.frombuffer(data, dtype=dtype, count=width * height, offset=start)
    return Image(width, height, depth, px.reshape(height, width))


def load_pgm(path) -> Image:
    return parse_pgm(Path(path).read_bytes())


def pgm_bytes(image: Image) -> bytes:
    if image.bit_depth == 8:
        body = image.pixels.astype(np.uint8).tobytes()
    elif image.bit_depth == 16:
        body = image.pixels.astype(">u2").tobytes()
    else:
        raise UnsupportedDepthError(
            f"PGM holds 8 or 16 bits; requantize the {image.bit_depth}-bit image first")
    return f"P5\n{image.width} {image.height}\n{image.maxval}\n".encode() + body


def save_pgm(image: Image, path) -> None:
    data = pgm_bytes(image)
    with open(path, "wb") as fh:
        fh.write(data)


def save_raw(image: Image, path) -> None:
    """Sidecar dump for any depth: three little-endian u32 header words
    (width, height, depth) followed by little-endian u32 pixels."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<3I", image.width, image.height, image.bit_depth))
        fh.write(image.pixels.astype("<u4").tobytes())


def load_raw(path) -> Image:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise PGMTruncatedError("raw dump shorter than its header")
    w, h, d = struct.unpack_from("<3I", data)
    if len(data) - 12 < 4 * w * h:
        raise PGMTruncatedError("raw dump payload truncated")
    px = np.frombuffer(data, dtype="<u4", count=w * h, offset=12)
    return Image(w, h, d, px.reshape(h, w))


# -- pixel operations ------------------------------------------------------

def requantize(image: Image, target_depth: int) -> Image:
    if target_depth not in DEPTHS:
        raise UnsupportedDepthError(f"target depth {target_depth} not in {DEPTHS}")
    shift = target_depth - image.bit_depth
    px = image.pixels.astype(np.int64)
    if shift > 0:
        px = px << shift
    elif shift < 0:
        px = px >> -shift
    return Image(image.width, image.height, target_depth, px)


def histogram(image: Image) -> Histogram:
    flat = image.pixels.ravel()
    if image.bit_depth <= 16:
        counts = np.bincount(flat, minlength=1 << image.bit_depth)
    else:
        levels, cnt = np.unique(flat, return_counts=True)
        counts = dict(zip(levels.tolist(), cnt.tolist()))
    return Histogram(counts, flat.size, image.bit_depth)


def entropy(image: Image) -> float:
    """Shannon entropy of the gray-level distribution, in bits."""
    hist = histogram(image)
    p = hist.nonzero() / hist.total
    h = float(-np.sum(p * np.log2(p)))
    return h if h > 0 else 0.0


def _check_same(a: Image, b: Image, depth=True):
    if a.shape != b.shape:
        raise ImageMismatchError(f"shape {a.shape} vs {b.shape}")
    if depth and a.bit_depth != b.bit_depth:
        raise ImageMismatchError(f"bit depth {a.bit_depth} vs {b.bit_depth}")


def difference(present: Image, previous: Image) -> Image:
    _check_same(present, previous)
    d = np.abs(present.pixels.astype(np.int64) - previous.pixels.astype(np.int64))
    return Image(present.width, present.height, present.bit_depth, d)


def signal_strength(present: Image, previous: Image) -> float:
    return entropy(difference(present, previous))


def strength_percent(present: Image, previous: Image) -> float:
    """Change strength as a percentage of the maximum possible entropy."""
    return 100.0 * signal_strength(present, previous) / present.bit_depth


def entropy_ratio_percent(present: Image, previous: Image, cap: float = 200.0) -> float:
    """100 * H(present) / H(previous), capped; a zero-entropy reference gives the cap."""
    h2 = entropy(previous)
    if h2 == 0.0:
        return cap
    return min(cap, 100.0 * entropy(present) / h2)


class ErrorStats(NamedTuple):
    std: float   # population std of signed differences
    mse: float


def error_measure(ideal: Image, candidate: Image) -> ErrorStats:
    _check_same(ideal, candidate, depth=False)
    d = candidate.pixels.astype(np.float64) - ideal.pixels.astype(np.float64)
    return ErrorStats(float(np.std(d)), float(np.mean(d * d)))


def psnr(ideal: Image, candidate: Image) -> float:
    mse = error_measure(ideal, candidate).mse
    return math.inf if mse == 0 else 10 * math.log10(ideal.maxval ** 2 / mse)
