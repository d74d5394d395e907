"""Pixel-level two-source fusion in the wavelet domain, and the running
accumulation a fusing agent performs along its itinerary."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .imagecore import DEPTHS, Image, ImageMismatchError, requantize
from .wavelet import SUPPORTED_BASES, MAX_LEVELS, SubbandPyramid, WaveletError, dwt2, idwt2

SOURCE_A = 0
SOURCE_B = 1

WAVELET = "wavelet"
ADDITIVE = "additive"


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class FusionProfile:
    resolution_class: str       # "low" or "high"
    basis: str
    levels: int
    output_bit_depth: int
    window: int = 3
    fusion_factor: float = 1.0  # rho
    mode: str = WAVELET

    def __post_init__(self):
        problems = []
        if self.resolution_class not in ("low", "high"):
            problems.append(f"resolution_class {self.resolution_class!r} not low/high")
        if self.basis not in SUPPORTED_BASES:
            problems.append(f"basis {self.basis!r} unsupported")
        if not 1 <= self.levels <= MAX_LEVELS:
            problems.append(f"levels {self.levels} outside 1..{MAX_LEVELS}")
        if self.output_bit_depth not in DEPTHS:
            problems.append(f"output depth {self.output_bit_depth} not in {DEPTHS}")
        if self.window < 1 or self.window % 2 == 0:
            problems.append(f"window {self.window} must be odd and >= 1")
        if self.mode not in (WAVELET, ADDITIVE):
            problems.append(f"mode {self.mode!r} not wavelet/additive")
        if problems:
            raise FusionError("; ".join(problems))


LOW_PROFILE = FusionProfile("low", "haar", 1, 8)
HIGH_PROFILE = FusionProfile("high", "db4", 3, 16)


@dataclass
class DecisionMap:
    """Source index per coefficient. ``details[k-1]`` is (LH, HL, HH) of level k."""
    approximation: np.ndarray
    details: list

    def bands(self):
        out = [self.approximation]
        for triple in reversed(self.details):
            out.extend(triple)
        return out


def _check_compatible(a: SubbandPyramid, b: SubbandPyramid):
    if a.basis != b.basis or a.levels != b.levels:
        raise FusionError(f"pyramids differ: {a.basis}/K={a.levels} vs {b.basis}/K={b.levels}")
    if a.shape_catalog() != b.shape_catalog():
        raise FusionError("pyramid band shapes differ")


def activity(band: np.ndarray, window: int) -> np.ndarray:
    """Window energy: sum of squared coefficients over a clipped w x w window."""
    b = np.asarray(band, dtype=np.float64)
    return kernels.box_sum(b * b, window)


def decision_map(pyr_a: SubbandPyramid, pyr_b: SubbandPyramid, window: int) -> DecisionMap:
    _check_compatible(pyr_a, pyr_b)
    if window < 1 or window % 2 == 0:
        raise FusionError(f"window {window} must be odd and >= 1")
    details = []
    for da, db in zip(pyr_a.details, pyr_b.details):
        details.append(tuple(
            np.where(activity(x, window) >= activity(y, window), SOURCE_A, SOURCE_B).astype(np.uint8)
            for x, y in zip(da, db)))
    approx = np.full(np.shape(pyr_a.approximation), SOURCE_A, dtype=np.uint8)
    return DecisionMap(approx, details)


def consistency_verify(dmap: DecisionMap) -> DecisionMap:
    """3x3 majority vote on each detail band; ties keep the original entry."""
    details = [tuple(kernels.majority3(band) for band in triple) for triple in dmap.details]
    return DecisionMap(dmap.approximation.copy(), details)


def combine(pyr_a: SubbandPyramid, pyr_b: SubbandPyramid, dmap: DecisionMap) -> SubbandPyramid:
    _check_compatible(pyr_a, pyr_b)
    if [m.shape for m in dmap.bands()] != [np.shape(x) for _, x in pyr_a.bands()]:
        raise FusionError("decision map shapes do not match the pyramids")
    details = []
    for da, db, dm in zip(pyr_a.details, pyr_b.details, dmap.details):
        details.append(tuple(np.where(m == SOURCE_A, x, y) for x, y, m in zip(da, db, dm)))
    approx = (np.asarray(pyr_a.approximation) + np.asarray(pyr_b.approximation)) / 2.0
    return SubbandPyramid(pyr_a.levels, approx, details, pyr_a.original_width,
                          pyr_a.original_height, pyr_a.basis, pyr_a.bit_depth)


def fuse_pair(img_a: Image, img_b: Image, profile: FusionProfile = LOW_PROFILE) -> Image:
    if img_a.shape != img_b.shape:
        raise ImageMismatchError(f"cannot fuse {img_a.shape} with {img_b.shape}")
    depth = profile.output_bit_depth
    a = requantize(img_a, depth)
    b = requantize(img_b, depth)
    try:
        pa = dwt2(a, profile.basis, profile.levels)
        pb = dwt2(b, profile.basis, profile.levels)
    except WaveletError as exc:
        raise FusionError(str(exc)) from exc
    dmap = consistency_verify(decision_map(pa, pb, profile.window))
    return idwt2(combine(pa, pb, dmap), depth)


def accumulate_fuse(running: Image, nxt: Image, profile: FusionProfile = LOW_PROFILE) -> Image:
    if running.shape != nxt.shape:
        raise ImageMismatchError(f"cannot fuse {running.shape} with {nxt.shape}")
    if profile.mode == WAVELET:
        return fuse_pair(running, nxt, profile)
    depth = profile.output_bit_depth
    r = requantize(running, depth).pixels.astype(np.float64)
    n = requantize(nxt, depth).pixels.astype(np.float64)
    out = np.clip(np.rint(r + profile.fusion_factor * n), 0, (1 << depth) - 1)
    return Image(running.width, running.height, depth, out.astype(np.int64))
