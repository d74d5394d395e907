import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ctxfuse.imagecore import (Image, ImageError, ImageMismatchError, PGMFormatError, PGMHeaderError,
                               PGMMaxvalError, PGMTruncatedError, UnsupportedDepthError, difference,
                               entropy, entropy_ratio_percent, error_measure, histogram, load_pgm,
                               load_raw, parse_pgm, pgm_bytes, psnr, requantize, save_pgm, save_raw,
                               signal_strength, strength_percent)
from conftest import random_image


def brute_entropy(values):
    counts = Counter(int(v) for v in np.ravel(values))
    n = sum(counts.values())
    return -sum(c / n * math.log2(c / n) for c in counts.values())


def test_image_rejects_out_of_range_and_bad_depth():
    with pytest.raises(ImageError):
        Image.from_array(np.full((2, 2), 256), 8)
    with pytest.raises(UnsupportedDepthError):
        Image.from_array(np.zeros((2, 2)), 10)
    with pytest.raises(ImageError):
        Image(3, 3, 8, np.zeros(8))


def test_pixels_are_read_only():
    img = Image.from_array(np.zeros((4, 4)), 8)
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1


def test_pgm_round_trip_8_and_16(tmp_path, rng):
    for depth in (8, 16):
        img = random_image(rng, 7, 5, depth)
        p = tmp_path / f"x{depth}.pgm"
        save_pgm(img, p)
        assert load_pgm(p) == img


def test_pgm_header_with_comments():
    data = b"P5\n# made by hand\n3 2 # w h\n255\n" + bytes(range(6))
    img = parse_pgm(data)
    assert img.shape == (2, 3)
    assert img.pixels.tolist() == [[0, 1, 2], [3, 4, 5]]


def test_pgm_16bit_is_big_endian():
    data = b"P5 2 2 65535\n" + bytes([1, 2, 0, 0, 0, 0, 255, 255])
    img = parse_pgm(data)
    assert img.bit_depth == 16
    assert img.pixels[0, 0] == 0x0102 and img.pixels[1, 1] == 65535


def test_pgm_errors():
    with pytest.raises(PGMFormatError):
        parse_pgm(b"P2\n2 2\n255\n0 0 0 0")
    with pytest.raises(PGMTruncatedError):
        parse_pgm(b"P5\n4 4\n255\n" + bytes(10))
    with pytest.raises(PGMMaxvalError):
        parse_pgm(b"P5\n2 2\n1023\n" + bytes(8))
    with pytest.raises(PGMHeaderError):
        parse_pgm(b"P5\n2 x\n255\n" + bytes(4))
    with pytest.raises(PGMHeaderError):
        parse_pgm(b"P5\n2")


def test_pgm_refuses_12_and_24_bit(rng, tmp_path):
    img = random_image(rng, 4, 4, 12)
    with pytest.raises(UnsupportedDepthError):
        pgm_bytes(img)
    save_raw(random_image(rng, 4, 4, 24), tmp_path / "a.raw")
    assert load_raw(tmp_path / "a.raw").bit_depth == 24


def test_raw_round_trip(rng, tmp_path):
    for depth in (8, 12, 16, 24):
        img = random_image(rng, 3, 5, depth)
        save_raw(img, tmp_path / "r.raw")
        assert load_raw(tmp_path / "r.raw") == img


def test_requantize_shifts():
    img = Image.from_array(np.array([[255, 128], [1, 0]]), 8)
    up = requantize(img, 16)
    assert up.pixels.tolist() == [[255 << 8, 128 << 8], [256, 0]]
    assert requantize(up, 8) == img
    with pytest.raises(UnsupportedDepthError):
        requantize(img, 9)


def test_histogram_dense_and_sparse(rng):
    img = random_image(rng, 8, 8, 8)
    h = histogram(img)
    assert h.total == 64 and h.counts.sum() == 64
    h24 = histogram(random_image(rng, 8, 8, 24))
    assert isinstance(h24.counts, dict) and sum(h24.counts.values()) == 64


def test_entropy_constant_is_exactly_zero():
    for depth in (8, 12, 16, 24):
        img = Image.from_array(np.full((5, 5), 3), depth)
        assert entropy(img) == 0.0
        assert math.copysign(1.0, entropy(img)) == 1.0


def test_entropy_two_levels_is_one_bit():
    img = Image.from_array(np.array([[0, 255], [255, 0]]), 8)
    assert entropy(img) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(arrays(np.int64, st.tuples(st.integers(2, 12), st.integers(2, 12)),
              elements=st.integers(0, 255)))
def test_entropy_matches_brute_force(px):
    img = Image.from_array(px, 8)
    assert entropy(img) == pytest.approx(brute_entropy(px), abs=1e-12)
    assert 0.0 <= entropy(img) <= 8.0


def test_difference_and_strength(rng):
    a, b = random_image(rng), random_image(rng)
    d = difference(a, b)
    assert np.array_equal(d.pixels, np.abs(a.pixels.astype(int) - b.pixels.astype(int)))
    assert difference(a, b) == difference(b, a)
    assert signal_strength(a, a) == 0.0
    assert strength_percent(a, b) == pytest.approx(100 * signal_strength(a, b) / 8)
    with pytest.raises(ImageMismatchError):
        difference(a, random_image(rng, 8, 16))
    with pytest.raises(ImageMismatchError):
        difference(a, requantize(b, 16))


def test_entropy_ratio_cap():
    flat = Image.from_array(np.zeros((4, 4)), 8)
    busy = Image.from_array(np.arange(16).reshape(4, 4), 8)
    assert entropy_ratio_percent(busy, flat) == 200.0
    assert entropy_ratio_percent(busy, busy) == pytest.approx(100.0)
    assert entropy_ratio_percent(flat, busy) == 0.0


def test_error_measure_and_psnr():
    a = Image.from_array(np.array([[10, 10], [10, 10]]), 8)
    b = Image.from_array(np.array([[12, 10], [10, 8]]), 8)
    stats = error_measure(a, b)
    assert stats.mse == pytest.approx(2.0)
    d = np.array([2, 0, 0, -2], dtype=float)
    assert stats.std == pytest.approx(np.std(d))
    assert psnr(a, a) == math.inf
    assert psnr(a, b) == pytest.approx(10 * math.log10(255 ** 2 / 2.0))
