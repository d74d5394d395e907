import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.ndimage import gaussian_filter

from ctxfuse.fusion import (ADDITIVE, HIGH_PROFILE, LOW_PROFILE, SOURCE_A, SOURCE_B, WAVELET,
                            DecisionMap, FusionError, FusionProfile, accumulate_fuse, activity,
                            combine, consistency_verify, decision_map, fuse_pair)
from ctxfuse.imagecore import Image, ImageMismatchError, error_measure
from ctxfuse.wavelet import SUPPORTED_BASES, dwt2
from conftest import random_image


def profile(basis="haar", levels=1, bits=8, **kw):
    return FusionProfile("low", basis, levels, bits, **kw)


def test_profile_validation():
    with pytest.raises(FusionError):
        FusionProfile("mid", "haar", 1, 8)
    with pytest.raises(FusionError):
        FusionProfile("low", "haar", 1, 8, window=4)
    with pytest.raises(FusionError):
        FusionProfile("low", "mayer", 0, 9)
    assert LOW_PROFILE.basis == "haar" and HIGH_PROFILE.output_bit_depth == 16


def test_activity_window_sum():
    band = np.zeros((5, 5))
    band[2, 2] = 3.0
    act = activity(band, 3)
    assert act[1:4, 1:4].sum() == pytest.approx(81.0)
    assert act[0, 0] == 0.0
    assert np.array_equal(activity(band, 1), band ** 2)


def test_decision_map_degenerate_cases(rng):
    x = rng.normal(size=(8, 8))
    pa, pz = dwt2(x, "haar", 1), dwt2(np.zeros((8, 8)), "haar", 1)
    for band in decision_map(pa, pz, 3).bands():
        assert np.all(band == SOURCE_A)
    for band in decision_map(pa, pa, 3).bands():
        assert np.all(band == SOURCE_A)


def test_decision_map_single_coefficient():
    z = dwt2(np.zeros((8, 8)), "haar", 1)
    b = dwt2(np.zeros((8, 8)), "haar", 1)
    b.details[0][2][1, 2] = 5.0
    m = decision_map(z, b, 1)
    hh = m.details[0][2]
    assert hh[1, 2] == SOURCE_B and hh.sum() == SOURCE_B
    assert np.all(m.details[0][0] == SOURCE_A)


def test_decision_map_mismatch():
    with pytest.raises(FusionError):
        decision_map(dwt2(np.zeros((8, 8)), "haar", 1), dwt2(np.zeros((8, 8)), "db3", 1), 3)
    with pytest.raises(FusionError):
        decision_map(dwt2(np.zeros((8, 8)), "haar", 1), dwt2(np.zeros((8, 8)), "haar", 2), 3)


def _map(band):
    return DecisionMap(np.zeros((1, 1), np.uint8), [(band, band.copy(), band.copy())])


def test_consistency_examples():
    uniform = np.full((4, 4), SOURCE_B, np.uint8)
    assert np.array_equal(consistency_verify(_map(uniform)).details[0][0], uniform)
    iso = np.zeros((3, 3), np.uint8)
    iso[1, 1] = SOURCE_B
    assert np.all(consistency_verify(_map(iso)).details[0][0] == SOURCE_A)
    tie = np.array([[SOURCE_A, SOURCE_A], [SOURCE_B, SOURCE_B]], np.uint8)
    assert np.array_equal(consistency_verify(_map(tie)).details[0][0], tie)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_consistency_domain(seed):
    band = np.random.default_rng(seed).integers(0, 2, size=(6, 7)).astype(np.uint8)
    out = consistency_verify(_map(band)).details[0][0]
    assert set(np.unique(out)) <= {SOURCE_A, SOURCE_B}


def test_combine_examples(rng):
    x = rng.normal(size=(8, 8))
    pa = dwt2(x, "db3", 2)
    m = decision_map(pa, pa, 3)
    out = combine(pa, pa, m)
    assert np.allclose(out.coefficients(), pa.coefficients())
    a, b = dwt2(np.full((4, 4), 5.0), "haar", 1), dwt2(np.full((4, 4), 10.0), "haar", 1)
    assert np.allclose(combine(a, b, decision_map(a, b, 3)).approximation, 15.0)


@pytest.mark.parametrize("basis", SUPPORTED_BASES)
def test_self_fusion(basis, rng):
    img = random_image(rng, 32, 32)
    out = fuse_pair(img, img, profile(basis, 2))
    assert np.max(np.abs(out.pixels.astype(int) - img.pixels.astype(int))) <= 1


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(SUPPORTED_BASES), st.integers(0, 2 ** 32 - 1))
def test_order_symmetry_without_ties(basis, seed):
    r = np.random.default_rng(seed)
    a = Image.from_array(r.integers(0, 256, size=(16, 16)), 8)
    b = Image.from_array(r.integers(0, 256, size=(16, 16)), 8)
    pa, pb = dwt2(a, basis, 1), dwt2(b, basis, 1)
    ties = any(np.any(activity(x, 3) == activity(y, 3))
               for dx, dy in zip(pa.details, pb.details) for x, y in zip(dx, dy))
    if not ties:
        assert fuse_pair(a, b, profile(basis)) == fuse_pair(b, a, profile(basis))


def test_fuse_pair_errors(rng):
    with pytest.raises(ImageMismatchError):
        fuse_pair(random_image(rng, 8, 8), random_image(rng, 8, 16))
    img = random_image(rng, 30, 30)
    with pytest.raises(FusionError):
        fuse_pair(img, img, profile("haar", 3))


def test_fuse_pair_output_depth(rng):
    a, b = random_image(rng, 16, 16), random_image(rng, 16, 16)
    out = fuse_pair(a, b, FusionProfile("high", "db4", 2, 16))
    assert out.bit_depth == 16


def test_split_blur_improves(rng):
    wins = 0
    for _ in range(5):
        truth = np.clip(gaussian_filter(rng.normal(128, 60, size=(64, 64)), 1.0) * 1.0, 0, 255)
        blur = gaussian_filter(truth, 2.0)
        a, b = truth.copy(), truth.copy()
        a[:, 32:], b[:, :32] = blur[:, 32:], blur[:, :32]
        t, ia, ib = (Image.from_array(np.rint(v), 8) for v in (truth, a, b))
        fused = fuse_pair(ia, ib, profile("db4", 2))
        wins += error_measure(t, fused).std <= min(error_measure(t, ia).std, error_measure(t, ib).std)
    assert wins == 5


def test_additive_mode():
    run = Image.from_array(np.full((4, 4), 10), 8)
    nxt = Image.from_array(np.full((4, 4), 250), 8)
    zero = profile(mode=ADDITIVE, fusion_factor=0.0)
    assert accumulate_fuse(run, nxt, zero) == run
    one = profile(mode=ADDITIVE)
    blank = Image.from_array(np.zeros((4, 4)), 8)
    assert accumulate_fuse(blank, nxt, one) == nxt
    assert np.all(accumulate_fuse(run, nxt, one).pixels == 255)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_additive_associative_without_clamp(seed):
    r = np.random.default_rng(seed)
    imgs = [Image.from_array(r.integers(0, 40, size=(4, 4)), 8) for _ in range(4)]
    p = profile(mode=ADDITIVE)
    left = imgs[0]
    for im in imgs[1:]:
        left = accumulate_fuse(left, im, p)
    tail = accumulate_fuse(accumulate_fuse(imgs[1], imgs[2], p), imgs[3], p)
    assert accumulate_fuse(imgs[0], tail, p) == left


def test_wavelet_accumulate_self(rng):
    img = random_image(rng, 16, 16)
    out = accumulate_fuse(img, img, profile(mode=WAVELET))
    assert np.max(np.abs(out.pixels.astype(int) - img.pixels.astype(int))) <= 1
