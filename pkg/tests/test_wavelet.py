import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctxfuse.filterbanks import BIORTHOGONAL_ANALYSIS, BIORTHOGONAL_SYNTHESIS, ORTHOGONAL_SCALING
from ctxfuse.imagecore import Image
from ctxfuse.wavelet import (ORTHOGONAL_BASES, SUPPORTED_BASES, SubbandPyramid, UnknownBasisError,
                             WaveletError, analysis_step_1d, basis_filters, dump_pyramid, dwt2,
                             energy, idwt2, load_pyramid_dump, max_levels, reconstruct,
                             synthesis_step_1d)

R2 = math.sqrt(2.0)


def test_haar_filters():
    b = basis_filters("haar")
    assert b.analysis_low == pytest.approx((1 / R2, 1 / R2))
    assert b.analysis_high == pytest.approx((1 / R2, -1 / R2))


@pytest.mark.parametrize("name", list(ORTHOGONAL_SCALING))
def test_orthogonal_table_identities(name):
    h = np.array(ORTHOGONAL_SCALING[name])
    assert h.sum() == pytest.approx(R2, abs=1e-12)
    assert np.sum(h * (-1.0) ** np.arange(h.size)) == pytest.approx(0.0, abs=1e-12)
    for m in range(h.size // 2):
        dot = float(np.dot(h[: h.size - 2 * m], h[2 * m:]))
        assert dot == pytest.approx(1.0 if m == 0 else 0.0, abs=1e-12)


@pytest.mark.parametrize("name", list(BIORTHOGONAL_ANALYSIS))
def test_biorthogonal_table_identities(name):
    d = np.array(BIORTHOGONAL_ANALYSIS[name])
    r = np.array(BIORTHOGONAL_SYNTHESIS[name])
    assert d.sum() == pytest.approx(R2, abs=1e-12)
    assert r.sum() == pytest.approx(R2, abs=1e-12)
    # dual scaling filters are orthogonal to each other's even shifts
    c = np.correlate(r, d, "full")
    for lags in (c[::2], c[1::2]):
        if np.isclose(lags.max(), 1.0, atol=1e-12):
            assert np.sum(np.abs(lags)) == pytest.approx(1.0, abs=1e-12)
            break
    else:
        pytest.fail("no parity of lags forms a unit impulse")


def test_orthogonal_synthesis_is_time_reverse():
    for name in ORTHOGONAL_BASES:
        b = basis_filters(name)
        assert b.orthogonal
        assert b.synthesis_low == pytest.approx(b.analysis_low[::-1])
        assert b.synthesis_high == pytest.approx(b.analysis_high[::-1])


def test_unknown_bases():
    for name in ("meyer", "mayer", "db2", ""):
        with pytest.raises(UnknownBasisError):
            basis_filters(name)
    with pytest.raises(UnknownBasisError, match="Meyer"):
        basis_filters("mayer")


def test_haar_1d_examples():
    lo, hi = analysis_step_1d([4, 4], "haar")
    assert lo == pytest.approx([8 / R2]) and hi == pytest.approx([0.0])
    lo, hi = analysis_step_1d([6, 2], "haar")
    assert lo == pytest.approx([8 / R2]) and hi == pytest.approx([4 / R2])
    assert synthesis_step_1d([8 / R2], [0.0], "haar") == pytest.approx([4, 4])
    with pytest.raises(WaveletError):
        analysis_step_1d([1, 2, 3], "haar")
    with pytest.raises(WaveletError):
        synthesis_step_1d([1, 2], [1], "haar")


@pytest.mark.parametrize("name", SUPPORTED_BASES)
def test_1d_round_trip(name, rng):
    for n in (2, 8, 32, 34):
        x = rng.normal(size=n)
        lo, hi = analysis_step_1d(x, name)
        assert np.max(np.abs(synthesis_step_1d(lo, hi, name) - x)) < 1e-9


def test_dwt2_small_examples():
    pyr = dwt2(np.full((4, 4), 3.0), "haar", 1)
    assert np.allclose(pyr.approximation, 6.0)
    assert all(np.allclose(b, 0) for b in pyr.details[0])
    a, b, c, d = 1.0, 5.0, 7.0, 11.0
    pyr = dwt2(np.array([[a, b], [c, d]]), "haar", 1)
    assert pyr.approximation[0, 0] == pytest.approx((a + b + c + d) / 2)
    with pytest.raises(WaveletError):
        dwt2(np.zeros((6, 6)), "haar", 2)
    with pytest.raises(WaveletError):
        dwt2(np.zeros((8, 8)), "haar", 0)


def test_band_shapes():
    pyr = dwt2(np.zeros((32, 64)), "db4", 3)
    assert pyr.shape_catalog()[0] == ("LL3", (4, 8))
    assert dict(pyr.shape_catalog())["HH1"] == (16, 32)
    assert len(pyr.coefficients()) == 32 * 64


@pytest.mark.parametrize("name", SUPPORTED_BASES)
def test_separability(name, rng):
    x = rng.normal(size=(8, 8))
    rows = np.array([np.concatenate(analysis_step_1d(r, name)) for r in x])
    both = np.array([np.concatenate(analysis_step_1d(c, name)) for c in rows.T]).T
    pyr = dwt2(x, name, 1)
    lh, hl, hh = pyr.details[0]
    assert np.allclose(both[:4, :4], pyr.approximation, atol=1e-12)
    assert np.allclose(both[4:, :4], lh, atol=1e-12)
    assert np.allclose(both[:4, 4:], hl, atol=1e-12)
    assert np.allclose(both[4:, 4:], hh, atol=1e-12)


@pytest.mark.parametrize("name", SUPPORTED_BASES)
def test_constant_shift_touches_only_approximation(name, rng):
    x = rng.normal(size=(16, 16))
    a, b = dwt2(x, name, 2), dwt2(x + 7.5, name, 2)
    for da, db in zip(a.details, b.details):
        for u, v in zip(da, db):
            assert np.max(np.abs(u - v)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(SUPPORTED_BASES), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_round_trip_property(name, k, seed):
    x = np.random.default_rng(seed).uniform(-100, 100, size=(16, 24))
    assert np.max(np.abs(reconstruct(dwt2(x, name, k)) - x)) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(ORTHOGONAL_BASES), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_energy_property(name, k, seed):
    x = np.random.default_rng(seed).normal(size=(16, 16))
    assert energy(dwt2(x, name, k)) == pytest.approx(float(np.sum(x * x)), rel=1e-8)


def test_haar_integer_round_trip_exact(rng):
    for _ in range(100):
        img = Image.from_array(rng.integers(0, 256, size=(16, 16)), 8)
        assert idwt2(dwt2(img, "haar", 2)) == img


def test_idwt2_zero_and_shape_errors():
    pyr = dwt2(np.zeros((8, 8)), "db3", 2)
    assert np.all(idwt2(pyr, 8).pixels == 0)
    with pytest.raises(WaveletError):
        idwt2(pyr)   # float input carries no depth
    lh, hl, hh = pyr.details[0]
    bad = SubbandPyramid(2, pyr.approximation, [(lh[:, :2], hl, hh), pyr.details[1]], 8, 8, "db3", 8)
    with pytest.raises(WaveletError):
        idwt2(bad)


def test_idwt2_clamps():
    pyr = dwt2(np.full((4, 4), 300.0), "haar", 1)
    assert np.all(idwt2(pyr, 8).pixels == 255)


def test_dump_round_trip(tmp_path, rng):
    x = rng.normal(size=(16, 16))
    pyr = dwt2(x, "bior2.4", 2)
    back = load_pyramid_dump(dump_pyramid(pyr, tmp_path / "d"))
    assert back.shape_catalog() == pyr.shape_catalog()
    assert np.max(np.abs(reconstruct(back) - x)) < 1e-4   # float32 storage


def test_max_levels():
    assert max_levels(64, 64) == 5
    assert max_levels(24, 16) == 3
    assert max_levels(6, 6) == 1
