"""Separable 2-D DWT over orthogonal and biorthogonal two-channel filter banks.

Each 1-D step is a fixed linear map. It is precomputed per (basis, length) as
a gather table (indices and weights, one row per output sample) that the
kernels apply to every row of an array at once.

Boundary rule per family:
  * orthogonal (haar, dbN): periodic extension. Symmetric extension does not
    give perfect reconstruction for asymmetric Daubechies filters.
  * even-length symmetric biorthogonal filters (bior1.x, bior3.7):
    half-sample symmetric extension; the high band is antisymmetric.
  * odd-length symmetric biorthogonal filters (bior2.4, bior4.4):
    whole-sample symmetric extension.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import kernels
from .filterbanks import BIORTHOGONAL_ANALYSIS, BIORTHOGONAL_SYNTHESIS, ORTHOGONAL_SCALING
from .imagecore import Image

MAX_LEVELS = 5
SUPPORTED_BASES = ("haar", "db3", "db4", "db10",
                   "bior1.1", "bior1.3", "bior1.5", "bior2.4", "bior3.7", "bior4.4")
ORTHOGONAL_BASES = ("haar", "db3", "db4", "db10")

PERIODIC = "periodic"
HALF_SYMMETRIC = "half-symmetric"
WHOLE_SYMMETRIC = "whole-symmetric"


class WaveletError(ValueError):
    pass


class UnknownBasisError(WaveletError):
    pass


@dataclass(frozen=True)
class FilterBank:
    """Two-channel filter bank. Filters are in tap (correlation) order:
    analysis output m of a band is sum_k f[k] * x[2m + k - offset]."""
    name: str
    analysis_low: tuple
    analysis_high: tuple
    synthesis_low: tuple
    synthesis_high: tuple
    orthogonal: bool
    boundary: str

    @property
    def length(self) -> int:
        return len(self.analysis_low)


def _alt(seq, start_sign):
    return tuple(((-1) ** (k + start_sign)) * v for k, v in enumerate(seq))


@lru_cache(maxsize=None)
def basis_filters(name: str) -> FilterBank:
    key = name.strip().lower()
    if key in ORTHOGONAL_SCALING:
        rec_lo = ORTHOGONAL_SCALING[key]
        dec_lo = rec_lo[::-1]
        orthogonal, boundary = True, PERIODIC
    elif key in BIORTHOGONAL_ANALYSIS:
        dec_lo = BIORTHOGONAL_ANALYSIS[key]
        rec_lo = BIORTHOGONAL_SYNTHESIS[key]
        orthogonal = False
        nonzero = [i for i, v in enumerate(dec_lo) if v != 0.0]
        odd_support = (nonzero[-1] - nonzero[0] + 1) % 2 == 1
        boundary = WHOLE_SYMMETRIC if odd_support else HALF_SYMMETRIC
    else:
        hint = " (no FIR Meyer filter is provided)" if key in ("meyer", "mayer", "dmey") else ""
        raise UnknownBasisError(f"unknown wavelet basis {name!r}{hint}; choose from {SUPPORTED_BASES}")
    # quadrature-mirror relations between the four convolution filters
    dec_hi = _alt(rec_lo, 1)
    rec_hi = _alt(dec_lo, 0)
    return FilterBank(key, dec_lo[::-1], dec_hi[::-1], rec_lo[::-1], rec_hi[::-1],
                      orthogonal, boundary)


# -- index bookkeeping -------------------------------------------------------

def _ext(i: int, n: int, mode: str) -> int:
    if mode == PERIODIC:
        return i % n
    if mode == HALF_SYMMETRIC:
        r = i % (2 * n)
        return r if r < n else 2 * n - 1 - r
    if n == 1:
        return 0
    r = i % (2 * n - 2)
    return r if r < n else 2 * n - 2 - r


def _band(m: int, half: int, mode: str, high: bool):
    """Index into a band of length ``half`` for (possibly out-of-range) m, and
    the sign the extension applies."""
    if mode == PERIODIC:
        return m % half, 1.0
    if mode == HALF_SYMMETRIC:
        r = m % (2 * half)
        if r < half:
            return r, 1.0
        return 2 * half - 1 - r, (-1.0 if high else 1.0)
    # whole-sample: low samples sit at even positions, high at odd ones
    p = _ext(2 * m + (1 if high else 0), 2 * half, WHOLE_SYMMETRIC)
    return p // 2, 1.0


@lru_cache(maxsize=256)
def _tables(name: str, n: int):
    """Gather tables (analysis, synthesis) for signals of length n."""
    bank = basis_filters(name)
    dec_lo = bank.analysis_low[::-1]
    dec_hi = bank.analysis_high[::-1]
    rec_lo = bank.synthesis_low[::-1]
    rec_hi = bank.synthesis_high[::-1]
    L, half = bank.length, n // 2
    s = L // 2
    sp = L - 1 - s

    a_idx = np.empty((n, L), dtype=np.intp)
    a_w = np.empty((n, L))
    for m in range(half):
        for k in range(L):
            j = _ext(2 * m + s - k, n, bank.boundary)
            a_idx[m, k], a_w[m, k] = j, dec_lo[k]
            a_idx[half + m, k], a_w[half + m, k] = j, dec_hi[k]

    s_idx = np.zeros((n, L), dtype=np.intp)
    s_w = np.zeros((n, L))
    for i in range(n):
        t = 0
        for j in range(L):
            if (i + sp - j) % 2:
                continue
            m = (i + sp - j) // 2
            bl, sl = _band(m, half, bank.boundary, False)
            bh, sh = _band(m, half, bank.boundary, True)
            s_idx[i, t], s_w[i, t] = bl, sl * rec_lo[j]
            s_idx[i, t + 1], s_w[i, t + 1] = half + bh, sh * rec_hi[j]
            t += 2
    for arr in (a_idx, a_w, s_idx, s_w):
        arr.flags.writeable = False
    return a_idx, a_w, s_idx, s_w


def _analyze_rows(x, bank: FilterBank):
    n = x.shape[1]
    if n % 2:
        raise WaveletError(f"odd length {n} cannot be split into two bands")
    a_idx, a_w, _, _ = _tables(bank.name, n)
    return kernels.filter_rows(x, a_idx, a_w)


def _synthesize_rows(y, bank: FilterBank):
    _, _, s_idx, s_w = _tables(bank.name, y.shape[1])
    return kernels.filter_rows(y, s_idx, s_w)


def _bank(basis) -> FilterBank:
    return basis if isinstance(basis, FilterBank) else basis_filters(basis)


def analysis_step_1d(signal, bank):
    bank = _bank(bank)
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size < 2 or x.size % 2:
        raise WaveletError(f"signal length must be even and >= 2, got {x.size}")
    out = _analyze_rows(x[None, :], bank)[0]
    return out[: x.size // 2], out[x.size // 2:]


def synthesis_step_1d(low, high, bank):
    bank = _bank(bank)
    lo = np.asarray(low, dtype=np.float64)
    hi = np.asarray(high, dtype=np.float64)
    if lo.shape != hi.shape or lo.ndim != 1:
        raise WaveletError(f"band lengths differ: {lo.shape} vs {hi.shape}")
    return _synthesize_rows(np.concatenate([lo, hi])[None, :], bank)[0]


# -- 2-D ------------------------------------------------------------------

@dataclass
class SubbandPyramid:
    """details[k-1] holds (LH, HL, HH) of level k; level 1 is the finest."""
    levels: int
    approximation: np.ndarray
    details: list
    original_width: int
    original_height: int
    basis: str
    bit_depth: int | None = None

    def bands(self):
        """(name, array) for every band, coarsest first."""
        out = [(f"LL{self.levels}", self.approximation)]
        for k in range(self.levels, 0, -1):
            lh, hl, hh = self.details[k - 1]
            out += [(f"LH{k}", lh), (f"HL{k}", hl), (f"HH{k}", hh)]
        return out

    def coefficients(self) -> np.ndarray:
        return np.concatenate([a.ravel() for _, a in self.bands()])

    def shape_catalog(self):
        return [(name, a.shape) for name, a in self.bands()]


def dwt2(image, basis: str, levels: int) -> SubbandPyramid:
    """Rows first, then columns; recursive on LL."""
    bank = _bank(basis)
    if isinstance(image, Image):
        x, depth = image.pixels.astype(np.float64), image.bit_depth
    else:
        x, depth = np.asarray(image, dtype=np.float64), None
    if x.ndim != 2:
        raise WaveletError("dwt2 expects a 2-D input")
    if not 1 <= levels <= MAX_LEVELS:
        raise WaveletError(f"levels must be in 1..{MAX_LEVELS}, got {levels}")
    h, w = x.shape
    q = 1 << levels
    if h % q or w % q:
        raise WaveletError(f"{w}x{h} is not divisible by 2^{levels}")
    details = []
    cur = x
    for _ in range(levels):
        ch, cw = cur.shape
        rows = _analyze_rows(cur, bank)                 # [L | H] along each row
        cols = _analyze_rows(rows.T, bank).T            # [.L ; .H] down each column
        hh2, hw2 = ch // 2, cw // 2
        ll = cols[:hh2, :hw2]
        lh = cols[hh2:, :hw2]   # row-low, column-high: horizontal detail
        hl = cols[:hh2, hw2:]   # row-high, column-low: vertical detail
        hh = cols[hh2:, hw2:]
        details.append((lh.copy(), hl.copy(), hh.copy()))
        cur = ll.copy()
    return SubbandPyramid(levels, cur, details, w, h, bank.name, depth)


def _check_pyramid(pyr: SubbandPyramid):
    if pyr.levels < 1 or len(pyr.details) != pyr.levels:
        raise WaveletError(f"pyramid claims {pyr.levels} levels but has {len(pyr.details)} detail sets")
    h, w = pyr.original_height, pyr.original_width
    for k in range(1, pyr.levels + 1):
        want = (h >> k, w >> k)
        for name, band in zip(("LH", "HL", "HH"), pyr.details[k - 1]):
            if np.shape(band) != want:
                raise WaveletError(f"{name}{k} has shape {np.shape(band)}, expected {want}")
    want = (h >> pyr.levels, w >> pyr.levels)
    if np.shape(pyr.approximation) != want:
        raise WaveletError(f"LL{pyr.levels} has shape {np.shape(pyr.approximation)}, expected {want}")


def reconstruct(pyr: SubbandPyramid) -> np.ndarray:
    """Real-valued inverse transform."""
    _check_pyramid(pyr)
    bank = basis_filters(pyr.basis)
    cur = np.asarray(pyr.approximation, dtype=np.float64)
    for k in range(pyr.levels, 0, -1):
        lh, hl, hh = pyr.details[k - 1]
        cols = np.block([[cur, hl], [lh, hh]])
        rows = _synthesize_rows(cols.T, bank).T
        cur = _synthesize_rows(rows, bank)
    return cur


def idwt2(pyr: SubbandPyramid, bit_depth: int | None = None) -> Image:
    """Inverse transform rounded to the nearest integer and clamped to the depth range."""
    depth = bit_depth or pyr.bit_depth
    if depth is None:
        raise WaveletError("pyramid has no source bit depth; pass bit_depth")
    x = np.rint(reconstruct(pyr))
    x = np.clip(x, 0, (1 << depth) - 1)
    return Image(pyr.original_width, pyr.original_height, depth, x.astype(np.int64))


def energy(pyr: SubbandPyramid) -> float:
    c = pyr.coefficients()
    return float(np.dot(c, c))


def dump_pyramid(pyr: SubbandPyramid, directory) -> Path:
    """Write each band as raw little-endian float32 plus a manifest of
    ``name rows cols`` lines."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = [f"# basis {pyr.basis} levels {pyr.levels} size {pyr.original_width}x{pyr.original_height}"]
    for name, band in pyr.bands():
        np.asarray(band, dtype="<f4").tofile(d / f"{name}.f32")
        lines.append(f"{name} {band.shape[0]} {band.shape[1]}")
    (d / "manifest.txt").write_text("\n".join(lines) + "\n")
    return d


def load_pyramid_dump(directory) -> SubbandPyramid:
    d = Path(directory)
    lines = (d / "manifest.txt").read_text().splitlines()
    head = lines[0].split()
    basis, levels = head[2], int(head[4])
    w, h = (int(v) for v in head[6].split("x"))
    bands = {}
    for line in lines[1:]:
        name, r, c = line.split()
        bands[name] = np.fromfile(d / f"{name}.f32", dtype="<f4").astype(np.float64).reshape(int(r), int(c))
    details = [(bands[f"LH{k}"], bands[f"HL{k}"], bands[f"HH{k}"]) for k in range(1, levels + 1)]
    return SubbandPyramid(levels, bands[f"LL{levels}"], details, w, h, basis)


def max_levels(width: int, height: int) -> int:
    k = 0
    while k < MAX_LEVELS and width % (2 << k) == 0 and height % (2 << k) == 0:
        k += 1
    return k

