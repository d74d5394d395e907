"""NumPy backend for the numeric kernels.

Summation order matches the compiled backend term for term, so the two give
bitwise-identical results.
"""
import numpy as np


def filter_rows(x, idx, w):
    """out[r, i] = sum_t w[i, t] * x[r, idx[i, t]]"""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros((x.shape[0], idx.shape[0]))
    for t in range(idx.shape[1]):
        out += x[:, idx[:, t]] * w[:, t]
    return out


def box_sum(a, size):
    """Sum over a size x size window centred on each entry, clipped at the edges."""
    a = np.asarray(a, dtype=np.float64)
    r = size // 2
    h, w = a.shape
    p = np.pad(a, r)
    rows = np.zeros((h + 2 * r, w))
    for k in range(size):
        rows += p[:, k:k + w]
    out = np.zeros((h, w))
    for k in range(size):
        out += rows[k:k + h]
    return out


def majority3(labels):
    """3x3 majority vote over a 0/1 map; ties keep the centre entry."""
    lab = np.asarray(labels, dtype=np.uint8)
    ones = box_sum(lab, 3).astype(np.int64)
    n = box_sum(np.ones(lab.shape), 3).astype(np.int64)
    out = lab.copy()
    out[2 * ones > n] = 1
    out[2 * ones < n] = 0
    return out
