# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the numeric kernels. See _pure for semantics."""
import numpy as np


def filter_rows(x, idx, w):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const Py_ssize_t[:, ::1] iv = np.ascontiguousarray(idx, dtype=np.intp)
    cdef const double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t R = xv.shape[0], N = iv.shape[0], T = iv.shape[1]
    cdef Py_ssize_t r, i, t
    cdef double acc
    out = np.empty((R, N))
    cdef double[:, ::1] ov = out
    for r in range(R):
        for i in range(N):
            acc = 0.0
            for t in range(T):
                acc += xv[r, iv[i, t]] * wv[i, t]
            ov[r, i] = acc
    return out


def box_sum(a, Py_ssize_t size):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t h = av.shape[0], w = av.shape[1], rad = size // 2
    cdef Py_ssize_t i, j, k, jj, ii
    cdef double acc
    rows = np.empty((h, w))
    out = np.empty((h, w))
    cdef double[:, ::1] rv = rows
    cdef double[:, ::1] ov = out
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for k in range(size):
                jj = j - rad + k
                if 0 <= jj < w:
                    acc += av[i, jj]
                else:
                    acc += 0.0
            rv[i, j] = acc
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for k in range(size):
                ii = i - rad + k
                if 0 <= ii < h:
                    acc += rv[ii, j]
                else:
                    acc += 0.0
            ov[i, j] = acc
    return out


def majority3(labels):
    cdef const unsigned char[:, ::1] lv = np.ascontiguousarray(labels, dtype=np.uint8)
    cdef Py_ssize_t h = lv.shape[0], w = lv.shape[1]
    cdef Py_ssize_t i, j, di, dj, ii, jj
    cdef int ones, n
    out = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] ov = out
    for i in range(h):
        for j in range(w):
            ones = 0
            n = 0
            for di in range(-1, 2):
                ii = i + di
                if ii < 0 or ii >= h:
                    continue
                for dj in range(-1, 2):
                    jj = j + dj
                    if jj < 0 or jj >= w:
                        continue
                    n += 1
                    ones += lv[ii, jj]
            if 2 * ones > n:
                ov[i, j] = 1
            elif 2 * ones < n:
                ov[i, j] = 0
            else:
                ov[i, j] = lv[i, j]
    return out
