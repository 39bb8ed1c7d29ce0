# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Mirrors poirec._fallback line for line."""

from libc.math cimport exp, log, sqrt

import numpy as np


def em_accumulate(const long long[::1] kw_idx, const long long[::1] kw_ptr,
                  const long long[::1] tag_idx, const long long[::1] tag_ptr,
                  const long long[::1] len_row,
                  const double[:, ::1] trans, const double[:, ::1] pos,
                  double[:, ::1] count_trans, double[:, ::1] count_pos):
    cdef Py_ssize_t n, j, i, npairs = kw_ptr.shape[0] - 1
    cdef Py_ssize_t n_tags, r, f, t, t0
    cdef double denom, g, loglik = 0.0
    for n in range(npairs):
        t0 = tag_ptr[n]
        n_tags = tag_ptr[n + 1] - t0
        r = len_row[n]
        for j in range(kw_ptr[n], kw_ptr[n + 1]):
            f = kw_idx[j]
            denom = pos[r, 0] * trans[0, f]
            for i in range(1, n_tags + 1):
                denom += pos[r, i] * trans[tag_idx[t0 + i - 1], f]
            if denom <= 0.0:
                return float("nan")
            loglik += log(denom)
            g = pos[r, 0] * trans[0, f] / denom
            count_trans[0, f] += g
            count_pos[r, 0] += g
            for i in range(1, n_tags + 1):
                t = tag_idx[t0 + i - 1]
                g = pos[r, i] * trans[t, f] / denom
                count_trans[t, f] += g
                count_pos[r, i] += g
    return loglik


def pegasos(const double[:, ::1] X, const double[::1] y,
            const long long[::1] order, double lam, double[::1] w):
    cdef Py_ssize_t step, k, d = X.shape[1], nsteps = order.shape[0]
    cdef long long row
    cdef double eta, margin, norm2, radius2 = 1.0 / lam, scale
    for step in range(nsteps):
        row = order[step]
        eta = 1.0 / (lam * (step + 1))
        margin = 0.0
        for k in range(d):
            margin += w[k] * X[row, k]
        margin *= y[row]
        scale = 1.0 - eta * lam
        for k in range(d):
            w[k] *= scale
        if margin < 1.0:
            for k in range(d):
                w[k] += eta * y[row] * X[row, k]
        norm2 = 0.0
        for k in range(d):
            norm2 += w[k] * w[k]
        if norm2 > radius2:
            scale = sqrt(radius2 / norm2)
            for k in range(d):
                w[k] *= scale


def listnet_epoch(const double[:, ::1] X, const double[::1] target,
                  const long long[::1] offsets, const long long[::1] order,
                  double lr, double[::1] w):
    cdef Py_ssize_t q, a, b, r, k, d = X.shape[1]
    cdef double smax, z, p
    cdef double[::1] s = np.empty(X.shape[0], dtype=np.float64)
    cdef double[::1] grad = np.empty(d, dtype=np.float64)
    for q in range(order.shape[0]):
        a = offsets[order[q]]
        b = offsets[order[q] + 1]
        smax = -1e300
        for r in range(a, b):
            s[r] = 0.0
            for k in range(d):
                s[r] += X[r, k] * w[k]
            if s[r] > smax:
                smax = s[r]
        z = 0.0
        for r in range(a, b):
            s[r] = exp(s[r] - smax)
            z += s[r]
        for k in range(d):
            grad[k] = 0.0
        for r in range(a, b):
            p = s[r] / z - target[r]
            for k in range(d):
                grad[k] += p * X[r, k]
        for k in range(d):
            w[k] -= lr * grad[k]
