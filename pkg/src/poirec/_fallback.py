"""Pure-Python implementations of the compiled kernels in ``_speedups.pyx``.

Signatures and in-place semantics are identical; only speed differs.
"""

import math

import numpy as np


def em_accumulate(kw_idx, kw_ptr, tag_idx, tag_ptr, len_row, trans, pos, count_trans, count_pos):
    loglik = 0.0
    for n in range(len(kw_ptr) - 1):
        rows = np.concatenate(([0], tag_idx[tag_ptr[n]:tag_ptr[n + 1]]))
        prior = pos[len_row[n], : len(rows)]
        fs = kw_idx[kw_ptr[n]:kw_ptr[n + 1]]
        # joint[i, j] = p(i|I) p(f_j | t_i)
        joint = prior[:, None] * trans[rows][:, fs]
        denom = joint.sum(axis=0)
        if np.any(denom <= 0.0):
            return float("nan")
        loglik += float(np.log(denom).sum())
        gamma = joint / denom
        np.add.at(count_trans, (rows[:, None], fs[None, :]), gamma)
        count_pos[len_row[n], : len(rows)] += gamma.sum(axis=1)
    return loglik


def pegasos(X, y, order, lam, w):
    radius2 = 1.0 / lam
    for step, row in enumerate(order):
        eta = 1.0 / (lam * (step + 1))
        x = X[row]
        margin = y[row] * float(w @ x)
        w *= 1.0 - eta * lam
        if margin < 1.0:
            w += eta * y[row] * x
        norm2 = float(w @ w)
        if norm2 > radius2:
            w *= math.sqrt(radius2 / norm2)


def listnet_epoch(X, target, offsets, order, lr, w):
    for q in order:
        a, b = offsets[q], offsets[q + 1]
        s = X[a:b] @ w
        p = np.exp(s - s.max())
        p /= p.sum()
        w -= lr * ((p - target[a:b]) @ X[a:b])
