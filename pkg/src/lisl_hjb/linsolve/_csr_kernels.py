"""Compiled CSR kernels: Gauss-Seidel sweeps, ILU(0) factorisation and triangular solves."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def gs_forward(indptr, indices, data, diag, b, x):
    n = b.shape[0]
    for i in range(n):
        acc = b[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j != i:
                acc -= data[k] * x[j]
        x[i] = acc / diag[i]


@njit(cache=True)
def gs_backward(indptr, indices, data, diag, b, x):
    n = b.shape[0]
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j != i:
                acc -= data[k] * x[j]
        x[i] = acc / diag[i]


@njit(cache=True)
def ilu0_factor(indptr, indices, data):
    """In-place ILU(0) on a copy of ``data`` (sorted column indices required).

    Returns ``(lu, diag_ptr, bad_row)`` where ``bad_row >= 0`` flags a zero pivot.
    """
    n = indptr.shape[0] - 1
    lu = data.copy()
    diag_ptr = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] == i:
                diag_ptr[i] = k
                break
        if diag_ptr[i] < 0:
            return lu, diag_ptr, i
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            pos[indices[k]] = k
        for kk in range(indptr[i], diag_ptr[i]):
            j = indices[kk]
            piv = lu[diag_ptr[j]]
            if piv == 0.0:
                return lu, diag_ptr, j
            lu[kk] /= piv
            mult = lu[kk]
            for m in range(diag_ptr[j] + 1, indptr[j + 1]):
                p = pos[indices[m]]
                if p >= 0:
                    lu[p] -= mult * lu[m]
        for k in range(indptr[i], indptr[i + 1]):
            pos[indices[k]] = -1
        if lu[diag_ptr[i]] == 0.0:
            return lu, diag_ptr, i
    return lu, diag_ptr, -1


@njit(cache=True)
def ilu0_solve(indptr, indices, lu, diag_ptr, b):
    n = b.shape[0]
    y = b.copy()
    for i in range(n):
        acc = y[i]
        for k in range(indptr[i], diag_ptr[i]):
            acc -= lu[k] * y[indices[k]]
        y[i] = acc
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for k in range(diag_ptr[i] + 1, indptr[i + 1]):
            acc -= lu[k] * y[indices[k]]
        y[i] = acc / lu[diag_ptr[i]]
    return y


@njit(cache=True)
def greedy_matching(n, ei, ej, eligible):
    """Match nodes along edges in the given order; returns aggregate ids (-1 = excluded)."""
    agg = np.full(n, -1, dtype=np.int64)
    matched = np.zeros(n, dtype=np.bool_)
    count = 0
    for k in range(ei.shape[0]):
        i = ei[k]
        j = ej[k]
        if matched[i] or matched[j]:
            continue
        matched[i] = True
        matched[j] = True
        agg[i] = count
        agg[j] = count
        count += 1
    for i in range(n):
        if eligible[i] and not matched[i]:
            agg[i] = count
            count += 1
    return agg, count
