"""Compiled kernels for the batched stencil construction.

Everything here works on plain arrays; the readable per-point versions live
in :mod:`lisl_hjb.stencil` and :mod:`lisl_hjb.interp` and are used as test
oracles for these kernels.
"""

from __future__ import annotations

import numpy as np
from numba import njit

WEIGHT_CUTOFF = 1e-14
OVERSTEP_TOL = 1e-12
SNAP_TOL = 1e-12

ERR_NONE = 0
ERR_SCHEME = 1
ERR_TWO_SIDED = 2

MODE_TRUNCATE = 0
MODE_CONST = 1
MODE_LINEAR = 2


@njit(cache=True)
def _exit(x, y, lo, hi):
    best = np.inf
    axis = -1
    for i in range(x.shape[0]):
        if y[i] > 0.0:
            t = (hi[i] - x[i]) / y[i]
        elif y[i] < 0.0:
            t = (lo[i] - x[i]) / y[i]
        else:
            continue
        if t < best:
            best = t
            axis = i
    return best, axis


@njit(cache=True)
def _interp_into(z, lo, dx, shape, strides, coef, cols, vals, row, pos, local, w):
    d = z.shape[0]
    base = 0
    for i in range(d):
        s = (z[i] - lo[i]) / dx[i]
        if s < 0.0:
            s = 0.0
        if s > shape[i] - 1:
            s = shape[i] - 1.0
        r = np.floor(s + 0.5)
        if abs(s - r) <= SNAP_TOL:
            s = r
        k = int(np.floor(s))
        if k > shape[i] - 2:
            k = shape[i] - 2
        local[i] = s - k
        base += k * strides[i]
    ncorner = 1 << d
    total = 0.0
    for c in range(ncorner):
        wc = 1.0
        for i in range(d):
            if (c >> i) & 1:
                wc *= local[i]
            else:
                wc *= 1.0 - local[i]
        if wc < WEIGHT_CUTOFF:
            wc = 0.0
        w[c] = wc
        total += wc
    for c in range(ncorner):
        if w[c] == 0.0:
            continue
        idx = base
        for i in range(d):
            if (c >> i) & 1:
                idx += strides[i]
        cols[row, pos] = idx
        vals[row, pos] = coef * w[c] / total
        pos += 1
    return pos


@njit(cache=True)
def stencil_rows(X, node_ids, Yp, Ym, is_drift, lo, hi, dx, shape, strides, h,
                 scheme2, mode, exact):
    n, M, d = Yp.shape
    ncorner = 1 << d
    K = 2 * M * ncorner
    cols = np.empty((n, K), dtype=np.int64)
    vals = np.zeros((n, K))
    diag = np.zeros(n)
    bpts = np.zeros((n, 2 * M, d))
    bcoef = np.zeros((n, 2 * M))
    A_out = np.ones((n, M))
    B_out = np.ones((n, M))
    mup_out = np.ones((n, M))
    mum_out = np.ones((n, M))
    over = np.zeros((n, M), dtype=np.int8)
    err = np.zeros(n, dtype=np.int8)
    inv2h = 1.0 / (2.0 * h)
    z = np.empty(d)
    local = np.empty(d)
    wscr = np.empty(ncorner)
    for r in range(n):
        j = node_ids[r]
        for k in range(K):
            cols[r, k] = j
        pos = 0
        x = X[r]
        for p in range(M):
            yp = Yp[r, p]
            ym = Ym[r, p]
            zero_p = True
            zero_m = True
            for i in range(d):
                if yp[i] != 0.0:
                    zero_p = False
                if ym[i] != 0.0:
                    zero_m = False
            if zero_p and zero_m:
                continue
            mu_p = 1.0
            ax_p = -1
            if not zero_p:
                t, ax = _exit(x, yp, lo, hi)
                if t < 1.0 - OVERSTEP_TOL:
                    mu_p = max(t, 0.0)
                    ax_p = ax
            mu_m = 1.0
            ax_m = -1
            if not zero_m:
                t, ax = _exit(x, ym, lo, hi)
                if t < 1.0 - OVERSTEP_TOL:
                    mu_m = max(t, 0.0)
                    ax_m = ax
            code = 0
            if mu_p < 1.0:
                code += 1
            if mu_m < 1.0:
                code += 2
            if is_drift[p] and code != 0:
                code = 1
            over[r, p] = code
            mup_out[r, p] = mu_p
            mum_out[r, p] = mu_m
            A = 1.0
            B = 1.0
            if code != 0 and mode == MODE_TRUNCATE:
                if not scheme2:
                    err[r] = ERR_SCHEME
                    continue
                if code == 3 and not exact and not is_drift[p]:
                    err[r] = ERR_TWO_SIDED
                    continue
                if is_drift[p]:
                    A = 1.0 / mu_p
                    B = 1.0 / mu_m
                else:
                    A = 2.0 / (mu_p * mu_p + mu_p * mu_m)
                    B = 2.0 / (mu_m * mu_m + mu_m * mu_p)
            A_out[r, p] = A
            B_out[r, p] = B
            diag[r] += (A + B) * inv2h
            for side in range(2):
                if side == 0:
                    y = yp
                    mu = mu_p
                    ax = ax_p
                    wgt = A * inv2h
                    if zero_p:
                        continue
                else:
                    y = ym
                    mu = mu_m
                    ax = ax_m
                    wgt = B * inv2h
                    if zero_m:
                        continue
                for i in range(d):
                    z[i] = x[i] + mu * y[i]
                if ax >= 0:
                    # place the exit point exactly on its face
                    if y[ax] > 0.0:
                        z[ax] = hi[ax]
                    else:
                        z[ax] = lo[ax]
                slot = 2 * p + side
                if mu < 1.0:
                    if mode == MODE_TRUNCATE:
                        if exact:
                            for i in range(d):
                                bpts[r, slot, i] = z[i]
                            bcoef[r, slot] = wgt
                        else:
                            pos = _interp_into(z, lo, dx, shape, strides, wgt, cols, vals, r, pos, local, wscr)
                        continue
                    scale = 1.0
                    if mode == MODE_LINEAR:
                        # U(x+y) ~ psi(x_b)/mu - (1-mu)/mu U_j: the U_j part joins the diagonal
                        scale = 1.0 / mu
                        diag[r] += wgt * (1.0 - mu) / mu
                    if exact:
                        for i in range(d):
                            bpts[r, slot, i] = z[i]
                        bcoef[r, slot] = wgt * scale
                    else:
                        pos = _interp_into(z, lo, dx, shape, strides, wgt * scale, cols, vals, r, pos, local, wscr)
                else:
                    pos = _interp_into(z, lo, dx, shape, strides, wgt, cols, vals, r, pos, local, wscr)
    return cols, vals, diag, bpts, bcoef, A_out, B_out, mup_out, mum_out, over, err


@njit(cache=True)
def gather_apply(cols, vals, u):
    n, K = cols.shape
    out = np.zeros(n)
    for r in range(n):
        acc = 0.0
        for k in range(K):
            acc += vals[r, k] * u[cols[r, k]]
        out[r] = acc
    return out
