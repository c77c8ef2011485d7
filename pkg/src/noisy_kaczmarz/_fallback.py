"""Solver loops in numpy; the reference for the compiled ``_kernels`` module.

Both modules expose ``run_dense`` and ``run_csr`` with identical signatures
and semantics.  ``x`` and ``r`` are updated in place and the ``out_*``
buffers (length ``max_iter + 1``) receive one record per visited iterate.

Modes: 0 norm-squared (RK), 1 relaxed greedy, 2 maximal correction.
Return value: ``(steps, reason, max_drift)`` with reason 0 = tolerance
reached, 1 = iteration cap, 2 = stationary (every residual entry is zero).
"""
import math

import numpy as np

MODE_RK = 0
MODE_GREEDY = 1
MODE_MAXCORR = 2

REASON_TOL = 0
REASON_MAXITER = 1
REASON_STATIONARY = 2

MEMBERSHIP_RTOL = 1e-12


def _select(mode, r, rr, row_norm_sq, frob_sq, cdf, theta, u):
    """Row index for the next step, or -1 when the residual vanishes."""
    if mode == MODE_RK:
        idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
        return min(idx, cdf.size - 1)
    ratio = r * r / row_norm_sq
    imax = int(np.argmax(ratio))
    top = ratio[imax]
    if top == 0.0:
        return -1
    if mode == MODE_MAXCORR:
        return imax
    mu = theta * top + (1.0 - theta) * rr / frob_sq
    U = np.flatnonzero(ratio >= mu - MEMBERSHIP_RTOL * mu)
    rU = r[U]
    c = np.cumsum(rU * rU)
    j = int(np.searchsorted(c, u * c[-1], side="right"))
    return int(U[min(j, U.size - 1)])


def _loop(row_of, update_residual, full_residual, b, x, r, row_norm_sq, frob_sq,
          cdf, mode, theta, uniforms, max_iter, tol, xhat, use_error, b_norm,
          refresh, out_idx, out_err, out_res, out_time, x_hist, record_hist, timer):
    xhat_norm = math.sqrt(float(xhat @ xhat)) if use_error else 1.0
    max_drift = 0.0
    reason = REASON_MAXITER
    t0 = timer()
    k = 0
    while True:
        rr = float(r @ r)
        res = math.sqrt(rr)
        if use_error:
            d = x - xhat
            err = math.sqrt(float(d @ d)) / xhat_norm
            out_err[k] = err
            stop = err <= tol
        else:
            out_err[k] = math.nan
            stop = (res / b_norm if b_norm > 0.0 else res) <= tol
        out_res[k] = res
        out_idx[k] = -1
        if record_hist:
            x_hist[k] = x
        out_time[k] = timer() - t0
        if stop:
            reason = REASON_TOL
            break
        if k == max_iter:
            reason = REASON_MAXITER
            break
        i = _select(mode, r, rr, row_norm_sq, frob_sq, cdf, theta, uniforms[k])
        if i < 0:
            reason = REASON_STATIONARY
            break
        out_idx[k] = i
        cols, vals = row_of(i)
        beta = float(vals @ x[cols]) - b[i]
        coef = beta / row_norm_sq[i]
        x[cols] -= coef * vals
        update_residual(i, cols, vals, coef)
        k += 1
        if k % refresh == 0:
            fresh = full_residual()
            drift = math.sqrt(float((fresh - r) @ (fresh - r)))
            if drift > max_drift:
                max_drift = drift
            r[:] = fresh
    return k, reason, max_drift


def run_dense(A, b, x, r, row_norm_sq, frob_sq, cdf, mode, theta, uniforms,
              max_iter, tol, xhat, use_error, b_norm, refresh,
              out_idx, out_err, out_res, out_time, x_hist, record_hist, timer):
    cols = slice(None)

    def row_of(i):
        return cols, A[i]

    def update_residual(i, _cols, vals, coef):
        r[:] -= coef * (A @ vals)

    def full_residual():
        return A @ x - b

    return _loop(row_of, update_residual, full_residual, b, x, r, row_norm_sq,
                 frob_sq, cdf, mode, theta, uniforms, max_iter, tol, xhat,
                 use_error, b_norm, refresh, out_idx, out_err, out_res, out_time,
                 x_hist, record_hist, timer)


def run_csr(indptr, indices, data, csc_ptr, csc_idx, csc_data, b, x, r,
            row_norm_sq, frob_sq, cdf, mode, theta, uniforms, max_iter, tol,
            xhat, use_error, b_norm, refresh, out_idx, out_err, out_res,
            out_time, x_hist, record_hist, timer):
    m = b.shape[0]

    def row_of(i):
        lo, hi = indptr[i], indptr[i + 1]
        return indices[lo:hi], data[lo:hi]

    def update_residual(i, cols, vals, coef):
        # A a_i = sum over the row's support of a_ic * (column c of A)
        for c, v in zip(cols, vals):
            lo, hi = csc_ptr[c], csc_ptr[c + 1]
            r[csc_idx[lo:hi]] -= (coef * v) * csc_data[lo:hi]

    def full_residual():
        prod = data * x[indices]
        out = np.zeros(m)
        nonempty = np.diff(indptr) > 0
        if prod.size:
            out[nonempty] = np.add.reduceat(prod, indptr[:-1][nonempty])
        return out - b

    return _loop(row_of, update_residual, full_residual, b, x, r, row_norm_sq,
                 frob_sq, cdf, mode, theta, uniforms, max_iter, tol, xhat,
                 use_error, b_norm, refresh, out_idx, out_err, out_res, out_time,
                 x_hist, record_hist, timer)
