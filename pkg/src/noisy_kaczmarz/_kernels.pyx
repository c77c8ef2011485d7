# cython: language_level=3
"""Compiled solver loops.  Same contract as ``noisy_kaczmarz._fallback``."""
from libc.math cimport sqrt, NAN
from scipy.linalg.cython_blas cimport dgemv

cdef enum:
    MODE_RK = 0
    MODE_GREEDY = 1
    MODE_MAXCORR = 2

cdef enum:
    REASON_TOL = 0
    REASON_MAXITER = 1
    REASON_STATIONARY = 2

cdef double MEMBERSHIP_RTOL = 1e-12


cdef Py_ssize_t _search_cdf(const double* c, Py_ssize_t size, double target) noexcept nogil:
    # first index with c[i] > target (c non-decreasing), clamped to size - 1
    cdef Py_ssize_t lo = 0, hi = size, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if c[mid] > target:
            hi = mid
        else:
            lo = mid + 1
    if lo >= size:
        lo = size - 1
    return lo


cdef Py_ssize_t _select(int mode, Py_ssize_t m, const double* r, double rr,
                        const double* row_norm_sq, double frob_sq,
                        const double* cdf, double theta, double u,
                        Py_ssize_t* cand, double* cum) noexcept nogil:
    cdef Py_ssize_t i, imax = 0, nc = 0
    cdef double ratio, top = -1.0, mu, thresh, acc
    if mode == MODE_RK:
        return _search_cdf(cdf, m, u * cdf[m - 1])
    for i in range(m):
        ratio = r[i] * r[i] / row_norm_sq[i]
        if ratio > top:
            top = ratio
            imax = i
    if top == 0.0:
        return -1
    if mode == MODE_MAXCORR:
        return imax
    mu = theta * top + (1.0 - theta) * rr / frob_sq
    thresh = mu - MEMBERSHIP_RTOL * mu
    acc = 0.0
    for i in range(m):
        ratio = r[i] * r[i] / row_norm_sq[i]
        if ratio >= thresh:
            cand[nc] = i
            acc = acc + r[i] * r[i]
            cum[nc] = acc
            nc += 1
    return cand[_search_cdf(cum, nc, u * cum[nc - 1])]


cdef double _sumsq(const double* v, Py_ssize_t size) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(size):
        s += v[i] * v[i]
    return s


cdef double _rel_error(const double* x, const double* xhat, Py_ssize_t size, double xhat_norm) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s = 0.0, d
    for j in range(size):
        d = x[j] - xhat[j]
        s += d * d
    return sqrt(s) / xhat_norm


cdef void _matvec_rowmajor(const double* A, int m, int n, const double* v, double* y) noexcept nogil:
    # y = A v for row-major A: column-major view is A^T with lda = n
    cdef int one = 1
    cdef double alpha = 1.0, beta = 0.0
    cdef char trans = b'T'
    dgemv(&trans, &n, &m, &alpha, <double*>A, &n, <double*>v, &one, &beta, y, &one)


def run_dense(const double[:, ::1] A, const double[::1] b, double[::1] x, double[::1] r,
              const double[::1] row_norm_sq, double frob_sq, const double[::1] cdf,
              int mode, double theta, const double[::1] uniforms, Py_ssize_t max_iter,
              double tol, const double[::1] xhat, bint use_error, double b_norm,
              Py_ssize_t refresh, Py_ssize_t[::1] out_idx, double[::1] out_err,
              double[::1] out_res, double[::1] out_time, double[:, ::1] x_hist,
              bint record_hist, timer):
    cdef Py_ssize_t m = A.shape[0], n = A.shape[1]
    cdef Py_ssize_t k = 0, i, j
    cdef int reason = REASON_MAXITER
    cdef double rr, res, err, beta, coef, drift, max_drift = 0.0, d
    cdef double xhat_norm = sqrt(_sumsq(&xhat[0], xhat.shape[0])) if use_error else 1.0
    cdef bint stop
    cdef Py_ssize_t[::1] cand
    cdef double[::1] cum, y
    import numpy as np
    cand = np.empty(m, dtype=np.intp)
    cum = np.empty(m)
    y = np.empty(m)
    t0 = timer()
    while True:
        rr = _sumsq(&r[0], m)
        res = sqrt(rr)
        if use_error:
            err = _rel_error(&x[0], &xhat[0], x.shape[0], xhat_norm)
            out_err[k] = err
            stop = err <= tol
        else:
            out_err[k] = NAN
            stop = (res / b_norm if b_norm > 0.0 else res) <= tol
        out_res[k] = res
        out_idx[k] = -1
        if record_hist:
            for j in range(x.shape[0]):
                x_hist[k, j] = x[j]
        out_time[k] = timer() - t0
        if stop:
            reason = REASON_TOL
            break
        if k == max_iter:
            reason = REASON_MAXITER
            break
        with nogil:
            i = _select(mode, m, &r[0], rr, &row_norm_sq[0], frob_sq, &cdf[0], theta,
                        uniforms[k], &cand[0], &cum[0])
            if i >= 0:
                beta = 0.0
                for j in range(n):
                    beta += A[i, j] * x[j]
                beta -= b[i]
                coef = beta / row_norm_sq[i]
                for j in range(n):
                    x[j] -= coef * A[i, j]
                _matvec_rowmajor(&A[0, 0], <int>m, <int>n, &A[i, 0], &y[0])
                for j in range(m):
                    r[j] -= coef * y[j]
                k += 1
                if k % refresh == 0:
                    _matvec_rowmajor(&A[0, 0], <int>m, <int>n, &x[0], &y[0])
                    drift = 0.0
                    for j in range(m):
                        d = y[j] - b[j]
                        drift += (d - r[j]) * (d - r[j])
                        r[j] = d
                    drift = sqrt(drift)
                    if drift > max_drift:
                        max_drift = drift
        if i < 0:
            reason = REASON_STATIONARY
            break
        out_idx[k - 1] = i
    return k, reason, max_drift


def run_csr(const Py_ssize_t[::1] indptr, const Py_ssize_t[::1] indices, const double[::1] data,
            const Py_ssize_t[::1] csc_ptr, const Py_ssize_t[::1] csc_idx, const double[::1] csc_data,
            const double[::1] b, double[::1] x, double[::1] r,
            const double[::1] row_norm_sq, double frob_sq, const double[::1] cdf,
            int mode, double theta, const double[::1] uniforms, Py_ssize_t max_iter,
            double tol, const double[::1] xhat, bint use_error, double b_norm,
            Py_ssize_t refresh, Py_ssize_t[::1] out_idx, double[::1] out_err,
            double[::1] out_res, double[::1] out_time, double[:, ::1] x_hist,
            bint record_hist, timer):
    cdef Py_ssize_t m = b.shape[0]
    cdef Py_ssize_t k = 0, i, j, p, q, c
    cdef int reason = REASON_MAXITER
    cdef double rr, res, err, beta, coef, drift, max_drift = 0.0, d, s, v
    cdef double xhat_norm = sqrt(_sumsq(&xhat[0], xhat.shape[0])) if use_error else 1.0
    cdef bint stop
    cdef Py_ssize_t[::1] cand
    cdef double[::1] cum
    import numpy as np
    cand = np.empty(m, dtype=np.intp)
    cum = np.empty(m)
    t0 = timer()
    while True:
        rr = _sumsq(&r[0], m)
        res = sqrt(rr)
        if use_error:
            err = _rel_error(&x[0], &xhat[0], x.shape[0], xhat_norm)
            out_err[k] = err
            stop = err <= tol
        else:
            out_err[k] = NAN
            stop = (res / b_norm if b_norm > 0.0 else res) <= tol
        out_res[k] = res
        out_idx[k] = -1
        if record_hist:
            for j in range(x.shape[0]):
                x_hist[k, j] = x[j]
        out_time[k] = timer() - t0
        if stop:
            reason = REASON_TOL
            break
        if k == max_iter:
            reason = REASON_MAXITER
            break
        with nogil:
            i = _select(mode, m, &r[0], rr, &row_norm_sq[0], frob_sq, &cdf[0], theta,
                        uniforms[k], &cand[0], &cum[0])
            if i >= 0:
                beta = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    beta += data[p] * x[indices[p]]
                beta -= b[i]
                coef = beta / row_norm_sq[i]
                for p in range(indptr[i], indptr[i + 1]):
                    x[indices[p]] -= coef * data[p]
                # A a_i accumulated column by column over the row's support
                for p in range(indptr[i], indptr[i + 1]):
                    c = indices[p]
                    v = coef * data[p]
                    for q in range(csc_ptr[c], csc_ptr[c + 1]):
                        r[csc_idx[q]] -= v * csc_data[q]
                k += 1
                if k % refresh == 0:
                    drift = 0.0
                    for j in range(m):
                        s = 0.0
                        for p in range(indptr[j], indptr[j + 1]):
                            s += data[p] * x[indices[p]]
                        d = s - b[j]
                        drift += (d - r[j]) * (d - r[j])
                        r[j] = d
                    drift = sqrt(drift)
                    if drift > max_drift:
                        max_drift = drift
        if i < 0:
            reason = REASON_STATIONARY
            break
        out_idx[k - 1] = i
    return k, reason, max_drift
