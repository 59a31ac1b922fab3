# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the numeric hot paths.

Same contract as _py (the NumPy reference): float64 in, float64 out, no
input mutation. Results agree with _py to floating-point roundoff; tests
pin the two backends together.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp

cnp.import_array()

BACKEND = "ext"


# ---------------------------------------------------------------------------
# small dense matrix helpers (C-contiguous float64 views)


cdef void _mm_nn(double[:, ::1] o, const double[:, ::1] a, const double[:, ::1] b) noexcept nogil:
    # o = a @ b
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            o[i, j] = acc


cdef void _mm_nt(double[:, ::1] o, const double[:, ::1] a, const double[:, ::1] b) noexcept nogil:
    # o = a @ b.T
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[j, k]
            o[i, j] = acc


cdef void _mm_tn(double[:, ::1] o, const double[:, ::1] a, const double[:, ::1] b) noexcept nogil:
    # o = a.T @ b
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(a.shape[1]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[0]):
                acc += a[k, i] * b[k, j]
            o[i, j] = acc


cdef void _add_mm_tn(double[:, ::1] o, const double[:, ::1] a, const double[:, ::1] b) noexcept nogil:
    # o += a.T @ b
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(a.shape[1]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[0]):
                acc += a[k, i] * b[k, j]
            o[i, j] += acc


cdef void _softmax_rows_inplace(double[:, ::1] m) noexcept nogil:
    cdef Py_ssize_t j, i
    cdef double mx, s
    for j in range(m.shape[0]):
        mx = m[j, 0]
        for i in range(1, m.shape[1]):
            if m[j, i] > mx:
                mx = m[j, i]
        s = 0.0
        for i in range(m.shape[1]):
            m[j, i] = exp(m[j, i] - mx)
            s += m[j, i]
        for i in range(m.shape[1]):
            m[j, i] /= s


cdef tuple _kqvw(object a, object wk, object wq, object wv):
    cdef cnp.ndarray[double, ndim=2] a2 = np.ascontiguousarray(a, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] wk2 = np.ascontiguousarray(wk, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] wq2 = np.ascontiguousarray(wq, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] wv2 = np.ascontiguousarray(wv, dtype=np.float64)
    cdef Py_ssize_t c = a2.shape[0], n = a2.shape[1]
    cdef cnp.ndarray[double, ndim=2] k = np.empty((c, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] q = np.empty((c, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] v = np.empty((c, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] w = np.empty((n, n), dtype=np.float64)
    _mm_nn(k, wk2, a2)
    _mm_nn(q, wq2, a2)
    _mm_nn(v, wv2, a2)
    _mm_tn(w, k, q)          # logits: L[j, i] = q_i . k_j
    _softmax_rows_inplace(w)
    return a2, k, q, v, w


def attention_forward(a, wk, wq, wv, double alpha):
    """Self-attention over the columns of a (c, n) feature matrix."""
    a2, k, q, v, w = _kqvw(a, wk, wq, wv)
    cdef Py_ssize_t c = a2.shape[0], n = a2.shape[1]
    cdef cnp.ndarray[double, ndim=2] m = np.empty((c, n), dtype=np.float64)
    _mm_nt(m, v, w)          # m[:, j] = sum_i w[j, i] v[:, i]
    cdef cnp.ndarray[double, ndim=2] b = np.empty((c, n), dtype=np.float64)
    cdef double[:, ::1] bv = b
    cdef const double[:, ::1] mv = m, av = a2
    cdef Py_ssize_t i, j
    for i in range(c):
        for j in range(n):
            bv[i, j] = alpha * mv[i, j] + av[i, j]
    return b, w


def attention_backward(a, wk, wq, wv, double alpha, upstream):
    """Gradients of attention_forward wrt a, the three maps and alpha."""
    a2, k, q, v, w = _kqvw(a, wk, wq, wv)
    cdef cnp.ndarray[double, ndim=2] u = np.ascontiguousarray(upstream, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] wk2 = np.ascontiguousarray(wk, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] wq2 = np.ascontiguousarray(wq, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] wv2 = np.ascontiguousarray(wv, dtype=np.float64)
    cdef Py_ssize_t c = a2.shape[0], n = a2.shape[1]
    cdef Py_ssize_t i, j

    cdef cnp.ndarray[double, ndim=2] m = np.empty((c, n), dtype=np.float64)
    _mm_nt(m, v, w)
    cdef double dalpha = 0.0
    cdef const double[:, ::1] uv = u, mv = m
    for i in range(c):
        for j in range(n):
            dalpha += uv[i, j] * mv[i, j]

    cdef cnp.ndarray[double, ndim=2] dv = np.empty((c, n), dtype=np.float64)
    _mm_nn(dv, u, w)
    cdef double[:, ::1] dvv = dv
    for i in range(c):
        for j in range(n):
            dvv[i, j] *= alpha

    cdef cnp.ndarray[double, ndim=2] dw = np.empty((n, n), dtype=np.float64)
    _mm_tn(dw, u, v)
    cdef double[:, ::1] dwv_ = dw
    cdef const double[:, ::1] wv_ = w
    cdef double dot
    # softmax backward per row, then scale by alpha folded into dw
    for j in range(n):
        for i in range(n):
            dwv_[j, i] *= alpha
    for j in range(n):
        dot = 0.0
        for i in range(n):
            dot += dwv_[j, i] * wv_[j, i]
        for i in range(n):
            dwv_[j, i] = wv_[j, i] * (dwv_[j, i] - dot)  # now holds dL

    cdef cnp.ndarray[double, ndim=2] dk = np.empty((c, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] dq = np.empty((c, n), dtype=np.float64)
    _mm_nt(dk, q, dw)
    _mm_nn(dq, k, dw)

    cdef cnp.ndarray[double, ndim=2] dwk = np.empty((c, c), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] dwq = np.empty((c, c), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] dwv = np.empty((c, c), dtype=np.float64)
    _mm_nt(dwk, dk, a2)
    _mm_nt(dwq, dq, a2)
    _mm_nt(dwv, dv, a2)

    cdef cnp.ndarray[double, ndim=2] da = u.copy()
    _add_mm_tn(da, wk2, dk)
    _add_mm_tn(da, wq2, dq)
    _add_mm_tn(da, wv2, dv)
    return da, dwk, dwq, dwv, dalpha


# ---------------------------------------------------------------------------
# exact squared Euclidean distance transform


def squared_edt(fg):
    """Exact squared distance to the nearest true pixel; +inf when empty."""
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] f8 = np.ascontiguousarray(fg, dtype=np.uint8)
    cdef Py_ssize_t h = f8.shape[0], w = f8.shape[1]
    cdef cnp.ndarray[double, ndim=2] d = np.empty((h, w), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] out = np.empty((h, w), dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] vbuf = np.empty(w, dtype=np.intp)
    cdef cnp.ndarray[double, ndim=1] zbuf = np.empty(w + 1, dtype=np.float64)
    cdef double[:, ::1] dv = d, ov = out
    cdef const cnp.uint8_t[:, ::1] fv = f8
    cdef cnp.intp_t[::1] vv = vbuf
    cdef double[::1] zv = zbuf
    cdef Py_ssize_t r, c, q, kk
    cdef double s, fq, fvk
    cdef bint any_site

    with nogil:
        # vertical pass: row distance to nearest true pixel in the column
        for c in range(w):
            dv[0, c] = 0.0 if fv[0, c] else INFINITY
        for r in range(1, h):
            for c in range(w):
                dv[r, c] = 0.0 if fv[r, c] else INFINITY
                if dv[r - 1, c] + 1.0 < dv[r, c]:
                    dv[r, c] = dv[r - 1, c] + 1.0
        for r in range(h - 2, -1, -1):
            for c in range(w):
                if dv[r + 1, c] + 1.0 < dv[r, c]:
                    dv[r, c] = dv[r + 1, c] + 1.0
        for r in range(h):
            for c in range(w):
                dv[r, c] = dv[r, c] * dv[r, c]

        # horizontal pass: lower envelope of parabolas per row
        for r in range(h):
            any_site = False
            kk = 0
            for q in range(w):
                fq = dv[r, q]
                if fq == INFINITY:
                    continue
                if not any_site:
                    any_site = True
                    vv[0] = q
                    zv[0] = -INFINITY
                    zv[1] = INFINITY
                    continue
                fvk = dv[r, vv[kk]]
                s = (fq + q * q - (fvk + vv[kk] * vv[kk])) / (2.0 * (q - vv[kk]))
                while s <= zv[kk]:
                    kk -= 1
                    fvk = dv[r, vv[kk]]
                    s = (fq + q * q - (fvk + vv[kk] * vv[kk])) / (
                        2.0 * (q - vv[kk])
                    )
                kk += 1
                vv[kk] = q
                zv[kk] = s
                zv[kk + 1] = INFINITY
            if not any_site:
                for q in range(w):
                    ov[r, q] = INFINITY
                continue
            kk = 0
            for q in range(w):
                while zv[kk + 1] < q:
                    kk += 1
                s = q - vv[kk]
                ov[r, q] = s * s + dv[r, vv[kk]]
    return out


# ---------------------------------------------------------------------------
# masked Gaussian smoothing


cdef void _conv_rows(double[:, ::1] o, const double[:, ::1] x, const double[::1] k1) noexcept nogil:
    # zero-padded 1-d correlation along axis 0
    cdef Py_ssize_t h = x.shape[0], w = x.shape[1]
    cdef Py_ssize_t rad = (k1.shape[0] - 1) // 2
    cdef Py_ssize_t r, c, t, src
    cdef double acc
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for t in range(k1.shape[0]):
                src = r + t - rad
                if 0 <= src < h:
                    acc += k1[t] * x[src, c]
            o[r, c] = acc


cdef void _conv_cols(double[:, ::1] o, const double[:, ::1] x, const double[::1] k1) noexcept nogil:
    # zero-padded 1-d correlation along axis 1
    cdef Py_ssize_t h = x.shape[0], w = x.shape[1]
    cdef Py_ssize_t rad = (k1.shape[0] - 1) // 2
    cdef Py_ssize_t r, c, t, src
    cdef double acc
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for t in range(k1.shape[0]):
                src = c + t - rad
                if 0 <= src < w:
                    acc += k1[t] * x[r, src]
            o[r, c] = acc


def masked_gaussian_smooth(values, fg, double sigma, Py_ssize_t radius):
    """Gaussian-weighted mean of values over true-mask pixels (see _py)."""
    cdef cnp.ndarray[double, ndim=2] xv = np.ascontiguousarray(values, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] xf = np.ascontiguousarray(fg, dtype=np.float64)
    cdef Py_ssize_t h = xv.shape[0], w = xv.shape[1]
    cdef cnp.ndarray[double, ndim=1] k1 = np.empty(2 * radius + 1, dtype=np.float64)
    cdef double[::1] kv = k1
    cdef Py_ssize_t t
    cdef double s = 0.0, u
    for t in range(2 * radius + 1):
        u = (t - radius) / sigma
        kv[t] = exp(-0.5 * u * u)
        s += kv[t]
    for t in range(2 * radius + 1):
        kv[t] /= s

    cdef cnp.ndarray[double, ndim=2] vf = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] vfv = vf
    cdef const double[:, ::1] xvv = xv, xfv = xf
    cdef Py_ssize_t r, c
    for r in range(h):
        for c in range(w):
            vfv[r, c] = xvv[r, c] * xfv[r, c]

    cdef cnp.ndarray[double, ndim=2] tmp = np.empty((h, w), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] num = np.empty((h, w), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] den = np.empty((h, w), dtype=np.float64)
    _conv_rows(tmp, vf, k1)
    _conv_cols(num, tmp, k1)
    _conv_rows(tmp, xf, k1)
    _conv_cols(den, tmp, k1)

    cdef cnp.ndarray[double, ndim=2] outa = np.zeros((h, w), dtype=np.float64)
    cdef double[:, ::1] ov = outa
    cdef const double[:, ::1] nv = num, dv = den
    for r in range(h):
        for c in range(w):
            if dv[r, c] > 0.0:
                ov[r, c] = nv[r, c] / dv[r, c]
    return outa
