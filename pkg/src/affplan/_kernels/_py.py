"""NumPy implementations of the numeric hot paths.

Mirrors the compiled extension (_ext) exactly; the package falls back to
this module when the extension is not built. All functions take and return
float64 arrays and never mutate their inputs.
"""

from __future__ import annotations

import numpy as np

BACKEND = "py"


def _softmax_rows(m: np.ndarray) -> np.ndarray:
    z = m - m.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def attention_forward(a, wk, wq, wv, alpha):
    """Self-attention over the columns of a (c, n) feature matrix.

    k = wk a, q = wq a, v = wv a; logits L[j, i] = q_i . k_j; w = row
    softmax of L; output = alpha * v w^T + a. Returns (output, w).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    k = wk @ a
    q = wq @ a
    v = wv @ a
    w = _softmax_rows(k.T @ q)
    # Mix v with materialized products instead of a matmul: BLAS fuses
    # multiply-add, which makes the sum over regions sensitive to column
    # order and breaks the bitwise permutation symmetry of the output.
    mixed = (v[:, None, :] * w[None, :, :]).sum(axis=2)
    return alpha * mixed + a, w


def attention_backward(a, wk, wq, wv, alpha, upstream):
    """Gradients of attention_forward wrt a, the three maps and alpha.

    upstream is dLoss/dOutput with the output's (c, n) shape. Returns
    (da, dwk, dwq, dwv, dalpha).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    u = np.ascontiguousarray(upstream, dtype=np.float64)
    k = wk @ a
    q = wq @ a
    v = wv @ a
    w = _softmax_rows(k.T @ q)

    m = v @ w.T
    dalpha = float(np.sum(u * m))
    dv = alpha * (u @ w)
    dw = alpha * (u.T @ v)
    # softmax backward, row by row: dL = w * (dw - sum(dw * w))
    dot = np.sum(dw * w, axis=1, keepdims=True)
    dl = w * (dw - dot)
    dk = q @ dl.T
    dq = k @ dl
    dwk = dk @ a.T
    dwq = dq @ a.T
    dwv = dv @ a.T
    da = u + wk.T @ dk + wq.T @ dq + wv.T @ dv
    return da, dwk, dwq, dwv, dalpha


def squared_edt(fg: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest true pixel.

    Two-pass transform: per-column vertical scan, then the 1-d lower
    parabola envelope along each row. All-false input yields +inf.
    """
    fg = np.asarray(fg, dtype=bool)
    h, w = fg.shape
    inf = np.inf
    # vertical pass: distance in rows to the nearest true pixel in the column
    d = np.where(fg, 0.0, inf)
    for r in range(1, h):
        d[r] = np.minimum(d[r], d[r - 1] + 1.0)
    for r in range(h - 2, -1, -1):
        d[r] = np.minimum(d[r], d[r + 1] + 1.0)
    f = d * d  # parabola heights; inf stays inf

    out = np.empty((h, w), dtype=np.float64)
    v = np.empty(w, dtype=np.intp)  # site of each envelope parabola
    z = np.empty(w + 1, dtype=np.float64)  # envelope breakpoints
    for r in range(h):
        fr = f[r]
        sites = np.flatnonzero(np.isfinite(fr))
        if sites.size == 0:
            out[r] = inf
            continue
        kk = 0
        v[0] = sites[0]
        z[0] = -inf
        z[1] = inf
        for qi in sites[1:]:
            q = int(qi)
            s = (fr[q] + q * q - (fr[v[kk]] + v[kk] * v[kk])) / (2.0 * (q - v[kk]))
            while s <= z[kk]:
                kk -= 1
                s = (fr[q] + q * q - (fr[v[kk]] + v[kk] * v[kk])) / (
                    2.0 * (q - v[kk])
                )
            kk += 1
            v[kk] = q
            z[kk] = s
            z[kk + 1] = inf
        kk = 0
        row = out[r]
        for q in range(w):
            while z[kk + 1] < q:
                kk += 1
            dq = q - v[kk]
            row[q] = dq * dq + fr[v[kk]]
    return out


def _conv1(x: np.ndarray, k1: np.ndarray, axis: int) -> np.ndarray:
    """1-d correlation along axis with zero padding (k1 is symmetric)."""
    r = (len(k1) - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    xp = np.pad(x, pad)
    out = np.zeros_like(x)
    n = x.shape[axis]
    for t in range(len(k1)):
        if axis == 0:
            out += k1[t] * xp[t : t + n, :]
        else:
            out += k1[t] * xp[:, t : t + n]
    return out


def masked_gaussian_smooth(values, fg, sigma: float, radius: int):
    """Gaussian-weighted mean of values over true-mask pixels.

    Output at j is sum_{i in fg} K(j - i) values[i] / sum_{i in fg} K(j - i),
    with K a Gaussian of std sigma truncated to a (2 radius + 1)^2 window;
    0 where the window holds no fg pixel. Zero padding outside the image.
    """
    values = np.asarray(values, dtype=np.float64)
    fgf = np.asarray(fg, dtype=np.float64)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-0.5 * (t / sigma) ** 2)
    k1 /= k1.sum()
    num = _conv1(_conv1(values * fgf, k1, 0), k1, 1)
    den = _conv1(_conv1(fgf, k1, 0), k1, 1)
    out = np.zeros_like(values)
    nz = den > 0.0
    out[nz] = num[nz] / den[nz]
    return out
