"""NumPy implementations of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def _row_plan(shift, U):
    # valid output columns u satisfy 0 <= u + shift <= U - 1
    lo = max(0, int(np.ceil(-shift)))
    hi = min(U - 1, int(np.floor(U - 1 - shift)))
    i0 = int(np.floor(shift))
    f = shift - i0
    return lo, hi, i0, f


def shear_rows(x, shifts):
    x = np.ascontiguousarray(x, dtype=np.float64)
    B, S, U = x.shape
    out = np.zeros_like(x)
    for s in range(S):
        lo, hi, i0, f = _row_plan(float(shifts[s]), U)
        if hi < lo:
            continue
        src = np.arange(lo, hi + 1) + i0
        nxt = np.minimum(src + 1, U - 1)
        out[:, s, lo:hi + 1] = (1.0 - f) * x[:, s, src] + f * x[:, s, nxt]
    return out


def shear_rows_adjoint(g, shifts):
    g = np.ascontiguousarray(g, dtype=np.float64)
    B, S, U = g.shape
    out = np.zeros_like(g)
    for s in range(S):
        lo, hi, i0, f = _row_plan(float(shifts[s]), U)
        if hi < lo:
            continue
        src = np.arange(lo, hi + 1) + i0
        gs = g[:, s, lo:hi + 1]
        out[:, s, src] += (1.0 - f) * gs
        if f != 0.0:
            # mirror the forward clamp; rounding can put src at U - 1 with f > 0
            nxt = np.minimum(src + 1, U - 1)
            np.add.at(out, (slice(None), s, nxt), f * gs)
    return out


def gather_rows(x, idx, w):
    x = np.ascontiguousarray(x, dtype=np.float64)
    return np.einsum("bot,ot->bo", x[:, idx], w)


def col2im(cols, Hp, Wp, sh, sw):
    N, Ho, Wo, C, kh, kw = cols.shape
    out = np.zeros((N, C, Hp, Wp), dtype=cols.dtype)
    t = cols.transpose(0, 3, 4, 5, 1, 2)
    for a in range(kh):
        for b in range(kw):
            out[:, :, a:a + (Ho - 1) * sh + 1:sh, b:b + (Wo - 1) * sw + 1:sw] += t[:, :, a, b]
    return out
