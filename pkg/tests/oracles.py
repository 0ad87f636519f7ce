"""Independent brute-force references used to check the engine.

Everything here is written against the operation definitions directly
(explicit loops, no vectorization) and stays independent of the package's
engine internals.
"""

import numpy as np


def split_channels(total, groups):
    """Even-as-possible split, larger groups first (7 over 4 -> 2,2,2,1)."""
    base, rem = divmod(total, groups)
    return [base + 1] * rem + [base] * (groups - rem)


def conv2d_brute(x, weights, out_channels, kernel, stride, padding, groups, bias=False):
    """Quadruple-loop grouped cross-correlation with zero padding.

    `x` is (in_channels, h, w); `weights` is the flat per-group layout
    (out_g, in_g, kh, kw) blocks back to back, with the bias vector at the
    tail when `bias` is set.  Returns (out_channels, oh, ow) float64.
    """
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    cin, h, w = x.shape
    kh, kw = kernel
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((out_channels, oh, ow))

    in_splits = split_channels(cin, groups)
    out_splits = split_channels(out_channels, groups)

    w_off = 0
    ci0 = 0
    co0 = 0
    for g_in, g_out in zip(in_splits, out_splits):
        block = weights[w_off:w_off + g_out * g_in * kh * kw].reshape(g_out, g_in, kh, kw)
        for oc in range(g_out):
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ic in range(g_in):
                        for ky in range(kh):
                            for kx in range(kw):
                                iy = oy * stride + ky - padding
                                ix = ox * stride + kx - padding
                                if 0 <= iy < h and 0 <= ix < w:
                                    acc += x[ci0 + ic, iy, ix] * block[oc, ic, ky, kx]
                    out[co0 + oc, oy, ox] = acc
        w_off += block.size
        ci0 += g_in
        co0 += g_out

    if bias:
        b = weights[w_off:w_off + out_channels]
        out += b[:, None, None]
    return out
