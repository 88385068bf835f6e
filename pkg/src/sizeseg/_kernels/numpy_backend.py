"""Pure-NumPy implementations of the hot kernels.

Same contracts as the compiled ``_core`` extension: 3x3 same-padding
convolution (forward + backward) in channels-last layout, and the
symmetric matvec over a half-stored edge list.  Convolutions go through
im2col + BLAS matmul; the matvec uses ``np.add.at`` (sequential, hence
deterministic).
"""

import numpy as np

NAME = "python"


def _patches3x3(x):
    # (H, W, C) -> (H*W, 9*C) view-copy of zero-padded 3x3 neighborhoods
    h, w, c = x.shape
    xp = np.zeros((h + 2, w + 2, c), dtype=x.dtype)
    xp[1:-1, 1:-1] = x
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(0, 1))
    # win: (H, W, C, 3, 3) -> (H*W, 3, 3, C) -> (H*W, 9C)
    return np.ascontiguousarray(win.transpose(0, 1, 3, 4, 2)).reshape(h * w, 9 * c)


def conv3x3_forward(x, w, b):
    """x: (H,W,Cin), w: (Cout,Cin,3,3), b: (Cout,) -> (H,W,Cout)."""
    h, ww, cin = x.shape
    cout = w.shape[0]
    cols = _patches3x3(x)                                # (HW, 9Cin)
    wmat = w.transpose(2, 3, 1, 0).reshape(9 * cin, cout)  # (9Cin, Cout)
    out = cols @ wmat + b
    return out.reshape(h, ww, cout)


def conv3x3_backward(x, w, gout):
    """Gradients of conv3x3_forward: returns (gx, gw, gb)."""
    h, ww, cin = x.shape
    cout = w.shape[0]
    g = gout.reshape(h * ww, cout)

    gb = g.sum(axis=0)

    cols = _patches3x3(x)                                # (HW, 9Cin)
    gwmat = cols.T @ g                                   # (9Cin, Cout)
    gw = gwmat.reshape(3, 3, cin, cout).transpose(3, 2, 0, 1)

    # gx = "full" correlation of gout with the spatially flipped kernel
    gcols = _patches3x3(gout)                            # (HW, 9Cout)
    wback = w[:, :, ::-1, ::-1].transpose(2, 3, 0, 1).reshape(9 * cout, cin)
    gx = (gcols @ wback).reshape(h, ww, cin)
    return np.ascontiguousarray(gx), np.ascontiguousarray(gw), gb


def edge_matvec(p, q, weights, x, out):
    """out += W @ x for a symmetric W stored once per unordered pair.

    p, q: (E,) int32 pixel indices; weights: (E,); x, out: (N, K).
    """
    np.add.at(out, p, weights[:, None] * x[q])
    np.add.at(out, q, weights[:, None] * x[p])
    return out
