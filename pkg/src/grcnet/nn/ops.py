"""Dense NHWC kernels with hand-written gradients.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
consumes the cache. Arrays are (batch, height, width, channels), row-major.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch


def col_sum(a: np.ndarray) -> np.ndarray:
    """Sum over all leading axes; a BLAS product beats ``sum(axis=0)`` on tall arrays."""
    a2 = np.ascontiguousarray(a).reshape(-1, a.shape[-1])
    return np.ones(a2.shape[0], dtype=a2.dtype) @ a2


def out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _check4(x: np.ndarray, what: str) -> None:
    if x.ndim != 4:
        raise ShapeMismatch(f"{what}: expected (B, H, W, C) input, got shape {x.shape}")


def pad_hw(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))


# conv ----------------------------------------------------------------------------


def conv2d_forward(x, kernel, bias, stride=1, padding=0):
    """Cross-correlation. kernel is (kh, kw, C_in, C_out)."""
    _check4(x, "conv2d")
    kh, kw, cin, cout = kernel.shape
    b, h, w, c = x.shape
    if c != cin:
        raise ShapeMismatch(f"conv2d: input has {c} channels, kernel expects {cin}")
    ho, wo = out_size(h, kh, stride, padding), out_size(w, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeMismatch(f"conv2d: non-positive output size {ho}x{wo}")
    if kh == 1 and kw == 1 and padding == 0:
        xs = x[:, ::stride, ::stride, :] if stride > 1 else x
        xs = np.ascontiguousarray(xs)
        y = (xs.reshape(-1, c) @ kernel[0, 0]).reshape(b, ho, wo, cout)
        y += bias
        return y, (xs, kernel, stride, padding, x.shape)
    xp = np.ascontiguousarray(pad_hw(x, padding))
    hp, wp = xp.shape[1:3]
    flat = xp.reshape(-1, c)
    y = np.zeros((b, ho, wo, cout), dtype=np.result_type(x, kernel))
    # Each tap is one matmul over the padded grid, then a shifted accumulate.
    for i in range(kh):
        for j in range(kw):
            z = (flat @ kernel[i, j]).reshape(b, hp, wp, cout)
            y += z[:, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]
    y += bias
    return y, (xp, kernel, stride, padding, x.shape)


def conv2d_backward(dy, cache):
    xs, kernel, stride, padding, xshape = cache
    kh, kw, cin, cout = kernel.shape
    b, ho, wo, _ = dy.shape
    d2 = np.ascontiguousarray(dy).reshape(-1, cout)
    dbias = col_sum(d2)
    if kh == 1 and kw == 1 and padding == 0:
        dkernel = (xs.reshape(-1, cin).T @ d2).reshape(kernel.shape)
        dxs = (d2 @ kernel[0, 0].T).reshape(xs.shape)
        if stride == 1:
            return dxs, dkernel, dbias
        dx = np.zeros(xshape, dtype=dxs.dtype)
        dx[:, ::stride, ::stride, :] = dxs
        return dx, dkernel, dbias
    xp = xs
    dxp = np.zeros_like(xp)
    dkernel = np.empty_like(kernel)
    hs = stride * (ho - 1) + 1
    ws = stride * (wo - 1) + 1
    for i in range(kh):
        for j in range(kw):
            dxp[:, i : i + hs : stride, j : j + ws : stride] += (d2 @ kernel[i, j].T).reshape(
                b, ho, wo, cin
            )
            patch = np.ascontiguousarray(xp[:, i : i + hs : stride, j : j + ws : stride])
            dkernel[i, j] = patch.reshape(-1, cin).T @ d2
    h, w = xshape[1:3]
    dx = dxp[:, padding : padding + h, padding : padding + w, :]
    return np.ascontiguousarray(dx), dkernel, dbias


# pointwise / pooling -------------------------------------------------------------


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dy, mask):
    return dy * mask


def avg_pool3_forward(x):
    """3x3 average pool, stride 1, zero padding 1, fixed divisor 9."""
    _check4(x, "avg_pool")
    b, h, w, c = x.shape
    xp = pad_hw(x, 1)
    y = np.zeros_like(x)
    for i in range(3):
        for j in range(3):
            y += xp[:, i : i + h, j : j + w]
    y /= 9.0
    return y, x.shape


def avg_pool3_backward(dy, shape):
    b, h, w, c = shape
    dxp = np.zeros((b, h + 2, w + 2, c), dtype=dy.dtype)
    g = dy / 9.0
    for i in range(3):
        for j in range(3):
            dxp[:, i : i + h, j : j + w] += g
    return dxp[:, 1 : 1 + h, 1 : 1 + w]


def global_avg_pool_forward(x):
    _check4(x, "global_avg_pool")
    return x.mean(axis=(1, 2)), x.shape


def global_avg_pool_backward(dy, shape):
    b, h, w, c = shape
    return np.broadcast_to((dy / (h * w))[:, None, None, :], shape).copy()


def dense_forward(x, weight, bias):
    if x.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeMismatch(f"dense: input {x.shape} incompatible with weight {weight.shape}")
    return x @ weight + bias, x


def dense_backward(dy, x, weight):
    return dy @ weight.T, x.T @ dy, col_sum(dy)


# attention -----------------------------------------------------------------------


def softmax(logits, axis=-1):
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(dp, p, axis=-1):
    return p * (dp - (p * dp).sum(axis=axis, keepdims=True))


def local_aggregate_forward(weights, values, k):
    """Per-position weighted sum of a k x k neighborhood of ``values``.

    weights: (B, H, W, k*k, heads), softmax-normalized over axis 3.
    values:  (B, H, W, C) with C divisible by heads; channel c uses head c // (C // heads).
    Values outside the image are zero.
    """
    b, h, w, c = values.shape
    heads = weights.shape[-1]
    if weights.shape != (b, h, w, k * k, heads) or c % heads:
        raise ShapeMismatch(
            f"local aggregation: weights {weights.shape} vs values {values.shape}, k={k}"
        )
    g = c // heads
    r = k // 2
    vp = pad_hw(values, r)
    out = np.zeros_like(values)
    grouped = out.reshape(b, h, w, heads, g)
    for o in range(k * k):
        i, j = divmod(o, k)
        vs = vp[:, i : i + h, j : j + w].reshape(b, h, w, heads, g)
        grouped += weights[:, :, :, o, :, None] * vs
    return out, (weights, vp, k)


def local_aggregate_backward(dout, cache):
    weights, vp, k = cache
    b, h, w, kk, heads = weights.shape
    c = vp.shape[-1]
    g = c // heads
    r = k // 2
    dg = dout.reshape(b, h, w, heads, g)
    dweights = np.empty_like(weights)
    dvp = np.zeros_like(vp)
    ones_g = np.ones(g, dtype=dout.dtype)
    for o in range(kk):
        i, j = divmod(o, k)
        vs = vp[:, i : i + h, j : j + w].reshape(b, h, w, heads, g)
        dweights[:, :, :, o, :] = (dg * vs) @ ones_g
        dvp[:, i : i + h, j : j + w] += (weights[:, :, :, o, :, None] * dg).reshape(b, h, w, c)
    dvalues = dvp[:, r : r + h, r : r + w] if r else dvp
    return dweights, np.ascontiguousarray(dvalues)
