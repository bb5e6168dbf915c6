"""Stateless differentiable ops used by the layers."""

from __future__ import annotations

import math

import numpy as np

from ..tensor import ShapeError, Tensor

EPS = 1e-7


def _pad_amounts(size: int, k: int, stride: int, padding: str) -> tuple[int, int]:
    if padding == "valid":
        return 0, 0
    if padding == "same":
        out = math.ceil(size / stride)
        total = max((out - 1) * stride + k - size, 0)
        return total // 2, total - total // 2
    raise ValueError(f"padding must be 'valid' or 'same', got {padding!r}")


def conv_output_size(size: int, k: int, stride: int = 1, padding: str = "valid") -> int:
    lo, hi = _pad_amounts(size, k, stride, padding)
    return (size + lo + hi - k) // stride + 1


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: str = "valid") -> Tensor:
    """2-D cross-correlation.

    ``x`` is ``C×H×W`` or ``N×C×H×W``; ``weight`` is ``F×C×kh×kw``. The output
    keeps the batch rank of the input.
    """
    single = x.ndim == 3
    if single:
        x = x.reshape((1,) + x.shape)
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d: expected N×C×H×W input and F×C×kh×kw kernel, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    f, kc, kh, kw = weight.shape
    if kc != c:
        raise ShapeError(f"conv2d: input has {c} channels, kernel expects {kc} ({x.shape} vs {weight.shape})")
    if bias is not None and bias.shape != (f,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} does not match {f} filters")
    top, bottom = _pad_amounts(h, kh, stride, padding)
    left, right = _pad_amounts(w, kw, stride, padding)
    hp, wp = h + top + bottom, w + left + right
    if kh > hp or kw > wp:
        raise ShapeError(f"conv2d: kernel {kh}×{kw} larger than padded input {hp}×{wp}")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1

    xd, wd = x.data, weight.data
    if top or bottom or left or right:
        xp = np.zeros((n, c, hp, wp), dtype=xd.dtype)
        xp[:, :, top:top + h, left:left + w] = xd
    else:
        xp = xd

    # im2col in channels-last order: columns are (i, j, c) kernel taps
    xh = np.ascontiguousarray(xp.transpose(0, 2, 3, 1))
    span_h, span_w = stride * (ho - 1) + 1, stride * (wo - 1) + 1
    taps = [xh[:, i:i + span_h:stride, j:j + span_w:stride, :] for i in range(kh) for j in range(kw)]
    cols = np.concatenate(taps, axis=-1).reshape(n * ho * wo, kh * kw * c)
    wmat = np.ascontiguousarray(wd.transpose(0, 2, 3, 1)).reshape(f, kh * kw * c)
    out = cols @ wmat.T
    if bias is not None:
        out += bias.data
    out = np.ascontiguousarray(out.reshape(n, ho, wo, f).transpose(0, 3, 1, 2))

    def backward(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
        gw = None
        if weight.requires_grad:
            gw = np.ascontiguousarray((gmat.T @ cols).reshape(f, kh, kw, c).transpose(0, 3, 1, 2))
        gx = None
        if x.requires_grad:
            gcols = (gmat @ wmat).reshape(n, ho, wo, kh, kw, c)
            gxh = np.zeros((n, hp, wp, c), dtype=xd.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxh[:, i:i + span_h:stride, j:j + span_w:stride, :] += gcols[:, :, :, i, j, :]
            gx = np.ascontiguousarray(gxh[:, top:top + h, left:left + w, :].transpose(0, 3, 1, 2))
        gb = gmat.sum(axis=0) if bias is not None else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    res = Tensor._result(out, parents, backward, "conv2d")
    return res.reshape(res.shape[1:]) if single else res


def maxpool2d(x: Tensor, window: int = 2, stride: int = 2) -> Tensor:
    """Max pooling with floor truncation; ties route gradient to the first max."""
    single = x.ndim == 3
    if single:
        x = x.reshape((1,) + x.shape)
    n, c, h, w = x.shape
    if window > h or window > w:
        raise ShapeError(f"maxpool2d: window {window} larger than input {h}×{w}")
    ho = (h - window) // stride + 1
    wo = (w - window) // stride + 1
    xd = x.data
    views = np.lib.stride_tricks.sliding_window_view(xd, (window, window), axis=(2, 3))
    views = views[:, :, ::stride, ::stride][:, :, :ho, :wo].reshape(n, c, ho, wo, window * window)
    arg = views.argmax(axis=-1)
    out = np.take_along_axis(views, arg[..., None], axis=-1)[..., 0]

    rows = np.arange(ho)[:, None] * stride + arg // window
    cols = np.arange(wo)[None, :] * stride + arg % window
    nn_, cc = np.meshgrid(np.arange(n), np.arange(c), indexing="ij")
    idx = (nn_[:, :, None, None], cc[:, :, None, None], rows, cols)

    def backward(g):
        gx = np.zeros_like(xd)
        if window <= stride:
            gx[idx] = g
        else:
            np.add.at(gx, idx, g)
        return (gx,)

    res = Tensor._result(np.ascontiguousarray(out), (x,), backward, "maxpool2d")
    return res.reshape(res.shape[1:]) if single else res


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` for ``x`` of shape ``B×in`` and ``weight`` ``in×out``."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError(f"linear: shape mismatch {x.shape} vs {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd
    if bias is not None:
        if bias.shape != (wd.shape[1],):
            raise ShapeError(f"linear: bias shape {bias.shape} does not match {wd.shape[1]} outputs")
        out = out + bias.data

    def backward(g):
        return g @ wd.T, xd.T @ g, g.sum(axis=0)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._result(out, parents, backward, "linear")


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None = None, training: bool = True, mask=None) -> Tensor:
    """Inverted dropout. In eval mode (or rate 0) the input is returned as is.

    ``mask`` (0/1 array) overrides sampling, which makes the op a fixed linear
    map for gradient checks.
    """
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0:
        return x
    if mask is None:
        if rng is None:
            raise ValueError("dropout in training mode needs an rng")
        mask = rng.random(x.shape) >= rate
    scale = (np.asarray(mask, dtype=x.dtype) / x.dtype.type(1 - rate))
    return Tensor._result(x.data * scale, (x,), lambda g: (g * scale,), "dropout")


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax over the last axis of a 2-D tensor."""
    if x.ndim != 2:
        raise ShapeError(f"softmax: expected 2-D input, got {x.shape}")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return Tensor._result(p, (x,), backward, "softmax")


def bce(pred: Tensor, target) -> Tensor:
    """Mean binary cross-entropy with ``pred`` clamped to ``[EPS, 1-EPS]``."""
    y = np.asarray(target, dtype=pred.dtype).reshape(pred.shape)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("bce: targets must be 0 or 1")
    p = pred.data
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("bce: predictions must lie in [0, 1]")
    lo, hi = p.dtype.type(EPS), p.dtype.type(1 - EPS)
    pc = np.clip(p, lo, hi)
    n = p.size
    loss = -(y * np.log(pc) + (1 - y) * np.log(1 - pc)).mean()
    inside = (p >= lo) & (p <= hi)

    def backward(g):
        return (g * inside * (-(y / pc) + (1 - y) / (1 - pc)) / n,)

    return Tensor._result(np.array(loss, dtype=p.dtype), (pred,), backward, "bce")


def cce(pred: Tensor, target) -> Tensor:
    """Mean categorical cross-entropy of ``B×K`` probabilities against class indices."""
    if pred.ndim != 2:
        raise ShapeError(f"cce: expected B×K probabilities, got {pred.shape}")
    b, k = pred.shape
    idx = np.asarray(target).reshape(-1)
    if idx.shape != (b,) or not np.issubdtype(idx.dtype, np.integer) or np.any(idx < 0) or np.any(idx >= k):
        raise ValueError(f"cce: targets must be {b} class indices in [0, {k})")
    p = pred.data
    rows = np.arange(b)
    lo, hi = p.dtype.type(EPS), p.dtype.type(1 - EPS)
    picked = p[rows, idx]
    pc = np.clip(picked, lo, hi)
    loss = -np.log(pc).mean()
    inside = (picked >= lo) & (picked <= hi)

    def backward(g):
        gp = np.zeros_like(p)
        gp[rows, idx] = g * inside * (-1.0 / pc) / b
        return (gp,)

    return Tensor._result(np.array(loss, dtype=p.dtype), (pred,), backward, "cce")
