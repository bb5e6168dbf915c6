"""Randomized finite-difference cases, one builder per layer type.

Each builder takes a Generator and returns ``(fn, inputs)`` for
:func:`oracles.grad_check`. Builders must be called inside
``precision(np.float64)``.
"""

import numpy as np

from oracles import project
from vsentinel.nn import functional as F
from vsentinel.nn.recurrent import CellState, GRUCell, LSTMCell, gru_step, lstm_step
from vsentinel.tensor import Parameter, Tensor


def _param(rng, *shape, scale=1.0):
    return Parameter(rng.normal(0.0, scale, size=shape))


def conv_case(rng):
    n, c, f = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
    k = int(rng.choice([1, 2, 3]))
    stride = int(rng.integers(1, 3))
    padding = str(rng.choice(["valid", "same"]))
    h, w = rng.integers(k + 1, 7), rng.integers(k + 1, 7)
    x = _param(rng, n, c, h, w)
    wt = _param(rng, f, c, k, k)
    b = _param(rng, f)
    ho = F.conv_output_size(int(h), k, stride, padding)
    wo = F.conv_output_size(int(w), k, stride, padding)
    r = rng.normal(size=(n, f, ho, wo))
    return (lambda ts: project(F.conv2d(ts[0], ts[1], ts[2], stride, padding), r)), [x, wt, b]


def maxpool_case(rng):
    n, c = rng.integers(1, 3), rng.integers(1, 4)
    window = int(rng.integers(2, 4))
    stride = int(rng.integers(1, window + 1))
    h, w = rng.integers(window, 8), rng.integers(window, 8)
    # distinct values keep every window's argmax away from ties
    x = Parameter(rng.permutation(n * c * h * w).reshape(n, c, h, w) * 0.1 + rng.uniform(0, 0.01, (n, c, h, w)))
    ho, wo = (h - window) // stride + 1, (w - window) // stride + 1
    r = rng.normal(size=(n, c, ho, wo))
    return (lambda ts: project(F.maxpool2d(ts[0], window, stride), r)), [x]


def dense_case(rng):
    b, i, o = rng.integers(1, 5), rng.integers(1, 6), rng.integers(1, 6)
    act = rng.choice(["sigmoid", "tanh", "relu", "none"])
    x, w, bias = _param(rng, b, i), _param(rng, i, o), _param(rng, o)
    r = rng.normal(size=(b, o))

    def fn(ts):
        y = F.linear(ts[0], ts[1], ts[2])
        if act != "none":
            y = getattr(y, act)()
        return project(y, r)

    return fn, [x, w, bias]


def dropout_case(rng):
    shape = tuple(int(s) for s in rng.integers(1, 5, size=rng.integers(1, 3)))
    rate = float(rng.uniform(0.1, 0.8))
    mask = rng.random(shape) >= rate
    x = _param(rng, *shape)
    r = rng.normal(size=shape)
    return (lambda ts: project(F.dropout(ts[0], rate, training=True, mask=mask), r)), [x]


def gru_case(rng):
    d, h = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    cell = GRUCell(d, h, rng)
    cell.b.data[:] = rng.normal(size=cell.b.shape)
    batched = bool(rng.integers(0, 2))
    xshape = (int(rng.integers(1, 4)), d) if batched else (d,)
    x, h0 = _param(rng, *xshape), _param(rng, *xshape[:-1], h)
    r = rng.normal(size=xshape[:-1] + (h,))
    params = [x, h0, cell.w, cell.b, cell.u_zr, cell.u_h]
    return (lambda ts: project(gru_step(ts[0], CellState(ts[1]), cell).h, r)), params


def lstm_case(rng):
    d, h = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    cell = LSTMCell(d, h, rng)
    cell.b.data[:] = rng.normal(size=cell.b.shape)
    batched = bool(rng.integers(0, 2))
    xshape = (int(rng.integers(1, 4)), d) if batched else (d,)
    x = _param(rng, *xshape)
    h0, c0 = _param(rng, *xshape[:-1], h), _param(rng, *xshape[:-1], h)
    rh, rc = rng.normal(size=xshape[:-1] + (h,)), rng.normal(size=xshape[:-1] + (h,))

    def fn(ts):
        out = lstm_step(ts[0], CellState(ts[1], ts[2]), cell)
        return project(out.h, rh) + project(out.c, rc)

    return fn, [x, h0, c0, cell.w, cell.b, cell.u]


def bce_case(rng):
    n = int(rng.integers(1, 8))
    logits = _param(rng, n, 1)
    y = rng.integers(0, 2, size=(n, 1))
    return (lambda ts: F.bce(ts[0].sigmoid(), y)), [logits]


def cce_case(rng):
    b, k = int(rng.integers(1, 6)), int(rng.integers(2, 6))
    logits = _param(rng, b, k)
    idx = rng.integers(0, k, size=b)
    return (lambda ts: F.cce(F.softmax(ts[0]), idx)), [logits]


CASES = {
    "conv2d": conv_case,
    "maxpool": maxpool_case,
    "dense": dense_case,
    "dropout": dropout_case,
    "gru_step": gru_case,
    "lstm_step": lstm_case,
    "bce": bce_case,
    "cce": cce_case,
}
N_SHAPES = 20
