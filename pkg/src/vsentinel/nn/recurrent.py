"""GRU and LSTM cells operating on batches of feature vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tensor import Parameter, ShapeError, Tensor, get_default_dtype
from . import functional as F
from .layers import Module, glorot_uniform


@dataclass
class CellState:
    h: Tensor
    c: Tensor | None = None

    @classmethod
    def zeros(cls, batch: int, hidden: int, with_cell: bool = False) -> "CellState":
        z = lambda: Tensor(np.zeros((batch, hidden), dtype=get_default_dtype()))
        return cls(z(), z() if with_cell else None)


class _Recurrent(Module):
    n_gates = 1
    has_cell = False

    def __init__(self, input_size: int, hidden_size: int, rng=None, name: str = "cell"):
        rng = rng if rng is not None else np.random.default_rng(0)
        g = self.n_gates * hidden_size
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.w = Parameter(glorot_uniform(rng, (input_size, g), input_size, g), name=f"{name}.w")
        self.b = Parameter(np.zeros(g), name=f"{name}.b")

    def initial_state(self, batch: int) -> CellState:
        return CellState.zeros(batch, self.hidden_size, self.has_cell)

    def project(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.input_size:
            raise ShapeError(f"{type(self).__name__}: expected B×{self.input_size} input, got {x.shape}")
        return F.linear(x, self.w, self.b)

    def _check_state(self, state: CellState, batch: int):
        if state.h.shape != (batch, self.hidden_size):
            raise ShapeError(f"{type(self).__name__}: state shape {state.h.shape} vs expected {(batch, self.hidden_size)}")

    def step(self, x: Tensor, state: CellState) -> CellState:
        self._check_state(state, x.shape[0])
        return self._advance(self.project(x), state)

    def forward(self, xs: Tensor, state: CellState | None = None) -> CellState:
        """Run over a ``B×L×D`` sequence and return the final state."""
        if xs.ndim != 3 or xs.shape[2] != self.input_size:
            raise ShapeError(f"{type(self).__name__}: expected B×L×{self.input_size} sequence, got {xs.shape}")
        b, length, d = xs.shape
        state = state or self.initial_state(b)
        self._check_state(state, b)
        # one matmul for every time step's input projection
        proj = self.project(xs.reshape(b * length, d)).reshape(b, length, -1)
        for t in range(length):
            state = self._advance(proj[:, t, :], state)
        return state

    def _advance(self, xp: Tensor, state: CellState) -> CellState:
        raise NotImplementedError


class GRUCell(_Recurrent):
    """Reset/update-gate GRU.

    z = σ(Wz x + Uz h + bz), r = σ(Wr x + Ur h + br),
    h̃ = tanh(Wh x + Uh (r ⊙ h) + bh), h' = (1 - z) ⊙ h + z ⊙ h̃
    """

    n_gates = 3

    def __init__(self, input_size: int, hidden_size: int, rng=None, name: str = "gru"):
        rng = rng if rng is not None else np.random.default_rng(0)
        super().__init__(input_size, hidden_size, rng, name)
        h = hidden_size
        self.u_zr = Parameter(glorot_uniform(rng, (h, 2 * h), h, 2 * h), name=f"{name}.u_zr")
        self.u_h = Parameter(glorot_uniform(rng, (h, h), h, h), name=f"{name}.u_h")

    def _advance(self, xp: Tensor, state: CellState) -> CellState:
        n = self.hidden_size
        h = state.h
        hu = h @ self.u_zr
        z = (xp[:, :n] + hu[:, :n]).sigmoid()
        r = (xp[:, n:2 * n] + hu[:, n:]).sigmoid()
        cand = (xp[:, 2 * n:] + (r * h) @ self.u_h).tanh()
        return CellState((1.0 - z) * h + z * cand)


class LSTMCell(_Recurrent):
    """LSTM with forget gate; gate blocks ordered input, forget, candidate, output."""

    n_gates = 4
    has_cell = True

    def __init__(self, input_size: int, hidden_size: int, rng=None, name: str = "lstm"):
        rng = rng if rng is not None else np.random.default_rng(0)
        super().__init__(input_size, hidden_size, rng, name)
        h = hidden_size
        self.u = Parameter(glorot_uniform(rng, (h, 4 * h), h, 4 * h), name=f"{name}.u")

    def _check_state(self, state: CellState, batch: int):
        super()._check_state(state, batch)
        if state.c is None or state.c.shape != state.h.shape:
            raise ShapeError("LSTMCell: state needs a cell tensor shaped like h")

    def _advance(self, xp: Tensor, state: CellState) -> CellState:
        n = self.hidden_size
        pre = xp + state.h @ self.u
        i = pre[:, :n].sigmoid()
        f = pre[:, n:2 * n].sigmoid()
        g = pre[:, 2 * n:3 * n].tanh()
        o = pre[:, 3 * n:].sigmoid()
        c = f * state.c + i * g
        return CellState(o * c.tanh(), c)


def _unbatched(cell: _Recurrent, x: Tensor, state: CellState) -> CellState:
    if x.ndim == 2:
        return cell.step(x, state)
    as_row = lambda t: None if t is None else t.reshape(1, -1)
    out = cell.step(x.reshape(1, -1), CellState(as_row(state.h), as_row(state.c)))
    return CellState(out.h.reshape(-1), None if out.c is None else out.c.reshape(-1))


def gru_step(x: Tensor, state: CellState, weights: GRUCell) -> CellState:
    """One GRU update for ``x`` of shape ``D`` or ``B×D``."""
    return _unbatched(weights, x, state)


def lstm_step(x: Tensor, state: CellState, weights: LSTMCell) -> CellState:
    """One LSTM update for ``x`` of shape ``D`` or ``B×D``."""
    return _unbatched(weights, x, state)
