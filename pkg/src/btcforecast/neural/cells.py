"""GRU and LSTM cells plus their unrolled forward/backward passes.

Gate blocks are stacked along the first axis of ``W`` (input kernel),
``U`` (recurrent kernel) and ``b``: GRU order is update, reset, candidate;
LSTM order is input, forget, cell, output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

GATES = {"GRU": ("z", "r", "h"), "LSTM": ("i", "f", "g", "o")}


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class CellParams:
    kind: str
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.kind not in GATES:
            raise ValidationError(f"unknown cell kind {self.kind!r}")
        g = len(GATES[self.kind])
        rows = self.W.shape[0]
        if self.W.ndim != 2 or rows % g:
            raise ValidationError("W must be (gates*hidden, features)")
        h = rows // g
        if self.U.shape != (rows, h) or self.b.shape != (rows,):
            raise ValidationError(f"inconsistent {self.kind} parameter shapes")
        for a in (self.W, self.U, self.b):
            if not np.all(np.isfinite(a)):
                raise ValidationError("non-finite cell parameter")

    @property
    def hidden(self) -> int:
        return self.U.shape[1]

    @property
    def features(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str):
        """``(W, U, b)`` slices for one gate."""
        k = GATES[self.kind].index(name)
        s = slice(k * self.hidden, (k + 1) * self.hidden)
        return self.W[s], self.U[s], self.b[s]


def _check_dims(params: CellParams, x, h):
    if x.shape[-1] != params.features:
        raise ValidationError(f"input has {x.shape[-1]} features, cell expects {params.features}")
    if h.shape[-1] != params.hidden:
        raise ValidationError(f"state has {h.shape[-1]} units, cell expects {params.hidden}")


def gru_cell_forward(params: CellParams, x, h_prev):
    """One GRU step; ``x`` and ``h_prev`` may carry a leading batch axis."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    _check_dims(params, x, h_prev)
    H = params.hidden
    a = x @ params.W.T + params.b
    zr = sigmoid(a[..., : 2 * H] + h_prev @ params.U[: 2 * H].T)
    z, r = zr[..., :H], zr[..., H:]
    cand = np.tanh(a[..., 2 * H :] + (r * h_prev) @ params.U[2 * H :].T)
    return (1.0 - z) * h_prev + z * cand


def lstm_cell_forward(params: CellParams, x, state):
    """One LSTM step; returns ``(h, c)``."""
    h_prev, c_prev = (np.asarray(s, dtype=np.float64) for s in state)
    x = np.asarray(x, dtype=np.float64)
    _check_dims(params, x, h_prev)
    H = params.hidden
    a = x @ params.W.T + h_prev @ params.U.T + params.b
    i = sigmoid(a[..., :H])
    f = sigmoid(a[..., H : 2 * H])
    g = np.tanh(a[..., 2 * H : 3 * H])
    o = sigmoid(a[..., 3 * H :])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


# --- unrolled sequences: X is (N, T, F), outputs (N, T, H) -------------------


def gru_sequence_forward(W, U, b, X):
    N, T, _ = X.shape
    H = U.shape[1]
    XW = X @ W.T + b
    Uzr, Uh = U[: 2 * H], U[2 * H :]
    hs = np.empty((N, T, H))
    h_prevs = np.empty((N, T, H))
    zs = np.empty((N, T, H))
    rs = np.empty((N, T, H))
    cands = np.empty((N, T, H))
    h = np.zeros((N, H))
    for t in range(T):
        h_prevs[:, t] = h
        zr = sigmoid(XW[:, t, : 2 * H] + h @ Uzr.T)
        z, r = zr[:, :H], zr[:, H:]
        cand = np.tanh(XW[:, t, 2 * H :] + (r * h) @ Uh.T)
        h = h + z * (cand - h)
        hs[:, t], zs[:, t], rs[:, t], cands[:, t] = h, z, r, cand
    return hs, (X, h_prevs, zs, rs, cands)


def gru_sequence_backward(W, U, b, dH, cache):
    """Gradients for :func:`gru_sequence_forward` given ``dL/dh_t`` for all t."""
    X, h_prevs, zs, rs, cands = cache
    N, T, H = dH.shape
    Uzr, Uh = U[: 2 * H], U[2 * H :]
    dA = np.empty((N, T, 3 * H))
    dh_next = np.zeros((N, H))
    for t in range(T - 1, -1, -1):
        hp, z, r, cand = h_prevs[:, t], zs[:, t], rs[:, t], cands[:, t]
        dh = dH[:, t] + dh_next
        dah = dh * z * (1.0 - cand * cand)
        drh = dah @ Uh
        dzr = np.concatenate([dh * (cand - hp) * z * (1.0 - z), drh * hp * r * (1.0 - r)], axis=1)
        dh_next = dh * (1.0 - z) + drh * r + dzr @ Uzr
        dA[:, t, : 2 * H] = dzr
        dA[:, t, 2 * H :] = dah
    flat_dA = dA.reshape(N * T, 3 * H)
    dU = np.empty_like(U)
    dU[: 2 * H] = flat_dA[:, : 2 * H].T @ h_prevs.reshape(N * T, H)
    dU[2 * H :] = flat_dA[:, 2 * H :].T @ (rs * h_prevs).reshape(N * T, H)
    dW = flat_dA.T @ X.reshape(N * T, -1)
    db = flat_dA.sum(axis=0)
    dX = dA @ W
    return dX, dW, dU, db


def lstm_sequence_forward(W, U, b, X):
    N, T, _ = X.shape
    H = U.shape[1]
    XW = X @ W.T + b
    hs = np.empty((N, T, H))
    h_prevs = np.empty((N, T, H))
    c_prevs = np.empty((N, T, H))
    gates = np.empty((N, T, 4 * H))
    tcs = np.empty((N, T, H))
    h = np.zeros((N, H))
    c = np.zeros((N, H))
    for t in range(T):
        h_prevs[:, t], c_prevs[:, t] = h, c
        a = XW[:, t] + h @ U.T
        act = sigmoid(a)
        act[:, 2 * H : 3 * H] = np.tanh(a[:, 2 * H : 3 * H])
        i, f, g, o = act[:, :H], act[:, H : 2 * H], act[:, 2 * H : 3 * H], act[:, 3 * H :]
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[:, t], gates[:, t], tcs[:, t] = h, act, tc
    return hs, (X, h_prevs, c_prevs, gates, tcs)


def lstm_sequence_backward(W, U, b, dH, cache):
    X, h_prevs, c_prevs, gates, tcs = cache
    N, T, H = dH.shape
    dA = np.empty((N, T, 4 * H))
    dh_next = np.zeros((N, H))
    dc_next = np.zeros((N, H))
    for t in range(T - 1, -1, -1):
        act = gates[:, t]
        i, f, g, o = act[:, :H], act[:, H : 2 * H], act[:, 2 * H : 3 * H], act[:, 3 * H :]
        tc = tcs[:, t]
        dh = dH[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        da = dA[:, t]
        da[:, :H] = dc * g * i * (1.0 - i)
        da[:, H : 2 * H] = dc * c_prevs[:, t] * f * (1.0 - f)
        da[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        da[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dh_next = da @ U
        dc_next = dc * f
    flat_dA = dA.reshape(N * T, 4 * H)
    dU = flat_dA.T @ h_prevs.reshape(N * T, H)
    dW = flat_dA.T @ X.reshape(N * T, -1)
    db = flat_dA.sum(axis=0)
    dX = dA @ W
    return dX, dW, dU, db


SEQUENCE_OPS = {
    "GRU": (gru_sequence_forward, gru_sequence_backward),
    "LSTM": (lstm_sequence_forward, lstm_sequence_backward),
}
