"""Layers for the sequential recurrent networks.

Each layer keeps its tensors in ``params`` and exposes
``forward(x, train, rng) -> (out, cache)`` and
``backward(dout, cache) -> (dx, grads)``.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .cells import GATES, SEQUENCE_OPS


def glorot_uniform(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def orthogonal(rng, rows, cols):
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    return np.ascontiguousarray(q if rows >= cols else q.T)


class Recurrent:
    def __init__(
        self,
        kind,
        input_dim,
        hidden,
        return_sequences=False,
        l1=0.0,
        l2=0.0,
        max_norm=None,
    ):
        if kind not in GATES:
            raise ValidationError(f"unknown cell kind {kind!r}")
        self.kind = kind
        self.input_dim = input_dim
        self.hidden = hidden
        self.return_sequences = return_sequences
        self.l1, self.l2, self.max_norm = l1, l2, max_norm
        g = len(GATES[kind])
        self.params = {
            "W": np.zeros((g * hidden, input_dim)),
            "U": np.zeros((g * hidden, hidden)),
            "b": np.zeros(g * hidden),
        }

    @property
    def output_dim(self):
        return self.hidden

    def describe(self):
        d = f"{self.kind}({self.hidden}{', seq' if self.return_sequences else ''})"
        if self.l1 or self.l2 or self.max_norm:
            d += f"[l1={self.l1}, l2={self.l2}, max_norm={self.max_norm}]"
        return d

    def initialize(self, rng):
        gh = self.params["W"].shape[0]
        self.params["W"] = glorot_uniform(rng, self.input_dim, gh, (gh, self.input_dim))
        self.params["U"] = orthogonal(rng, gh, self.hidden)
        self.params["b"] = np.zeros(gh)
        self.apply_constraints()

    def forward(self, x, train=False, rng=None):
        if x.shape[-1] != self.input_dim:
            raise ValidationError(f"{self.describe()} expects {self.input_dim} features, got {x.shape[-1]}")
        fwd, _ = SEQUENCE_OPS[self.kind]
        p = self.params
        hs, cache = fwd(p["W"], p["U"], p["b"], x)
        out = hs if self.return_sequences else hs[:, -1]
        return out, (cache, hs.shape)

    def backward(self, dout, cache):
        seq_cache, shape = cache
        if self.return_sequences:
            dH = dout
        else:
            dH = np.zeros(shape)
            dH[:, -1] = dout
        _, bwd = SEQUENCE_OPS[self.kind]
        p = self.params
        dX, dW, dU, db = bwd(p["W"], p["U"], p["b"], dH, seq_cache)
        return dX, {"W": dW, "U": dU, "b": db}

    def penalty(self):
        W = self.params["W"]
        return self.l1 * np.abs(W).sum() + self.l2 * (W * W).sum()

    def penalty_grads(self):
        if not (self.l1 or self.l2):
            return {}
        W = self.params["W"]
        return {"W": self.l1 * np.sign(W) + 2.0 * self.l2 * W}

    def apply_constraints(self):
        if self.max_norm is None:
            return
        W = self.params["W"]
        # One row per (gate, unit): its weights over the input features.
        norms = np.sqrt((W * W).sum(axis=1, keepdims=True))
        over = norms > self.max_norm
        if np.any(over):
            W *= np.where(over, self.max_norm / np.where(over, norms, 1.0), 1.0)


class Bidirectional:
    """Forward pass plus a pass over the time-reversed input, concatenated."""

    def __init__(self, forward_layer: Recurrent, backward_layer: Recurrent):
        self.fwd = forward_layer
        self.bwd = backward_layer
        self.return_sequences = forward_layer.return_sequences
        self.input_dim = forward_layer.input_dim

    @property
    def output_dim(self):
        return self.fwd.hidden + self.bwd.hidden

    @property
    def params(self):
        out = {f"fwd.{k}": v for k, v in self.fwd.params.items()}
        out.update({f"bwd.{k}": v for k, v in self.bwd.params.items()})
        return out

    def set_param(self, name, value):
        side, key = name.split(".", 1)
        getattr(self, side).params[key] = value

    def describe(self):
        return f"Bidirectional({self.fwd.describe()})"

    def initialize(self, rng):
        self.fwd.initialize(rng)
        self.bwd.initialize(rng)

    def forward(self, x, train=False, rng=None):
        yf, cf = self.fwd.forward(x)
        yb, cb = self.bwd.forward(np.ascontiguousarray(x[:, ::-1]))
        if self.return_sequences:
            yb = yb[:, ::-1]
        return np.concatenate([yf, yb], axis=-1), (cf, cb)

    def backward(self, dout, cache):
        cf, cb = cache
        H = self.fwd.hidden
        dyf, dyb = dout[..., :H], dout[..., H:]
        if self.return_sequences:
            dyb = dyb[:, ::-1]
        dxf, gf = self.fwd.backward(dyf, cf)
        dxb, gb = self.bwd.backward(dyb, cb)
        grads = {f"fwd.{k}": v for k, v in gf.items()}
        grads.update({f"bwd.{k}": v for k, v in gb.items()})
        return dxf + dxb[:, ::-1], grads

    def penalty(self):
        return self.fwd.penalty() + self.bwd.penalty()

    def penalty_grads(self):
        out = {f"fwd.{k}": v for k, v in self.fwd.penalty_grads().items()}
        out.update({f"bwd.{k}": v for k, v in self.bwd.penalty_grads().items()})
        return out

    def apply_constraints(self):
        self.fwd.apply_constraints()
        self.bwd.apply_constraints()


class Dropout:
    """Inverted dropout: kept units are scaled by ``1 / (1 - rate)`` in training."""

    def __init__(self, rate, input_dim):
        if not 0.0 <= rate < 1.0:
            raise ValidationError("dropout rate must be in [0, 1)")
        self.rate = rate
        self.input_dim = input_dim
        self.params = {}

    @property
    def output_dim(self):
        return self.input_dim

    def describe(self):
        return f"Dropout({self.rate})"

    def initialize(self, rng):
        pass

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            return x, None
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, dout, mask):
        return (dout if mask is None else dout * mask), {}

    def penalty(self):
        return 0.0

    def penalty_grads(self):
        return {}

    def apply_constraints(self):
        pass


class Dense:
    """Linear map on the last axis."""

    def __init__(self, input_dim, units):
        self.input_dim = input_dim
        self.units = units
        self.params = {"W": np.zeros((units, input_dim)), "b": np.zeros(units)}

    @property
    def output_dim(self):
        return self.units

    def describe(self):
        return f"Dense({self.units})"

    def initialize(self, rng):
        self.params["W"] = glorot_uniform(rng, self.input_dim, self.units, (self.units, self.input_dim))
        self.params["b"] = np.zeros(self.units)

    def forward(self, x, train=False, rng=None):
        if x.shape[-1] != self.input_dim:
            raise ValidationError(f"Dense expects {self.input_dim} inputs, got {x.shape[-1]}")
        return x @ self.params["W"].T + self.params["b"], x

    def backward(self, dout, x):
        W = self.params["W"]
        flat_d = dout.reshape(-1, self.units)
        flat_x = x.reshape(-1, self.input_dim)
        return dout @ W, {"W": flat_d.T @ flat_x, "b": flat_d.sum(axis=0)}

    def penalty(self):
        return 0.0

    def penalty_grads(self):
        return {}

    def apply_constraints(self):
        pass
