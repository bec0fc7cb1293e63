"""Sequential recurrent regressors, BPTT training and gradient checking."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import TrainingError, ValidationError
from ..preprocess import WindowedSet
from .adam import AdamState, adam_step
from .layers import Bidirectional, Dense, Dropout, Recurrent

ARCHITECTURES = ("GRU", "BiGRU", "LSTM", "BiLSTM", "BiLSTM_d")

# architecture -> (learning rate, dropout rate)
ARCH_DEFAULTS = {
    "GRU": (1e-4, 0.3),
    "BiGRU": (1e-4, 0.3),
    "LSTM": (2e-3, 0.0),
    "BiLSTM": (1e-2, 0.0),
    "BiLSTM_d": (1e-2, 0.3),
}

LSTM_L1 = 0.01
LSTM_L2 = 0.01
LSTM_MAX_NORM = 1.0


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture and training settings.

    ``learning_rate`` and ``dropout_rate`` default per architecture when
    left as ``None``.
    """

    architecture: str
    hidden: int = 90
    dropout_rate: float | None = None
    learning_rate: float | None = None
    epochs: int = 500
    batch_size: int = 64
    seed: int = 42

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValidationError(f"unknown architecture {self.architecture!r}; pick from {ARCHITECTURES}")
        lr, p = ARCH_DEFAULTS[self.architecture]
        if self.learning_rate is None:
            object.__setattr__(self, "learning_rate", lr)
        if self.dropout_rate is None:
            object.__setattr__(self, "dropout_rate", p)
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError("dropout_rate must be in [0, 1)")
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be >= 0")
        if self.hidden < 1 or self.epochs < 0 or self.batch_size < 1:
            raise ValidationError("hidden, epochs and batch_size must be positive")


def build_layers(spec: NetworkSpec, n_features: int) -> list:
    H, p = spec.hidden, spec.dropout_rate
    arch = spec.architecture
    if arch == "GRU":
        return [
            Recurrent("GRU", n_features, H, return_sequences=True),
            Dropout(p, H),
            Recurrent("GRU", H, H),
            Dropout(p, H),
            Dense(H, 1),
        ]
    if arch == "BiGRU":
        return [
            Bidirectional(Recurrent("GRU", n_features, H, True), Recurrent("GRU", n_features, H, True)),
            Dropout(p, 2 * H),
            Bidirectional(Recurrent("GRU", 2 * H, H), Recurrent("GRU", 2 * H, H)),
            Dropout(p, 2 * H),
            Dense(2 * H, 1),
        ]
    if arch == "LSTM":
        return [
            Recurrent("LSTM", n_features, H, l1=LSTM_L1, l2=LSTM_L2, max_norm=LSTM_MAX_NORM),
            Dense(H, H),
            Dense(H, 1),
        ]
    if arch == "BiLSTM":
        return [
            Bidirectional(Recurrent("LSTM", n_features, H), Recurrent("LSTM", n_features, H)),
            Dense(2 * H, 1),
        ]
    # BiLSTM_d
    return [
        Bidirectional(Recurrent("LSTM", n_features, H, True), Recurrent("LSTM", n_features, H, True)),
        Dropout(p, 2 * H),
        Bidirectional(Recurrent("LSTM", 2 * H, H), Recurrent("LSTM", 2 * H, H)),
        Dropout(p, 2 * H),
        Dense(2 * H, 1),
    ]


class Network:
    """A stack of layers ending in a one-unit dense head."""

    def __init__(self, layers, n_features):
        if not layers or layers[-1].output_dim != 1:
            raise ValidationError("network must end in a single output unit")
        self.layers = list(layers)
        self.n_features = n_features

    @classmethod
    def from_spec(cls, spec: NetworkSpec, n_features: int, rng) -> Network:
        net = cls(build_layers(spec, n_features), n_features)
        for layer in net.layers:
            layer.initialize(rng)
        return net

    def describe(self) -> list[str]:
        return [layer.describe() for layer in self.layers]

    @property
    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for k, v in layer.params.items():
                out[f"{i}.{k}"] = v
        return out

    def set_param(self, key: str, value):
        i, name = key.split(".", 1)
        layer = self.layers[int(i)]
        value = np.array(value, dtype=np.float64)
        if hasattr(layer, "set_param"):
            layer.set_param(name, value)
        else:
            layer.params[name] = value

    def _forward(self, x, train, rng):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.n_features:
            raise ValidationError(f"expected (windows, steps, {self.n_features}) input, got {x.shape}")
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x, train, rng)
            caches.append(c)
        return x[:, 0], caches

    def predict(self, x, train=False, rng=None) -> np.ndarray:
        if train and rng is None:
            raise ValidationError("train-mode forward needs a random generator for dropout")
        return self._forward(x, train, rng)[0]

    def penalty(self) -> float:
        return float(sum(layer.penalty() for layer in self.layers))

    def loss_and_grads(self, x, y, train=False, rng=None):
        """MSE on ``(x, y)`` and gradients of ``MSE + weight penalty``."""
        pred, caches = self._forward(x, train, rng)
        err = pred - y
        mse = float(np.mean(err * err))
        dout = (2.0 / err.size) * err[:, None]
        grads = {}
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            dout, g = layer.backward(dout, caches[i])
            for k, v in g.items():
                grads[f"{i}.{k}"] = v
            for k, v in layer.penalty_grads().items():
                grads[f"{i}.{k}"] = grads[f"{i}.{k}"] + v
        return mse, grads

    def apply_constraints(self):
        for layer in self.layers:
            layer.apply_constraints()


@dataclass
class TrainedModel:
    spec: NetworkSpec
    network: Network
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def predict(self, inputs) -> np.ndarray:
        return self.network.predict(inputs)

    @property
    def parameters(self) -> dict[str, np.ndarray]:
        return self.network.params


def _rngs(seed):
    init, shuffle, dropout = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init), np.random.default_rng(shuffle), np.random.default_rng(dropout)


def init_model(spec: NetworkSpec, n_features: int) -> TrainedModel:
    """Untrained model with the seeded initial weights ``train`` would use."""
    init_rng, _, _ = _rngs(spec.seed)
    return TrainedModel(spec, Network.from_spec(spec, n_features, init_rng))


def forward(model, batch, mode: str = "infer", rng=None) -> np.ndarray:
    """Predictions for a ``(windows, steps, features)`` batch.

    ``mode='train'`` samples dropout masks from ``rng``.
    """
    if mode not in ("train", "infer"):
        raise ValidationError("mode must be 'train' or 'infer'")
    net = model.network if isinstance(model, TrainedModel) else model
    return net.predict(batch, train=(mode == "train"), rng=rng)


def train(spec: NetworkSpec, data: WindowedSet, progress=None) -> TrainedModel:
    """Minibatch Adam on MSE with a per-epoch seeded shuffle.

    ``loss_history[e]`` is the mean training MSE over epoch ``e`` as seen
    during training (dropout active). ``progress``, if given, is called as
    ``progress(epoch, loss)``.
    """
    n = len(data)
    if n == 0:
        raise ValidationError("cannot train on an empty window set")
    init_rng, shuffle_rng, dropout_rng = _rngs(spec.seed)
    net = Network.from_spec(spec, data.num_features, init_rng)
    params = net.params
    state = AdamState.for_params(params)
    history = np.empty(spec.epochs)
    X, y = data.inputs, data.targets
    bs = spec.batch_size
    for epoch in range(spec.epochs):
        order = shuffle_rng.permutation(n)
        sq_sum = 0.0
        for b, start in enumerate(range(0, n, bs)):
            idx = order[start : start + bs]
            mse, grads = net.loss_and_grads(X[idx], y[idx], train=True, rng=dropout_rng)
            if not math.isfinite(mse):
                raise TrainingError(f"{spec.architecture}: non-finite loss at epoch {epoch}, batch {b}")
            adam_step(state, params, grads, spec.learning_rate)
            net.apply_constraints()
            sq_sum += mse * idx.size
        history[epoch] = sq_sum / n
        if progress is not None:
            progress(epoch, history[epoch])
    return TrainedModel(spec, net, history)


def grad_check(spec: NetworkSpec, data: WindowedSet, h: float = 1e-5, floor: float = 1e-7) -> float:
    """Largest relative gap between BPTT and central-difference gradients.

    Dropout is switched off. The objective includes any weight penalty.
    Relative error per entry is ``|a - n| / max(|a|, |n|, floor)``.
    """
    spec = replace(spec, dropout_rate=0.0)
    model = init_model(spec, data.num_features)
    net = model.network
    X, y = data.inputs, data.targets

    def objective():
        pred = net.predict(X)
        return float(np.mean((pred - y) ** 2)) + net.penalty()

    _, grads = net.loss_and_grads(X, y)
    worst = 0.0
    for key, p in net.params.items():
        g = grads[key]
        flat = p.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = objective()
            flat[j] = orig - h
            down = objective()
            flat[j] = orig
            num = (up - down) / (2.0 * h)
            ana = g.reshape(-1)[j]
            rel = abs(ana - num) / max(abs(ana), abs(num), floor)
            worst = max(worst, rel)
    return worst


# --- persistence ---------------------------------------------------------------


def save_checkpoint(model: TrainedModel, path) -> None:
    """NumPy archive: a JSON header (spec, layer list) plus float64 tensors."""
    header = {
        "format": "btcforecast-rnn-1",
        "spec": asdict(model.spec),
        "n_features": model.network.n_features,
        "layers": model.network.describe(),
        "tensors": sorted(model.parameters),
    }
    arrays = {f"param/{k}": np.asarray(v, dtype=np.float64) for k, v in model.parameters.items()}
    arrays["loss_history"] = np.asarray(model.loss_history, dtype=np.float64)
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header)), **arrays)


def load_checkpoint(path) -> TrainedModel:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["__header__"]))
        spec = NetworkSpec(**header["spec"])
        net = Network(build_layers(spec, header["n_features"]), header["n_features"])
        for key in header["tensors"]:
            net.set_param(key, z[f"param/{key}"])
        history = z["loss_history"].copy()
    if net.describe() != header["layers"]:
        raise ValidationError("checkpoint layer list does not match its spec")
    return TrainedModel(spec, net, history)


def write_loss_csv(model: TrainedModel, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "mse"])
        for e, v in enumerate(model.loss_history):
            w.writerow([e, repr(float(v))])
