"""Gradient-boosted regression trees.

Exact (pre-sorted) split search, leaf-wise best-first growth, a tweedie
objective with log link or plain squared error, row bagging, per-tree
column sampling and holdout early stopping.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DecodeError, ValidationError

OBJECTIVES = ("tweedie", "squared_error")
INIT_EPS = 1e-12


@dataclass(frozen=True)
class GbtConfig:
    rounds: int = 3600
    learning_rate: float = 0.2
    objective: str = "tweedie"
    tweedie_power: float = 1.1
    num_leaves: int = 200
    min_data_in_leaf: int = 30
    bagging_fraction: float = 0.85
    bagging_freq: int = 7
    colsample: float = 0.85
    lambda_l1: float = 0.5
    lambda_l2: float = 0.5
    early_stopping_rounds: int = 50
    seed: int = 42
    min_sum_hessian: float = 1e-3
    max_depth: int = -1  # <= 0 means unlimited

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"objective must be one of {OBJECTIVES}")
        if self.objective == "tweedie" and not 1.0 < self.tweedie_power < 2.0:
            raise ValidationError("tweedie_power must lie in (1, 2)")
        if self.rounds < 1:
            raise ValidationError("rounds must be >= 1")
        for name in ("bagging_fraction", "colsample"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValidationError(f"{name} must be in (0, 1]")
        if self.num_leaves < 2 or self.min_data_in_leaf < 1:
            raise ValidationError("num_leaves must be >= 2 and min_data_in_leaf >= 1")
        if self.lambda_l1 < 0 or self.lambda_l2 < 0 or self.learning_rate <= 0:
            raise ValidationError("regularizers must be >= 0 and learning_rate > 0")


# --- split arithmetic -----------------------------------------------------------


def threshold_l1(G, l1):
    """Soft-threshold of a gradient sum."""
    return np.sign(G) * np.maximum(np.abs(G) - l1, 0.0)


def leaf_gain(G, H, l1, l2):
    t = threshold_l1(G, l1)
    return t * t / (H + l2)


def split_gain(GL, HL, GR, HR, l1, l2):
    return leaf_gain(GL, HL, l1, l2) + leaf_gain(GR, HR, l1, l2) - leaf_gain(GL + GR, HL + HR, l1, l2)


def leaf_value(G, H, l1, l2):
    return -threshold_l1(G, l1) / (H + l2)


def _midpoint(lo, hi):
    mid = lo + (hi - lo) / 2.0
    # Adjacent floats can round the midpoint up onto ``hi``.
    return np.where(mid < hi, mid, lo)


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float
    n_left: int
    n_right: int


def find_best_split(X, grad, hess, rows, features, config: GbtConfig) -> Split | None:
    """Best exact split of ``rows`` over the candidate ``features``.

    A row goes left when its value is ``<= threshold``. Candidates sit
    between consecutive distinct values and must leave at least
    ``min_data_in_leaf`` rows and ``min_sum_hessian`` on each side. Ties on
    gain resolve to the lowest feature index, then the lowest threshold.
    Returns ``None`` when no candidate has positive gain.
    """
    rows = np.asarray(rows)
    features = np.sort(np.asarray(features, dtype=np.int64))
    m = rows.size
    mdl = config.min_data_in_leaf
    if m < 2 * mdl or features.size == 0:
        return None
    Xn = X[np.ix_(rows, features)]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    g = grad[rows][order]
    h = hess[rows][order]
    GL = np.cumsum(g, axis=0)[:-1]
    HL = np.cumsum(h, axis=0)[:-1]
    G = grad[rows].sum()
    H = hess[rows].sum()
    GR = G - GL
    HR = H - HL
    gains = split_gain(GL, HL, GR, HR, config.lambda_l1, config.lambda_l2)

    n_left = np.arange(1, m)[:, None]
    valid = (
        (xs[:-1] < xs[1:])
        & (n_left >= mdl)
        & (m - n_left >= mdl)
        & (HL >= config.min_sum_hessian)
        & (HR >= config.min_sum_hessian)
        & (gains > 0.0)
    )
    if not valid.any():
        return None
    gains = np.where(valid, gains, -np.inf)
    pos = np.argmax(gains, axis=0)  # first max per feature: lowest threshold
    col_best = gains[pos, np.arange(features.size)]
    j = int(np.argmax(col_best))  # first max across features: lowest index
    i = int(pos[j])
    thr = float(_midpoint(xs[i, j], xs[i + 1, j]))
    return Split(int(features[j]), thr, float(col_best[j]), i + 1, m - i - 1)


# --- trees ------------------------------------------------------------------------


@dataclass
class Tree:
    """Flat node table; node 0 is the root, ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    count: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.feature.size

    @property
    def num_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, X) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.value[node]


def grow_tree(X, grad, hess, rows, features, config: GbtConfig) -> Tree:
    """Leaf-wise growth: always split the leaf with the largest gain."""
    l1, l2 = config.lambda_l1, config.lambda_l2
    feat, thr, left, right, gain, depth = [-1], [0.0], [-1], [-1], [0.0], [0]
    members = {0: np.asarray(rows)}
    max_depth = config.max_depth if config.max_depth > 0 else math.inf

    def candidate(node):
        if depth[node] >= max_depth:
            return None
        return find_best_split(X, grad, hess, members[node], features, config)

    pending = {0: candidate(0)}
    n_leaves = 1
    while n_leaves < config.num_leaves:
        best_node, best = None, None
        for node in sorted(pending):
            s = pending[node]
            if s is not None and (best is None or s.gain > best.gain):
                best_node, best = node, s
        if best is None:
            break
        del pending[best_node]
        r = members.pop(best_node)
        mask = X[r, best.feature] <= best.threshold
        children = []
        for part in (r[mask], r[~mask]):
            children.append(len(feat))
            feat.append(-1)
            thr.append(0.0)
            left.append(-1)
            right.append(-1)
            gain.append(0.0)
            depth.append(depth[best_node] + 1)
            members[children[-1]] = part
        feat[best_node], thr[best_node], gain[best_node] = best.feature, best.threshold, best.gain
        left[best_node], right[best_node] = children
        for c in children:
            pending[c] = candidate(c)
        n_leaves += 1

    n = len(feat)
    value = np.zeros(n)
    count = np.zeros(n, dtype=np.int64)
    for node, r in members.items():
        value[node] = leaf_value(grad[r].sum(), hess[r].sum(), l1, l2) * config.learning_rate
        count[node] = r.size
    tree = Tree(
        np.array(feat, dtype=np.int64),
        np.array(thr, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        value,
        np.array(gain, dtype=np.float64),
        count,
    )
    # Internal node counts follow from their children.
    for node in range(n - 1, -1, -1):
        if tree.feature[node] >= 0:
            tree.count[node] = tree.count[tree.left[node]] + tree.count[tree.right[node]]
    return tree


# --- objectives -------------------------------------------------------------------


def _grad_hess(config: GbtConfig, y, F):
    if config.objective == "squared_error":
        return F - y, np.ones_like(F)
    p = config.tweedie_power
    a = np.exp((1.0 - p) * F)
    b = np.exp((2.0 - p) * F)
    return -y * a + b, -(1.0 - p) * y * a + (2.0 - p) * b


def _init_score(config: GbtConfig, y) -> float:
    m = float(np.mean(y))
    return math.log(m + INIT_EPS) if config.objective == "tweedie" else m


def tweedie_deviance(y, mu, p: float) -> float:
    y = np.asarray(y, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    d = (
        np.power(y, 2.0 - p) / ((1.0 - p) * (2.0 - p))
        - y * np.power(mu, 1.0 - p) / (1.0 - p)
        + np.power(mu, 2.0 - p) / (2.0 - p)
    )
    return float(2.0 * d.sum())


# --- booster ----------------------------------------------------------------------


@dataclass
class Booster:
    config: GbtConfig
    init_score: float
    num_features: int
    trees: list = field(default_factory=list)
    feature_names: list = field(default_factory=list)
    best_iteration: int = 0
    train_rmse: list = field(default_factory=list)
    valid_rmse: list = field(default_factory=list)

    def raw_predict(self, X, num_trees: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.num_features:
            raise ValidationError(f"expected rows with {self.num_features} features, got shape {X.shape}")
        out = np.full(X.shape[0], self.init_score)
        for tree in self.trees[:num_trees]:
            out += tree.predict(X)
        return out

    def link(self, raw):
        return np.exp(raw) if self.config.objective == "tweedie" else raw

    def predict(self, X, num_trees: int | None = None) -> np.ndarray:
        return self.link(self.raw_predict(X, num_trees))


def _check_table(X, y, config):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValidationError("features must be a non-empty 2-D table")
    if y.shape != (X.shape[0],):
        raise ValidationError("targets must have one value per row")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValidationError("non-finite value in training data")
    if config.objective == "tweedie" and np.any(y < 0):
        raise ValidationError("tweedie objective needs non-negative targets")
    return X, y


def gbt_train(config: GbtConfig, features, targets, valid=None, feature_names=None) -> Booster:
    """Fit a booster.

    ``valid`` is an optional ``(features, targets)`` holdout. With it,
    training stops once holdout RMSE has not improved for
    ``early_stopping_rounds`` rounds and the booster is cut back to its
    best round.
    """
    X, y = _check_table(features, targets, config)
    n, F = X.shape
    if n < config.min_data_in_leaf:
        raise ValidationError(f"need at least min_data_in_leaf={config.min_data_in_leaf} rows, got {n}")
    if valid is not None:
        Xv = np.asarray(valid[0], dtype=np.float64)
        yv = np.asarray(valid[1], dtype=np.float64)
        if Xv.ndim != 2 or Xv.shape[1] != F or yv.shape != (Xv.shape[0],):
            raise ValidationError("holdout table does not match the training table")
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(F)]
    if len(names) != F:
        raise ValidationError("feature_names length does not match feature count")

    rng = np.random.default_rng(config.seed)
    booster = Booster(config, _init_score(config, y), F, feature_names=names)
    score = np.full(n, booster.init_score)
    vscore = np.full(Xv.shape[0], booster.init_score) if valid is not None else None
    n_bag = max(1, int(round(config.bagging_fraction * n)))
    n_col = max(1, int(round(config.colsample * F)))
    rows = np.arange(n)
    best, since_best = math.inf, 0

    for it in range(config.rounds):
        if config.bagging_fraction < 1.0 and config.bagging_freq > 0 and it % config.bagging_freq == 0:
            rows = np.sort(rng.choice(n, size=n_bag, replace=False))
        cols = np.sort(rng.choice(F, size=n_col, replace=False)) if n_col < F else np.arange(F)
        grad, hess = _grad_hess(config, y, score)
        tree = grow_tree(X, grad, hess, rows, cols, config)
        booster.trees.append(tree)
        score += tree.predict(X)
        booster.train_rmse.append(float(np.sqrt(np.mean((booster.link(score) - y) ** 2))))
        if valid is None:
            continue
        vscore += tree.predict(Xv)
        rmse = float(np.sqrt(np.mean((booster.link(vscore) - yv) ** 2)))
        booster.valid_rmse.append(rmse)
        if rmse < best:
            best, since_best = rmse, 0
            booster.best_iteration = it + 1
        else:
            since_best += 1
            if since_best >= config.early_stopping_rounds:
                break
    if valid is None:
        booster.best_iteration = len(booster.trees)
    else:
        del booster.trees[booster.best_iteration :]
    return booster


def gbt_predict(booster: Booster, rows) -> np.ndarray:
    return booster.predict(rows)


# --- importance -------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureImportance:
    names: list
    gain: np.ndarray
    count: np.ndarray
    rank: np.ndarray  # feature indices, most important first

    def ranked_names(self) -> list[str]:
        return [self.names[i] for i in self.rank]

    def write_csv(self, path) -> None:
        position = np.empty_like(self.rank)
        position[self.rank] = np.arange(1, self.rank.size + 1)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "gain", "count", "rank"])
            for i in self.rank:
                w.writerow([self.names[i], repr(float(self.gain[i])), int(self.count[i]), int(position[i])])


def feature_importance(booster: Booster) -> FeatureImportance:
    """Total split gain and split count per feature.

    Ranked by gain, then count (both descending), then feature index.
    """
    F = booster.num_features
    gain = np.zeros(F)
    count = np.zeros(F, dtype=np.int64)
    for tree in booster.trees:
        split = tree.feature >= 0
        np.add.at(gain, tree.feature[split], tree.gain[split])
        np.add.at(count, tree.feature[split], 1)
    rank = np.lexsort((np.arange(F), -count, -gain))
    return FeatureImportance(list(booster.feature_names), gain, count, rank)


# --- text serialization -----------------------------------------------------------

_MAGIC = "btcforecast-gbt 1"
_NODE_COLS = ("node", "feature", "threshold", "left", "right", "value", "gain", "count")


def dumps_booster(booster: Booster) -> str:
    lines = [
        _MAGIC,
        "config=" + json.dumps(asdict(booster.config), sort_keys=True),
        f"init_score={booster.init_score!r}",
        f"num_features={booster.num_features}",
        "feature_names=" + json.dumps(booster.feature_names),
        f"best_iteration={booster.best_iteration}",
        f"num_trees={len(booster.trees)}",
    ]
    for t, tree in enumerate(booster.trees):
        lines += ["", f"tree {t}", f"num_nodes={tree.num_nodes}", " ".join(_NODE_COLS)]
        for i in range(tree.num_nodes):
            lines.append(
                f"{i} {tree.feature[i]} {float(tree.threshold[i])!r} {tree.left[i]} {tree.right[i]} "
                f"{float(tree.value[i])!r} {float(tree.gain[i])!r} {tree.count[i]}"
            )
        lines.append("end")
    return "\n".join(lines) + "\n"


def loads_booster(text: str) -> Booster:
    lines = text.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise DecodeError("not a booster file")
    try:
        head = dict(line.split("=", 1) for line in lines[1:7])
        booster = Booster(
            GbtConfig(**json.loads(head["config"])),
            float(head["init_score"]),
            int(head["num_features"]),
            feature_names=json.loads(head["feature_names"]),
            best_iteration=int(head["best_iteration"]),
        )
        n_trees = int(head["num_trees"])
        i = 7
        for t in range(n_trees):
            while not lines[i].strip():
                i += 1
            if lines[i] != f"tree {t}":
                raise DecodeError(f"expected 'tree {t}', found {lines[i]!r}")
            n = int(lines[i + 1].split("=", 1)[1])
            body = [ln.split() for ln in lines[i + 3 : i + 3 + n]]
            if lines[i + 3 + n] != "end":
                raise DecodeError(f"tree {t} is not terminated")
            cols = list(zip(*body))
            booster.trees.append(
                Tree(
                    np.array(cols[1], dtype=np.int64),
                    np.array([float(v) for v in cols[2]]),
                    np.array(cols[3], dtype=np.int64),
                    np.array(cols[4], dtype=np.int64),
                    np.array([float(v) for v in cols[5]]),
                    np.array([float(v) for v in cols[6]]),
                    np.array(cols[7], dtype=np.int64),
                )
            )
            i += 4 + n
    except (KeyError, IndexError, ValueError) as exc:
        raise DecodeError(f"malformed booster file: {exc}") from exc
    return booster


def save_booster(booster: Booster, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_booster(booster))


def load_booster(path) -> Booster:
    with open(path, encoding="utf-8") as fh:
        return loads_booster(fh.read())
