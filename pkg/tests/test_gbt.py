import math

import numpy as np
import pytest
from oracles import brute_force_split, random_split_problem

from btcforecast.errors import DecodeError, ValidationError
from btcforecast.gbt import (
    Booster,
    GbtConfig,
    Tree,
    dumps_booster,
    feature_importance,
    find_best_split,
    gbt_predict,
    gbt_train,
    load_booster,
    loads_booster,
    save_booster,
    tweedie_deviance,
)

EXACT = dict(bagging_fraction=1.0, colsample=1.0)


def test_config_validation():
    with pytest.raises(ValidationError):
        GbtConfig(tweedie_power=2.0)
    with pytest.raises(ValidationError):
        GbtConfig(bagging_fraction=0.0)
    with pytest.raises(ValidationError):
        GbtConfig(rounds=0)
    with pytest.raises(ValidationError):
        GbtConfig(objective="poisson")


def test_constant_target_predicts_constant(rng):
    X = rng.normal(size=(60, 3))
    b = gbt_train(GbtConfig(rounds=1), X, np.full(60, 4.2))
    assert np.allclose(b.predict(X), 4.2, rtol=1e-9)


def test_stump_on_step_feature():
    x = np.arange(20, dtype=float)
    y = np.where(x < 8, 1.0, 5.0)
    cfg = GbtConfig(
        rounds=1, objective="squared_error", num_leaves=2, min_data_in_leaf=1, lambda_l1=0, lambda_l2=0, **EXACT
    )
    b = gbt_train(cfg, x[:, None], y)
    tree = b.trees[0]
    assert tree.feature[0] == 0 and tree.threshold[0] == 7.5
    base = y.mean()
    assert tree.value[tree.left[0]] == pytest.approx(0.2 * (1.0 - base))
    assert tree.value[tree.right[0]] == pytest.approx(0.2 * (5.0 - base))


def test_overfit_interpolates_training_rows(rng):
    X = rng.normal(size=(16, 3))
    y = rng.normal(size=16)
    cfg = GbtConfig(
        rounds=300,
        learning_rate=0.5,
        objective="squared_error",
        num_leaves=16,
        min_data_in_leaf=1,
        min_sum_hessian=0.0,
        lambda_l1=0,
        lambda_l2=0,
        **EXACT,
    )
    b = gbt_train(cfg, X, y)
    assert np.max(np.abs(b.predict(X) - y)) < 1e-6


def test_empty_booster_returns_initial_score():
    b = Booster(GbtConfig(objective="squared_error"), 2.5, 2)
    assert gbt_predict(b, np.zeros((3, 2))).tolist() == [2.5, 2.5, 2.5]
    imp = feature_importance(b)
    assert imp.gain.tolist() == [0.0, 0.0]
    assert imp.rank.tolist() == [0, 1]


def test_single_leaf_uses_exp_link():
    leaf = Tree(*(np.array([v]) for v in (-1, 0.0, -1, -1, 0.3, 0.0, 5)))
    b = Booster(GbtConfig(), math.log(2.0), 1, trees=[leaf])
    assert np.allclose(b.predict(np.zeros((4, 1))), 2.0 * math.exp(0.3), rtol=1e-14)


def test_feature_count_mismatch():
    b = Booster(GbtConfig(), 0.0, 2)
    with pytest.raises(ValidationError):
        gbt_predict(b, np.zeros((3, 3)))


def test_training_input_errors(rng):
    with pytest.raises(ValidationError):
        gbt_train(GbtConfig(rounds=2, min_data_in_leaf=2), rng.normal(size=(10, 2)), -np.ones(10))
    with pytest.raises(ValidationError):
        gbt_train(GbtConfig(rounds=2), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValidationError):
        gbt_train(GbtConfig(rounds=2), rng.normal(size=(10, 2)), np.ones(10))  # fewer rows than min_data


def test_tweedie_deviance_non_increasing(rng):
    X = rng.normal(size=(200, 4))
    y = np.exp(X[:, 0] + 0.3 * rng.normal(size=200))
    cfg = GbtConfig(rounds=40, num_leaves=8, min_data_in_leaf=5, **EXACT)
    b = gbt_train(cfg, X, y)
    dev = [tweedie_deviance(y, b.predict(X, k), 1.1) for k in range(len(b.trees) + 1)]
    assert all(d1 <= d0 * (1 + 1e-12) for d0, d1 in zip(dev, dev[1:]))
    assert dev[-1] < 0.5 * dev[0]


def test_tree_respects_leaf_budget_and_min_data(rng):
    X = rng.normal(size=(300, 3))
    y = np.abs(X[:, 1]) + 0.1
    cfg = GbtConfig(rounds=3, num_leaves=7, min_data_in_leaf=20)
    for tree in gbt_train(cfg, X, y).trees:
        assert tree.num_leaves <= 7
        leaves = tree.feature < 0
        assert np.all(tree.count[leaves] >= 20)
        assert tree.count[0] == round(0.85 * 300)


def test_additivity(rng):
    X = rng.normal(size=(120, 3))
    y = np.exp(0.5 * X[:, 2])
    b = gbt_train(GbtConfig(rounds=10, num_leaves=6, min_data_in_leaf=5), X, y)
    without_last = b.raw_predict(X, len(b.trees) - 1)
    assert np.array_equal(b.raw_predict(X), without_last + b.trees[-1].predict(X))


def test_determinism_and_seed_sensitivity(rng):
    X = rng.normal(size=(150, 4))
    y = np.exp(X[:, 0])
    cfg = GbtConfig(rounds=8, num_leaves=5, min_data_in_leaf=5)
    a, b = gbt_train(cfg, X, y), gbt_train(cfg, X, y)
    assert dumps_booster(a) == dumps_booster(b)
    c = gbt_train(GbtConfig(rounds=8, num_leaves=5, min_data_in_leaf=5, seed=7), X, y)
    assert dumps_booster(a) != dumps_booster(c)


def test_early_stopping_truncates_to_best_round(rng):
    X = rng.normal(size=(200, 2))
    y = np.exp(0.2 * X[:, 0] + rng.normal(size=200))  # mostly noise
    cfg = GbtConfig(rounds=500, num_leaves=31, min_data_in_leaf=3, early_stopping_rounds=10)
    b = gbt_train(cfg, X[:150], y[:150], valid=(X[150:], y[150:]))
    assert len(b.valid_rmse) < 500
    assert len(b.trees) == b.best_iteration
    assert b.best_iteration == int(np.argmin(b.valid_rmse)) + 1
    assert len(b.valid_rmse) - b.best_iteration == 10


def test_serialization_round_trip(tmp_path, rng):
    X = rng.normal(size=(80, 3))
    b = gbt_train(
        GbtConfig(rounds=5, num_leaves=4, min_data_in_leaf=5), X, np.exp(X[:, 1]), feature_names=["a", "b", "c"]
    )
    text = dumps_booster(b)
    assert text.startswith("btcforecast-gbt 1")
    back = loads_booster(text)
    assert np.array_equal(back.predict(X), b.predict(X))
    assert back.feature_names == ["a", "b", "c"]
    save_booster(b, tmp_path / "model.txt")
    assert dumps_booster(load_booster(tmp_path / "model.txt")) == text
    with pytest.raises(DecodeError):
        loads_booster("not a booster\n")


def test_split_matches_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        X, grad, hess, min_data = random_split_problem(rng)
        cfg = GbtConfig(min_data_in_leaf=min_data, lambda_l1=0.5, lambda_l2=0.5)
        got = find_best_split(X, grad, hess, np.arange(X.shape[0]), np.arange(X.shape[1]), cfg)
        want = brute_force_split(X, grad, hess, min_data, cfg.min_sum_hessian, 0.5, 0.5)
        if want is None:
            assert got is None
        else:
            assert (got.feature, got.threshold, got.gain) == want


def test_informative_feature_ranks_first(rng):
    X = rng.normal(size=(300, 5))
    y = np.exp(X[:, 3]) + 0.1 * rng.random(300)
    b = gbt_train(GbtConfig(rounds=30, num_leaves=8, min_data_in_leaf=10), X, y, feature_names=list("abcde"))
    imp = feature_importance(b)
    assert imp.ranked_names()[0] == "d"
    assert sorted(imp.rank.tolist()) == list(range(5))
    assert np.all(imp.gain >= 0)


def test_importance_csv(tmp_path, rng):
    X = rng.normal(size=(100, 2))
    b = gbt_train(GbtConfig(rounds=3, num_leaves=4, min_data_in_leaf=5), X, np.exp(X[:, 0]), feature_names=["x", "y"])
    feature_importance(b).write_csv(tmp_path / "imp.csv")
    lines = (tmp_path / "imp.csv").read_text().splitlines()
    assert lines[0] == "feature,gain,count,rank"
    assert lines[1].startswith("x,") and lines[1].endswith(",1")
