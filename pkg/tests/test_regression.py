import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lesionseg.errors import CorruptFile, NoSamples, VersionMismatch
from lesionseg.regression import (
    ModelBundle, SvrModel, ensemble_score, fit_dual, load_bundle, oob_predictions,
    predict_forest, predict_svr, rbf_kernel, save_bundle, train_forest, train_svr,
)
from lesionseg.regression.ensemble import dumps_bundle, loads_bundle
from lesionseg.regression.forest import Tree, _best_split
from lesionseg.regression.svr import dual_objective
from factories import random_stats
from oracles import svr_dual_qp, svr_dual_value


def linear_data(n, seed, noise=0.02):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 10))
    return X, X.mean(axis=1) + rng.normal(0, noise, n)


def leaf_tree(v):
    return Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([v]))


# ----------------------------------------------------------------- forest

class TestForest:
    def test_constant_targets(self):
        X = np.random.default_rng(0).random((40, 10))
        model = train_forest(X, np.full(40, 0.7))
        assert len(model.trees) == 50
        assert all(t.n_nodes == 1 for t in model.trees)
        np.testing.assert_allclose(model.predict(np.random.default_rng(1).random((20, 10))), 0.7,
                                   rtol=0, atol=1e-12)

    def test_single_sample(self):
        model = train_forest(np.full((1, 10), 0.3), [0.42])
        assert predict_forest(model, np.zeros(10)) == pytest.approx(0.42, abs=1e-12)

    def test_no_samples(self):
        with pytest.raises(NoSamples):
            train_forest(np.empty((0, 10)), [])

    def test_two_tree_mean(self):
        from lesionseg.regression.forest import ForestModel
        model = ForestModel((leaf_tree(0.2), leaf_tree(0.4)), 0, 10)
        assert predict_forest(model, np.zeros(10)) == pytest.approx(0.3, abs=1e-15)

    def test_oob_beats_constant(self):
        X, y = linear_data(200, 2)
        model = train_forest(X, y, seed=3)
        oob = oob_predictions(model, X)
        ok = ~np.isnan(oob)
        assert ok.sum() > 190
        assert np.mean((oob[ok] - y[ok]) ** 2) < 0.5 * y.var()

    def test_deterministic(self):
        X, y = linear_data(80, 4)
        a, b = train_forest(X, y, seed=5), train_forest(X, y, seed=5)
        assert [t.to_dict() for t in a.trees] == [t.to_dict() for t in b.trees]
        Xq = np.random.default_rng(6).random((30, 10))
        assert a.predict(Xq).tobytes() == b.predict(Xq).tobytes()
        assert train_forest(X, y, seed=6).predict(Xq).tobytes() != a.predict(Xq).tobytes()

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_prediction_within_target_range(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 60))
        X, y = rng.random((n, 10)), rng.random(n)
        model = train_forest(X, y, seed=seed, n_trees=8)
        p = model.predict(rng.uniform(-1, 2, (50, 10)))
        assert np.all(p >= y.min() - 1e-12) and np.all(p <= y.max() + 1e-12)

    def test_tree_structure(self):
        X, y = linear_data(120, 7)
        for tree in train_forest(X, y, n_trees=5).trees:
            internal = tree.feature >= 0
            assert np.all(tree.feature[internal] < 10)
            assert np.all(tree.left[internal] > 0) and np.all(tree.right[internal] > 0)
            assert np.all(tree.left[~internal] == -1)

    def test_leaf_values_are_means_on_training_subsets(self):
        rng = np.random.default_rng(8)
        X, y = rng.random((60, 10)), rng.random(60)
        tree = train_forest(X, y, n_trees=1).trees[0]
        boot = np.random.default_rng([0, 0]).integers(0, 60, size=60)
        Xb, yb = X[boot], y[boot]
        node = np.zeros(60, dtype=int)
        for _ in range(64):
            f = tree.feature[node]
            go = np.where(f >= 0, Xb[np.arange(60), np.maximum(f, 0)] <= tree.threshold[node], True)
            node = np.where(f >= 0, np.where(go, tree.left[node], tree.right[node]), node)
        for leaf in np.unique(node):
            assert tree.value[leaf] == pytest.approx(yb[node == leaf].mean(), abs=1e-12)

    def test_best_split_matches_brute_force(self):
        rng = np.random.default_rng(9)
        X = np.round(rng.random((25, 4)) * 5) / 5
        y = rng.random(25)
        f, thr, sse = _best_split(X, y, range(4))
        best = math.inf
        for j in range(4):
            vals = np.unique(X[:, j])
            for lo, hi in zip(vals, vals[1:]):
                t = (lo + hi) / 2
                left, right = y[X[:, j] <= t], y[X[:, j] > t]
                best = min(best, ((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum())
        assert sse == pytest.approx(best, abs=1e-9)
        vals = np.unique(X[:, f])
        assert np.any(np.isclose(thr, (vals[:-1] + vals[1:]) / 2))


# -------------------------------------------------------------------- svr

class TestSvr:
    def test_constant_targets(self):
        X = np.random.default_rng(0).random((15, 10))
        beta, bias, _, _ = fit_dual(X, np.full(15, 0.6))
        np.testing.assert_array_equal(beta, 0)
        assert bias == pytest.approx(0.6, abs=1e-12)
        model = train_svr(X, np.full(15, 0.6))
        assert len(model.coef) == 0
        np.testing.assert_allclose(model.predict(np.random.default_rng(1).random((5, 10))), 0.6)

    @pytest.mark.parametrize("seed", range(4))
    def test_two_points_closed_form(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.random((2, 10))
        y = np.array([0.1, 0.9])
        eps = 0.2
        k = float(np.exp(-0.5 * ((X[0] - X[1]) ** 2).sum()))
        t = min(max((y[1] - y[0] - 2 * eps) / (2 * (1 - k)), 0.0), 100.0)
        beta, bias, _, _ = fit_dual(X, y, tol=1e-10)
        np.testing.assert_allclose(beta, [-t, t], atol=1e-9)
        assert bias == pytest.approx(y[1] - eps - t * (1 - k), abs=1e-9)

    @pytest.mark.parametrize("seed", range(6))
    def test_against_dense_qp(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 25))
        X, y = rng.random((n, 10)), rng.random(n)
        C, eps = (100.0, 0.2) if seed % 2 == 0 else (1.0, 0.05)
        K = rbf_kernel(X, X, 0.5)
        beta, *_ = fit_dual(X, y, C=C, epsilon=eps)
        ref = svr_dual_qp(K, y, C, eps)
        assert svr_dual_value(beta, K, y, eps) == pytest.approx(svr_dual_value(ref, K, y, eps), abs=1e-3)
        assert abs(beta.sum()) <= 1e-6
        assert np.all(np.abs(beta) <= C + 1e-9)
        assert dual_objective(beta, X, y, 0.5, eps) == pytest.approx(svr_dual_value(beta, K, y, eps))

    def test_free_points_on_tube(self):
        rng = np.random.default_rng(10)
        X, y = rng.random((40, 10)), rng.random(40)
        model = train_svr(X, y, C=1.0, epsilon=0.05)
        beta, *_ = fit_dual(X, y, C=1.0, epsilon=0.05)
        free = (np.abs(beta) > 1e-9) & (np.abs(beta) < 1.0 - 1e-9)
        assert free.any()
        resid = np.abs(model.predict(X[free]) - y[free])
        assert np.all(np.abs(resid - 0.05) <= 1e-3)

    def test_predict_direct_sum(self):
        rng = np.random.default_rng(11)
        S, coef = rng.random((12, 10)), rng.normal(0, 3, 12)
        model = SvrModel(S, coef, 0.37, 100.0, 0.5, 0.2)
        X = rng.random((25, 10))
        direct = [sum(c * math.exp(-0.5 * float(((s - x) ** 2).sum())) for s, c in zip(S, coef)) + 0.37
                  for x in X]
        np.testing.assert_allclose(model.predict(X), direct, rtol=0, atol=1e-12)

    def test_trivial_models(self):
        empty = SvrModel(np.empty((0, 10)), np.empty(0), 0.25, 100.0, 0.5, 0.2)
        assert predict_svr(empty, np.ones(10)) == 0.25
        s = np.random.default_rng(12).random(10)
        lone = SvrModel(s[None], np.array([1.0]), 0.0, 100.0, 0.5, 0.2)
        assert predict_svr(lone, s) == 1.0

    def test_deterministic_and_no_samples(self):
        X, y = linear_data(50, 13)
        a, b = train_svr(X, y), train_svr(X, y)
        assert a.coef.tobytes() == b.coef.tobytes() and a.bias == b.bias
        with pytest.raises(NoSamples):
            train_svr(np.empty((0, 10)), [])


# --------------------------------------------------------------- ensemble

class _Const:
    def __init__(self, v):
        self.v = v

    def predict(self, X):
        return np.full(len(np.atleast_2d(X)), self.v)


@pytest.fixture(scope="module")
def bundle():
    X, y = linear_data(60, 14)
    return ModelBundle(train_forest(X, y, seed=1, n_trees=10), train_svr(X, y),
                       random_stats(np.random.default_rng(15)))


class TestEnsemble:
    @pytest.mark.parametrize("f, s, expected", [(0.6, 0.8, 0.7), (0.0, 0.0, 0.0), (0.9, 1.3, 1.0),
                                                (-0.5, 0.1, 0.0)])
    def test_average_and_clamp(self, f, s, expected):
        b = ModelBundle(_Const(f), _Const(s), None)
        assert ensemble_score(b, np.zeros(10)) == pytest.approx(expected, abs=1e-15)

    def test_output_range(self, bundle):
        s = bundle.score(np.random.default_rng(16).uniform(-3, 3, (200, 10)))
        assert np.all((s >= 0) & (s <= 1))

    def test_round_trip_bit_identical(self, bundle, tmp_path):
        path = tmp_path / "model.json"
        save_bundle(bundle, path)
        back = load_bundle(path)
        X = np.random.default_rng(17).random((100, 10))
        assert back.score(X).tobytes() == bundle.score(X).tobytes()
        assert back.forest.predict(X).tobytes() == bundle.forest.predict(X).tobytes()
        assert back.svr.predict(X).tobytes() == bundle.svr.predict(X).tobytes()
        assert back.stats.to_dict() == bundle.stats.to_dict()

    def test_serialization_stable(self, bundle):
        text = dumps_bundle(bundle)
        assert dumps_bundle(loads_bundle(text)) == text

    def test_version_mismatch(self, bundle):
        doc = json.loads(dumps_bundle(bundle))
        doc["format_version"] = 999
        with pytest.raises(VersionMismatch):
            loads_bundle(json.dumps(doc))

    def test_truncated(self, bundle, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(dumps_bundle(bundle)[:500])
        with pytest.raises(CorruptFile):
            load_bundle(path)

    def test_checksum(self, bundle):
        doc = json.loads(dumps_bundle(bundle))
        doc["payload"]["svr"]["bias"] += 1e-6
        with pytest.raises(CorruptFile):
            loads_bundle(json.dumps(doc))
