import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from silo_dp import _backend
from silo_dp.core_math import sigmoid
from silo_dp.errors import ConfigurationError, DimensionError
from silo_dp.evaluation import auc
from silo_dp.gbdt import Forest, GbdtParams, canonical_orders, fit_gbdt, logistic_loss

BACKENDS = sorted(_backend.BACKENDS)


def brute_force_stump(F, g, h, lam, mcw):
    """Best single split by enumerating every feature and midpoint."""
    G, H = g.sum(), h.sum()
    best = (0.0, None, None)
    for f in range(F.shape[1]):
        vals = np.unique(F[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = (lo + hi) / 2
            if not thr > lo:
                thr = hi
            mask = F[:, f] < thr
            GL, HL = g[mask].sum(), h[mask].sum()
            GR, HR = G - GL, H - HL
            if HL < mcw or HR < mcw:
                continue
            gain = GL**2 / (HL + lam) + GR**2 / (HR + lam) - G**2 / (H + lam)
            if gain > best[0] + 1e-9:
                best = (gain, f, thr)
    return best


def random_problem(rng, n=200, k=4, discrete=False):
    F = rng.integers(0, 6, (n, k)).astype(float) if discrete else rng.random((n, k))
    y = (rng.random(n) < sigmoid(3 * (F[:, 0] - F[:, -1]) + 0.5)).astype(float)
    return F, y


class TestParams:
    def test_defaults(self):
        p = GbdtParams()
        assert (p.n_rounds, p.max_depth, p.learning_rate, p.min_child_weight) == (100, 6, 0.3, 1.0)

    def test_invalid(self):
        for kw in [{"learning_rate": 0}, {"learning_rate": 1.5}, {"max_depth": 0}, {"min_child_weight": -1}]:
            with pytest.raises(ConfigurationError):
                GbdtParams(**kw)


@pytest.mark.parametrize("backend", BACKENDS)
class TestFit:
    def test_stump_matches_brute_force(self, backend):
        rng = np.random.default_rng(0)
        for trial in range(10):
            F, y = random_problem(rng, n=60, k=3, discrete=trial % 2 == 0)
            base = np.log(y.mean() / (1 - y.mean()))
            p = sigmoid(np.full(len(y), base))
            gain, f, thr = brute_force_stump(F, p - y, p * (1 - p), 1.0, 1.0)
            tree = fit_gbdt(F, y, GbdtParams(n_rounds=1, max_depth=1), backend=backend).trees[0]
            if f is None:
                assert tree.feature[0] == -1
            else:
                assert (tree.feature[0], tree.threshold[0]) == (f, thr)

    def test_leaf_values_are_newton_steps(self, backend):
        rng = np.random.default_rng(1)
        F, y = random_problem(rng)
        forest = fit_gbdt(F, y, GbdtParams(n_rounds=1, max_depth=3), backend=backend)
        tree = forest.trees[0]
        p = sigmoid(np.full(len(y), forest.base_score))
        g, h = p - y, p * (1 - p)
        leaves = tree.apply(F)
        for leaf in np.unique(leaves):
            rows = leaves == leaf
            assert tree.value[leaf] == pytest.approx(-g[rows].sum() / (h[rows].sum() + 1.0), rel=1e-12)

    def test_loss_non_increasing_per_round(self, backend):
        rng = np.random.default_rng(2)
        F, y = random_problem(rng, n=300, k=5)
        forest = fit_gbdt(F, y, GbdtParams(n_rounds=40), backend=backend)
        margin = np.full(len(y), forest.base_score)
        losses = [logistic_loss(margin, y)]
        for tree in forest.trees:
            margin = margin + forest.learning_rate * tree.value[tree.apply(F)]
            losses.append(logistic_loss(margin, y))
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_label_column_is_learned(self, backend):
        rng = np.random.default_rng(3)
        y = (rng.random(200) < 0.3).astype(float)
        F = np.column_stack([rng.random(200), y, rng.random(200)])
        forest = fit_gbdt(F, y, backend=backend)
        assert auc(forest.predict_proba(F), y) >= 0.99

    def test_zero_rounds_is_base_rate(self, backend):
        rng = np.random.default_rng(4)
        F, y = random_problem(rng)
        forest = fit_gbdt(F, y, GbdtParams(n_rounds=0), backend=backend)
        np.testing.assert_allclose(forest.predict_proba(F), y.mean(), rtol=1e-12)

    def test_row_permutation_invariance(self, backend):
        rng = np.random.default_rng(5)
        F, y = random_problem(rng, n=150, discrete=True)
        a = fit_gbdt(F, y, GbdtParams(n_rounds=15), backend=backend)
        perm = rng.permutation(len(y))
        b = fit_gbdt(F[perm], y[perm], GbdtParams(n_rounds=15), backend=backend)
        assert a.same_as(b)

    def test_prediction_reproduces_training_margin(self, backend):
        rng = np.random.default_rng(6)
        F, y = random_problem(rng)
        forest = fit_gbdt(F, y, GbdtParams(n_rounds=25), backend=backend)
        assert np.array_equal(forest.margin(F), forest.train_margin)


class TestEdgeCases:
    def test_single_class_warns(self):
        F = np.random.default_rng(0).random((20, 2))
        with pytest.warns(UserWarning):
            forest = fit_gbdt(F, np.ones(20))
        assert forest.warnings and np.all(forest.predict_proba(F) == forest.predict_proba(F)[0])

    def test_dimension_checks(self):
        forest = fit_gbdt(np.random.default_rng(0).random((20, 2)), np.arange(20) % 2)
        with pytest.raises(DimensionError):
            forest.margin(np.zeros((3, 5)))
        with pytest.raises(DimensionError):
            fit_gbdt(np.zeros((3, 2)), np.zeros(4))

    def test_round_trip(self):
        rng = np.random.default_rng(7)
        F, y = random_problem(rng)
        forest = fit_gbdt(F, y, GbdtParams(n_rounds=5))
        back = Forest.from_dict(forest.to_dict())
        assert back.same_as(forest) and np.array_equal(back.margin(F), forest.margin(F))

    @given(st.integers(2, 40), st.integers(1, 4), st.integers(0, 2**31))
    def test_canonical_orders_sort_each_feature(self, n, k, seed):
        rng = np.random.default_rng(seed)
        F = rng.integers(0, 3, (n, k)).astype(float)
        y = rng.integers(0, 2, n).astype(float)
        orders = canonical_orders(F, y)
        for j in range(k):
            assert np.all(np.diff(F[orders[j], j]) >= 0)
            assert sorted(orders[j].tolist()) == list(range(n))


@pytest.mark.skipif("compiled" not in _backend.BACKENDS, reason="extension not built")
class TestBackendsAgree:
    def test_bit_identical_forests(self):
        rng = np.random.default_rng(8)
        for trial in range(6):
            F, y = random_problem(rng, n=int(rng.integers(20, 400)), k=int(rng.integers(1, 7)), discrete=trial % 2 == 1)
            params = GbdtParams(n_rounds=10, max_depth=int(rng.integers(1, 7)))
            a = fit_gbdt(F, y, params, backend="compiled")
            b = fit_gbdt(F, y, params, backend="python")
            assert a.same_as(b)
            assert np.array_equal(a.train_margin, b.train_margin)
