import math

import numpy as np
import pytest

from hsiselect import svm
from qp import exhaustive_dual, fixture_problems

XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([1, 1, 2, 2])


def blobs(seed=0, n=30, spread=0.35, classes=2, dim=2):
    rng = np.random.default_rng(seed)
    centers = rng.random((classes, dim)) * 4
    y = np.arange(n) % classes + 1
    x = centers[y - 1] + rng.normal(0, spread, (n, dim))
    return x, y


class TestKernel:
    def test_examples(self):
        assert svm.rbf_kernel([0.3, 2.0], [0.3, 2.0], 5.0) == 1.0
        assert svm.rbf_kernel([0.0, 0.0], [9.0, -4.0], 1e-300) == 1.0
        assert svm.rbf_kernel([0, 0], [1, 1], 0.5) == pytest.approx(0.367879, abs=1e-6)
        assert svm.rbf_kernel([0, 0], [1, 1], 0.5) == pytest.approx(math.exp(-1), abs=1e-15)

    def test_matrix_matches_pairwise(self, rng):
        a, b = rng.random((4, 3)), rng.random((5, 3))
        m = svm.rbf_matrix(a, b, 0.7)
        for i in range(4):
            for j in range(5):
                assert m[i, j] == pytest.approx(svm.rbf_kernel(a[i], b[j], 0.7), abs=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            svm.rbf_kernel([0, 1], [0, 1, 2], 1.0)
        with pytest.raises(ValueError):
            svm.rbf_matrix(np.zeros((2, 2)), np.zeros((2, 3)), 1.0)


class TestSmo:
    @pytest.mark.parametrize("idx", range(0, 21, 4))
    def test_matches_exhaustive_qp(self, idx):
        x, y, c, gamma = fixture_problems()[idx]
        k = svm.rbf_matrix(x, x, gamma)
        best, _ = exhaustive_dual(k, y, c)
        sol = svm.smo_binary(x, y, c, gamma, tol=1e-9)
        assert svm.dual_objective(sol.alpha, y, k) == pytest.approx(best, abs=1e-6)

    def test_kkt_at_convergence(self):
        x, y = blobs(3, n=40, spread=0.9)
        yy = np.where(y == 1, 1.0, -1.0)
        tol, c, gamma = 1e-3, 10.0, 1.0
        sol = svm.smo_binary(x, yy, c, gamma, tol=tol)
        f = svm.rbf_matrix(x, x, gamma) @ (sol.alpha * yy) + sol.bias
        margin = yy * f
        free = (sol.alpha > 0) & (sol.alpha < c)
        assert np.all(margin[sol.alpha == 0] >= 1 - tol)
        assert np.all(margin[sol.alpha == c] <= 1 + tol)
        assert np.all(np.abs(margin[free] - 1) <= tol)
        assert sol.gap <= tol

    def test_row_cache_matches_full_kernel(self, monkeypatch):
        x, y = blobs(4, n=50, spread=0.8)
        yy = np.where(y == 1, 1.0, -1.0)
        full = svm.smo_binary(x, yy, 5.0, 1.0, tol=1e-6)
        monkeypatch.setattr(svm, "FULL_KERNEL_LIMIT", 10)
        monkeypatch.setattr(svm, "ROW_CACHE_SIZE", 7)
        cached = svm.smo_binary(x, yy, 5.0, 1.0, tol=1e-6)
        # row arithmetic differs from the full matrix in the last ulp; both stop within tol
        assert np.allclose(full.alpha, cached.alpha, atol=1e-6)
        assert full.bias == pytest.approx(cached.bias, abs=1e-6)


class TestTrain:
    def test_two_singletons(self):
        x = np.array([[0.0, 0.0], [3.0, 3.0]])
        model = svm.train(x, [1, 2], svm.SvmParams(c=1e6, gamma=1.0))
        assert svm.predict(model, x).tolist() == [1, 2]
        f = model.machines[0].decision(model.scale(x), model.gamma)
        assert f[0] >= 1 - 1e-3 and f[1] <= -1 + 1e-3

    def test_xor(self):
        model = svm.train(XOR_X, XOR_Y, svm.SvmParams(c=100, gamma=1.0))
        assert svm.predict(model, XOR_X).tolist() == XOR_Y.tolist()

    def test_symmetric_tie_goes_to_lower_id(self):
        x = np.array([[-1.0, 0.0], [1.0, 0.0], [-1.0, 1.0], [1.0, 1.0]])
        model = svm.train(x, [1, 2, 1, 2])
        assert model.machines[0].bias == pytest.approx(0.0, abs=1e-12)
        assert svm.predict(model, np.array([0.0, 0.5])) == 1

    def test_three_class_one_hot(self):
        x = np.eye(3)
        model = svm.train(x, [1, 2, 3])
        assert svm.predict(model, x).tolist() == [1, 2, 3]
        assert len(model.machines) == 3

    def test_separable_training_points(self):
        x, y = blobs(1, n=24, spread=0.1, classes=3)
        model = svm.train(x, y)
        assert np.array_equal(svm.predict(model, x), y)
        assert svm.predict(model, x[5]) == y[5]

    def test_feasibility_and_determinism(self):
        x, y = blobs(2, n=45, spread=0.8, classes=3)
        a = svm.train(x, y)
        b = svm.train(x, y)
        svm.check_dual_feasibility(a)
        assert np.array_equal(svm.predict(a, x), svm.predict(b, x))
        for ma, mb in zip(a.machines, b.machines):
            assert np.array_equal(ma.coef, mb.coef) and ma.bias == mb.bias

    def test_scale_consistency(self):
        x, y = blobs(5, n=20, spread=0.5)
        x = x * [100.0, 0.01] + [5.0, -3.0]
        model = svm.train(x, y)
        xs = model.scale(x)
        assert xs.min() == pytest.approx(0.0) and xs.max() == pytest.approx(1.0)
        m = model.machines[0]
        yy = np.where(y == m.classes[0], 1.0, -1.0)
        f_raw = m.decision(model.scale(x), model.gamma)
        k = svm.rbf_matrix(xs, m.support, model.gamma)
        assert np.allclose(f_raw, k @ m.coef + m.bias)
        assert np.mean(np.sign(f_raw) == yy) > 0.9

    def test_default_gamma(self):
        xs = np.array([[0.0, 0.0], [1.0, 1.0]])
        assert svm.default_gamma(xs) == pytest.approx(1.0 / (2 * 0.25))
        model = svm.train(xs, [1, 2])
        assert model.gamma == pytest.approx(2.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            svm.train(np.zeros((3, 2)), [1, 1, 1])
        with pytest.raises(ValueError):
            svm.train(np.zeros((3, 2)), [1, 2])
        with pytest.raises(ValueError):
            svm.train(np.array([[np.nan], [1.0]]), [1, 2])
        with pytest.raises(ValueError):
            svm.SvmParams(c=0)
        with pytest.raises(ValueError):
            svm.SvmParams(gamma=-1.0)
        model = svm.train(XOR_X, XOR_Y)
        with pytest.raises(ValueError):
            svm.predict(model, np.zeros((2, 3)))


class TestGridSearch:
    def test_single_candidate(self):
        x, y = blobs(0)
        p = svm.grid_search(x, y, [3.0], [0.7])
        assert (p.c, p.gamma) == (3.0, 0.7)

    def test_separable_prefers_smallest_c(self):
        x, y = blobs(0, spread=0.05)
        p = svm.grid_search(x, y, [100.0, 1.0, 10.0], [1.0])
        assert p.c == 1.0

    def test_picks_cv_best_cell(self):
        x, y = blobs(8, n=60, spread=1.2)
        c_grid, g_grid = [0.1, 1.0, 100.0], [0.5, 5.0, 50.0]
        fold = svm.stratified_folds(y, 3, 0)
        scores = {}
        for c in c_grid:
            for g in g_grid:
                accs = []
                for f in range(3):
                    t = fold == f
                    m = svm.train(x[~t], y[~t], svm.SvmParams(c=c, gamma=g))
                    accs.append(np.mean(svm.predict(m, x[t]) == y[t]))
                scores[(c, g)] = np.mean(accs)
        best = max(scores.values())
        expected = min(k for k, v in scores.items() if v >= best - 1e-12)
        p = svm.grid_search(x, y, c_grid, g_grid, folds=3, seed=0)
        assert (p.c, p.gamma) == expected
        assert len(set(scores.values())) > 1

    def test_folds_are_stratified(self):
        y = np.array([1] * 9 + [2] * 6)
        fold = svm.stratified_folds(y, 3, 1)
        for f in range(3):
            assert np.sum((fold == f) & (y == 1)) == 3
            assert np.sum((fold == f) & (y == 2)) == 2
        with pytest.raises(ValueError):
            svm.grid_search(np.zeros((4, 1)), [1, 2, 1, 2], [1.0], [1.0], folds=1)


def test_model_round_trip(tmp_path):
    x, y = blobs(6, n=30, spread=0.7, classes=3)
    model = svm.train(x, y)
    path = tmp_path / "m.json"
    svm.save_model(model, path)
    loaded = svm.load_model(path)
    assert np.array_equal(svm.decision_votes(model, x), svm.decision_votes(loaded, x))
    for a, b in zip(model.machines, loaded.machines):
        assert np.array_equal(a.coef, b.coef) and a.bias == b.bias
    with pytest.raises(ValueError):
        svm.model_from_dict({"format": "other"})
