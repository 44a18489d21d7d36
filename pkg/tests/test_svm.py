"""Kernel machine training, online updates, and model selection."""

import logging
import math

import numpy as np
import pytest
from scipy.optimize import linprog
from sklearn.metrics import f1_score
from sklearn.svm import SVC

from marketburst.select import ColumnNormalizer
from marketburst.svm import (ConvergenceError, CvResult, KernelClassifier,
                             KernelSpec, ModelBundle, _positive_f1,
                             cross_validate, kernel_matrix, load_model,
                             online_update, save_model, stratified_folds,
                             train)

GAUSS = KernelSpec(kind="gaussian", width=1.5)


def blobs(seed=0, n=30, gap=1.0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-gap, 1.0, (n, 2)), rng.normal(gap, 1.0, (n, 2))])
    y = np.array([0] * n + [1] * n)
    return X, y


XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([1, 1, 0, 0])


class TestKernelSpec:
    def test_validation(self):
        with pytest.raises(ValueError, match="unknown kernel kind"):
            KernelSpec(kind="sigmoid")
        with pytest.raises(ValueError, match="degree"):
            KernelSpec(kind="poly", degree=0)
        with pytest.raises(ValueError, match="width"):
            KernelSpec(kind="gaussian", width=0.0)

    def test_complexity_ordering(self):
        linear = KernelSpec(kind="linear")
        poly2 = KernelSpec(kind="poly", degree=2)
        poly5 = KernelSpec(kind="poly", degree=5)
        assert (linear.complexity_rank < poly2.complexity_rank
                < poly5.complexity_rank < GAUSS.complexity_rank)

    def test_str_forms(self):
        assert str(KernelSpec(kind="linear")) == "linear"
        assert str(KernelSpec(kind="poly", degree=2)) == "poly2"
        assert str(KernelSpec(kind="gaussian", width=0.5)) == "gaussian(0.5)"

    def test_dict_round_trip(self):
        spec = KernelSpec(kind="poly", degree=4, coef0=2.0)
        assert KernelSpec.from_dict(spec.to_dict()) == spec


class TestKernelMatrix:
    def setup_method(self):
        rng = np.random.default_rng(1)
        self.A = rng.normal(size=(5, 3))
        self.B = rng.normal(size=(4, 3))

    def check(self, spec, pointwise):
        K = kernel_matrix(spec, self.A, self.B)
        assert K.shape == (5, 4)
        for i in range(5):
            for j in range(4):
                assert K[i, j] == pytest.approx(
                    pointwise(self.A[i], self.B[j]), rel=1e-12, abs=1e-12)

    def test_linear(self):
        self.check(KernelSpec(kind="linear"), lambda a, b: float(a @ b))

    def test_poly(self):
        spec = KernelSpec(kind="poly", degree=3, coef0=2.0)
        self.check(spec, lambda a, b: (float(a @ b) + 2.0) ** 3)

    def test_gaussian(self):
        w = 0.8
        spec = KernelSpec(kind="gaussian", width=w)
        self.check(spec, lambda a, b: math.exp(
            -float(((a - b) ** 2).sum()) / (2 * w * w)))

    def test_gaussian_self_gram(self):
        K = kernel_matrix(GAUSS, self.A, self.A)
        assert np.allclose(np.diag(K), 1.0)
        assert np.allclose(K, K.T)
        assert np.all(K > 0) and np.all(K <= 1.0)


class TestTraining:
    def test_separable_data_fit(self):
        X, y = blobs(seed=2, gap=3.0)
        model = train(X, y, KernelSpec(kind="linear"), c=1.0, tol=1e-4)
        assert np.array_equal(model.predict(X), y)
        assert model.kkt_max_residual() <= 1e-3

    def test_dual_objective_matches_reference_solver(self):
        X, y = blobs(seed=0)
        model = train(X, y, GAUSS, c=2.0, tol=1e-4)
        assert model.kkt_max_residual() <= 1e-3

        K = kernel_matrix(GAUSS, X, X)
        t = 2.0 * y - 1.0

        def objective(alphas):
            return alphas.sum() - 0.5 * (alphas * t) @ K @ (alphas * t)

        sk = SVC(kernel="rbf", gamma=1.0 / (2 * 1.5 ** 2), C=2.0,
                 tol=1e-6).fit(X, y)
        a_sk = np.zeros(len(y))
        a_sk[sk.support_] = np.abs(sk.dual_coef_[0])
        ours, theirs = objective(model.alphas), objective(a_sk)
        assert ours == pytest.approx(theirs, rel=1e-6)
        assert np.max(np.abs(model.decision_function(X)
                             - sk.decision_function(X))) < 5e-3

    def test_class_weights_scale_boxes(self):
        X, y = blobs(seed=3, gap=0.5)
        model = train(X, y, GAUSS, c=1.0, class_weights={0: 1.0, 1: 4.0})
        boxes = model.boxes
        assert np.all(boxes[y == 0] == 1.0)
        assert np.all(boxes[y == 1] == 4.0)
        assert np.all(model.alphas <= boxes + 1e-9)
        assert np.all(model.alphas >= -1e-12)

    def test_validation(self):
        X, y = blobs(seed=4)
        with pytest.raises(ValueError, match="row counts"):
            train(X[:-1], y, GAUSS, c=1.0)
        with pytest.raises(ValueError, match="C must be positive"):
            train(X, y, GAUSS, c=0.0)
        with pytest.raises(ValueError, match="class weight"):
            train(X, y, GAUSS, c=1.0, class_weights={0: 0.0, 1: 1.0})
        with pytest.raises(ValueError, match="warm start"):
            train(X, y, GAUSS, c=1.0, warm_start=(np.zeros(3), 0.0))

    def test_sweep_budget_enforced(self):
        X, y = blobs(seed=0)
        with pytest.raises(ConvergenceError, match="no KKT convergence"):
            train(X, y, GAUSS, c=10.0, tol=1e-5, max_sweeps=1)

    def test_deterministic_given_seed(self):
        X, y = blobs(seed=5, gap=0.8)
        a = train(X, y, GAUSS, c=2.0, seed=7)
        b = train(X, y, GAUSS, c=2.0, seed=7)
        assert np.array_equal(a.alphas, b.alphas) and a.bias == b.bias


class TestXor:
    def test_quadratic_kernel_solves_it(self):
        spec = KernelSpec(kind="poly", degree=2, coef0=1.0)
        model = train(XOR_X, XOR_Y, spec, c=10.0, tol=1e-4)
        assert np.array_equal(model.predict(XOR_X), XOR_Y)
        assert model.kkt_max_residual() <= 1e-3

    def test_linear_kernel_cannot(self):
        model = train(XOR_X, XOR_Y, KernelSpec(kind="linear"), c=10.0)
        assert (model.predict(XOR_X) == XOR_Y).mean() < 1.0

    def test_no_separating_hyperplane_exists(self):
        # feasibility LP for t_i (w . x_i + b) >= 1; any strictly
        # separating plane could be rescaled to satisfy it
        t = 2.0 * XOR_Y - 1.0
        A_ub = np.column_stack([-t[:, None] * XOR_X, -t])
        res = linprog(c=[0.0, 0.0, 0.0], A_ub=A_ub, b_ub=-np.ones(4),
                      bounds=[(None, None)] * 3, method="highs")
        assert res.status == 2          # infeasible


class TestOnlineUpdates:
    def test_matches_batch_training(self):
        X, y = blobs(seed=0)
        rng = np.random.default_rng(9)
        order = rng.permutation(len(y))
        Xs, ys = X[order], y[order]
        batch = train(Xs, ys, GAUSS, c=2.0, tol=1e-4)
        online = train(Xs[:40], ys[:40], GAUSS, c=2.0, tol=1e-4)
        for i in range(40, len(ys)):
            online = online_update(online, Xs[i], int(ys[i]))
        assert online.kkt_max_residual() <= 1e-3
        assert len(online.alphas) == len(ys)
        probes = rng.normal(0.0, 1.5, (500, 2))
        da = batch.decision_function(probes)
        do = online.decision_function(probes)
        assert np.max(np.abs(da - do)) < 2e-3
        assert np.array_equal(da >= 0, do >= 0)

    def test_validation(self):
        X, y = blobs(seed=6)
        model = train(X, y, GAUSS, c=1.0)
        with pytest.raises(ValueError, match="0/1 label"):
            online_update(model, X[0], -1)
        with pytest.raises(ValueError, match="dimension mismatch"):
            online_update(model, np.zeros(5), 1)


class TestPositiveF1:
    def test_matches_sklearn(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            n = int(rng.integers(5, 60))
            y_true = rng.integers(0, 2, n)
            y_pred = rng.integers(0, 2, n)
            want = f1_score(y_true, y_pred, pos_label=1, zero_division=0)
            assert _positive_f1(y_true, y_pred) == pytest.approx(want)

    def test_no_true_positives(self):
        assert _positive_f1(np.array([1, 1]), np.array([0, 0])) == 0.0


class TestStratifiedFolds:
    def test_partition_and_balance(self):
        rng = np.random.default_rng(11)
        y = np.array([0] * 17 + [1] * 8)
        folds = stratified_folds(y, 4, rng)
        all_idx = np.sort(np.concatenate(folds))
        assert np.array_equal(all_idx, np.arange(len(y)))
        for cls in (0, 1):
            per_fold = [int((y[f] == cls).sum()) for f in folds]
            assert max(per_fold) - min(per_fold) <= 1

    def test_seed_determinism(self):
        y = np.array([0, 1] * 20)
        a = stratified_folds(y, 3, np.random.default_rng(5))
        b = stratified_folds(y, 3, np.random.default_rng(5))
        assert all(np.array_equal(x, z) for x, z in zip(a, b))


class TestCrossValidate:
    def test_ties_prefer_small_c_then_simple_kernel(self):
        X, y = blobs(seed=12, gap=4.0)        # everything scores 1.0
        result = cross_validate(
            X, y, folds=3,
            kernels=[GAUSS, KernelSpec(kind="poly", degree=2),
                     KernelSpec(kind="linear")],
            c_grid=[10.0, 1.0], weight_grid=[5.0, 1.0],
        )
        assert result.mean_f1 == pytest.approx(1.0)
        assert result.kernel.kind == "linear"
        assert result.c == 1.0 and result.positive_weight == 1.0
        assert len(result.table) == 12

    def test_fold_reduction_warns(self, caplog):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(15, 2))
        X[12:] += 4.0
        y = np.array([0] * 12 + [1] * 3)
        with caplog.at_level(logging.WARNING, logger="marketburst.svm"):
            result = cross_validate(X, y, folds=5,
                                    kernels=[KernelSpec(kind="linear")],
                                    c_grid=[1.0], weight_grid=[1.0])
        assert result.folds == 3
        assert any("reducing folds" in r.message for r in caplog.records)

    def test_validation(self):
        X, y = blobs(seed=14)
        with pytest.raises(ValueError, match="at least 2 folds"):
            cross_validate(X, y, folds=1, kernels=[GAUSS],
                           c_grid=[1.0], weight_grid=[1.0])
        tiny_y = np.array([0] * 10 + [1])
        with pytest.raises(ValueError, match="2 samples of each class"):
            cross_validate(np.zeros((11, 2)), tiny_y, folds=2,
                           kernels=[GAUSS], c_grid=[1.0], weight_grid=[1.0])


class TestSerialization:
    def test_classifier_dict_round_trip(self):
        X, y = blobs(seed=15, gap=0.8)
        model = train(X, y, GAUSS, c=2.0, class_weights={0: 1.0, 1: 3.0})
        back = KernelClassifier.from_dict(model.to_dict())
        assert back.spec == model.spec
        assert back.class_weights == model.class_weights
        assert np.array_equal(back.alphas, model.alphas)
        probes = np.random.default_rng(16).normal(size=(20, 2))
        assert np.array_equal(back.decision_function(probes),
                              model.decision_function(probes))

    def make_bundle(self, seed=17):
        rng = np.random.default_rng(seed)
        raw = rng.normal(size=(60, 5))
        raw[:, 3] = 2.0                        # dropped by the normalizer
        y = (raw[:, 0] + 0.1 * rng.normal(size=60) > 0).astype(int)
        norm = ColumnNormalizer().fit(raw)
        selected = np.array([0, 1], dtype=np.int64)
        Z = norm.transform(raw)[:, selected]
        clf = train(Z, y, GAUSS, c=2.0)
        bundle = ModelBundle(norm, selected, clf, meta={"note": "test"})
        return bundle, raw, y

    def test_bundle_reduces_and_predicts(self):
        bundle, raw, y = self.make_bundle()
        preds = bundle.predict_raw(raw)
        assert preds.shape == (60,)
        assert (preds == y).mean() > 0.9

    def test_bundle_file_round_trip(self, tmp_path):
        bundle, raw, _ = self.make_bundle()
        path = tmp_path / "model.json"
        save_model(path, bundle)
        back = load_model(path)
        assert np.array_equal(back.selected, bundle.selected)
        assert back.meta == bundle.meta
        assert np.array_equal(back.decision_raw(raw), bundle.decision_raw(raw))

    def test_bundle_online_update_grows_pool(self):
        bundle, raw, y = self.make_bundle()
        before = len(bundle.classifier.alphas)
        updated = bundle.updated(raw[0], int(y[0]))
        assert len(updated.classifier.alphas) == before + 1
        assert updated.meta == bundle.meta
        assert len(bundle.classifier.alphas) == before    # original untouched
