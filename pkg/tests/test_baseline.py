import numpy as np
import pytest

from fairproj.baseline import (
    LinearModel,
    fit_group_model,
    fit_logreg,
    load_model,
    loss_and_grad,
    predict_proba,
    save_model,
)
from fairproj.exceptions import InvalidModelError
from fairproj.metrics import decide


def blobs(rng, n, sep=4.0):
    labels = rng.integers(0, 2, size=n)
    x = rng.normal(size=(n, 2)) + sep * (labels[:, None] - 0.5) * np.array([1.0, -1.0])
    return x, labels


class TestFitLogreg:
    def test_separable_accuracy(self):
        rng = np.random.default_rng(0)
        x, labels = blobs(rng, 200)
        model = fit_logreg(x, labels)
        acc = float(np.mean(decide(predict_proba(model, x)) == labels))
        assert acc >= 0.99

    def test_l2_shrinks_weights(self):
        rng = np.random.default_rng(1)
        x, labels = blobs(rng, 200)
        norms = []
        for l2 in (1e-4, 0.01, 0.1, 1.0, 10.0):
            model = fit_logreg(x, labels, l2=l2, lr=0.05, epochs=800)
            norms.append(float(np.linalg.norm(model.weights[:-1])))
        assert all(b <= a + 1e-9 for a, b in zip(norms, norms[1:]))
        assert norms[-1] < 0.1

    def test_mean_prediction_matches_frequencies(self):
        # stationarity of the unpenalized bias row
        rng = np.random.default_rng(2)
        x = rng.normal(size=(90, 2))
        labels = rng.integers(0, 3, size=90)
        model = fit_logreg(x, labels, num_classes=3, lr=0.2, epochs=4000)
        assert model.final_grad_norm < 1e-4
        freq = np.bincount(labels, minlength=3) / labels.size
        np.testing.assert_allclose(predict_proba(model, x).mean(axis=0), freq, atol=1e-3)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        n, d, c = 5, 3, 3
        xa = np.hstack([rng.normal(size=(n, d)), np.ones((n, 1))])
        onehot = np.zeros((n, c))
        onehot[np.arange(n), rng.integers(0, c, size=n)] = 1.0
        w = rng.normal(scale=0.5, size=(d + 1, c))
        _, grad = loss_and_grad(w, xa, onehot, l2=0.1)
        numeric = np.zeros_like(w)
        h = 1e-6
        for i in range(d + 1):
            for j in range(c):
                wp, wm = w.copy(), w.copy()
                wp[i, j] += h
                wm[i, j] -= h
                lp, _ = loss_and_grad(wp, xa, onehot, l2=0.1)
                lm, _ = loss_and_grad(wm, xa, onehot, l2=0.1)
                numeric[i, j] = (lp - lm) / (2.0 * h)
        assert np.linalg.norm(grad - numeric) <= 1e-5 * max(1.0, np.linalg.norm(grad))

    def test_zero_weights_predict_uniform(self):
        model = LinearModel(
            weights=np.zeros((3, 4)), feature_mean=np.zeros(2), feature_std=np.ones(2)
        )
        np.testing.assert_allclose(predict_proba(model, np.random.default_rng(4).normal(size=(5, 2))), 0.25)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(5)
        x, labels = blobs(rng, 100)
        probs = predict_proba(fit_logreg(x, labels), rng.normal(size=(40, 2)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert (probs > 0.0).all()

    def test_zero_variance_column_dropped(self):
        rng = np.random.default_rng(6)
        x, labels = blobs(rng, 120)
        x = np.hstack([x, np.full((120, 1), 7.0)])
        with pytest.warns(UserWarning, match="zero-variance"):
            model = fit_logreg(x, labels)
        assert model.dropped == (2,)
        assert np.all(model.weights[2] == 0.0)
        # the constant column carries no signal at predict time either
        x2 = x.copy()
        x2[:, 2] = -3.0
        np.testing.assert_allclose(predict_proba(model, x2), predict_proba(model, x), atol=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        x, labels = blobs(rng, 80)
        m1 = fit_logreg(x, labels, seed=0)
        m2 = fit_logreg(x, labels, seed=99)
        assert np.array_equal(m1.weights, m2.weights)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            fit_logreg(np.zeros((4, 2)), np.zeros(3, dtype=int))
        with pytest.raises(ValueError):
            fit_logreg(np.zeros((4, 2)), np.zeros(4, dtype=int), lr=0.0)

    def test_feature_width_checked(self):
        rng = np.random.default_rng(8)
        x, labels = blobs(rng, 50)
        model = fit_logreg(x, labels)
        with pytest.raises(InvalidModelError):
            predict_proba(model, rng.normal(size=(5, 3)))


class TestGroupModel:
    def test_independent_groups_recover_marginals(self):
        rng = np.random.default_rng(9)
        n = 10_000
        x = rng.normal(size=(n, 2))
        labels = rng.integers(0, 2, size=n)
        groups = (rng.random(n) < 0.7).astype(int)
        gp = fit_group_model(x, labels, groups)
        member = gp.membership(x[:500])
        np.testing.assert_allclose(member.mean(axis=0), [[0.3, 0.3], [0.7, 0.7]], atol=0.05)

    def test_deterministic_feature_recovered(self):
        rng = np.random.default_rng(10)
        n = 400
        x = rng.normal(size=(n, 2))
        groups = (x[:, 0] > 0.0).astype(int)
        labels = rng.integers(0, 2, size=n)
        gp = fit_group_model(x, labels, groups)
        member = gp.membership(x)
        hard = member[:, :, 0].argmax(axis=1)
        assert float(np.mean(hard == groups)) >= 0.99

    def test_membership_slices_are_distributions(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(30, 2))
        labels = rng.integers(0, 3, size=30)
        groups = rng.integers(0, 2, size=30)
        member = fit_group_model(x, labels, groups, num_classes=3).membership(x)
        assert member.shape == (30, 2, 3)
        np.testing.assert_allclose(member.sum(axis=1), 1.0, atol=1e-12)
        assert (member >= 0.0).all()


class TestSerialization:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(12)
        x, labels = blobs(rng, 60)
        model = fit_logreg(x, labels)
        path = tmp_path / "model.txt"
        save_model(model, str(path))
        loaded = load_model(str(path))
        assert np.array_equal(loaded.weights, model.weights)
        assert np.array_equal(loaded.feature_mean, model.feature_mean)
        assert np.array_equal(loaded.feature_std, model.feature_std)
        probe = rng.normal(size=(10, 2))
        assert np.array_equal(predict_proba(loaded, probe), predict_proba(model, probe))

    def test_bad_header(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("linmodel v0\n1 2\n0 0\n0 0\n0\n1\n")
        with pytest.raises(InvalidModelError, match="header"):
            load_model(str(path))

    def test_truncated(self, tmp_path):
        rng = np.random.default_rng(13)
        x, labels = blobs(rng, 40)
        path = tmp_path / "model.txt"
        save_model(fit_logreg(x, labels), str(path))
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(InvalidModelError, match="truncated"):
            load_model(str(path))

    def test_malformed_number(self, tmp_path):
        rng = np.random.default_rng(14)
        x, labels = blobs(rng, 40)
        path = tmp_path / "model.txt"
        save_model(fit_logreg(x, labels), str(path))
        lines = path.read_text().splitlines()
        lines[2] = lines[2].replace(lines[2].split()[0], "abc", 1)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(InvalidModelError, match="malformed"):
            load_model(str(path))
