import numpy as np
import pytest

from facepipe.classify import (
    LinearModel,
    TrainConfig,
    hinge_subgradient,
    knn_predict,
    load_model,
    rank1_identification,
    save_model,
    svm_predict,
    svm_scores,
    train_linear_svm,
)
from facepipe.errors import (
    DegenerateLabelsError,
    FormatError,
    ParamError,
    ProtocolError,
    ShapeError,
    TruncationError,
)
from facepipe.metrics import accuracy_and_confusion


class TestTrainConfig:
    def test_defaults(self):
        c = TrainConfig()
        assert c.lam == 1e-4 and c.epochs == 50 and c.seed == 42

    @pytest.mark.parametrize("kwargs", [{"lam": 0.0}, {"epochs": 0}, {"seed": -1}])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ParamError):
            TrainConfig(**kwargs)


class TestTrainLinearSvm:
    def test_separable_blobs_high_accuracy(self, blobs):
        X, y = blobs(100, 3, 16, 6.0, seed=1)
        model = train_linear_svm(X, y, TrainConfig())
        pred = svm_scores(model, X).argmax(axis=1)
        assert accuracy_and_confusion(pred, y, 3).accuracy >= 99.0

    def test_single_class_rejected(self):
        X = np.random.default_rng(0).standard_normal((10, 4))
        with pytest.raises(DegenerateLabelsError):
            train_linear_svm(X, np.zeros(10, dtype=int), TrainConfig())

    def test_seeded_runs_bitwise_identical(self, blobs):
        X, y = blobs(30, 2, 8, 6.0, seed=2)
        m1 = train_linear_svm(X, y, TrainConfig(seed=7))
        m2 = train_linear_svm(X, y, TrainConfig(seed=7))
        assert m1.weights.tobytes() == m2.weights.tobytes()
        assert m1.biases.tobytes() == m2.biases.tobytes()

    def test_dimension_mismatch(self):
        X = np.zeros((4, 3))
        with pytest.raises(ShapeError):
            train_linear_svm(X, np.array([0, 1, 0]), TrainConfig())

    def test_objective_final_not_above_first(self, blobs):
        X, y = blobs(50, 3, 8, 6.0, seed=3)
        model = train_linear_svm(X, y, TrainConfig())
        hist = model.objective_history
        assert hist.shape == (3, 50)
        assert (hist[:, -1] <= hist[:, 0]).all()

    def test_scaled_data_with_rescaled_lambda_still_separates(self, blobs):
        X, y = blobs(100, 3, 16, 6.0, seed=4)
        c = 2.0
        base = train_linear_svm(X, y, TrainConfig(lam=1e-4))
        scaled = train_linear_svm(c * X, y, TrainConfig(lam=1e-4 * c * c))
        for model, data in ((base, X), (scaled, c * X)):
            pred = svm_scores(model, data).argmax(axis=1)
            assert accuracy_and_confusion(pred, y, 3).accuracy >= 99.0


class TestHingeSubgradient:
    def test_matches_finite_differences_away_from_kink(self):
        rng = np.random.default_rng(5)
        lam = 0.01
        h = 1e-6

        def objective(w, b, x, y):
            return 0.5 * lam * (w @ w + b * b) + max(0.0, 1.0 - y * (w @ x + b))

        checked = 0
        while checked < 50:
            w = rng.standard_normal(6)
            b = float(rng.standard_normal())
            x = rng.standard_normal(6)
            y = int(rng.choice([-1, 1]))
            if abs(y * (w @ x + b) - 1.0) < 1e-3:  # skip the kink
                continue
            gw, gb = hinge_subgradient(w, b, x, y, lam)
            for j in range(6):
                wp, wm = w.copy(), w.copy()
                wp[j] += h
                wm[j] -= h
                fd = (objective(wp, b, x, y) - objective(wm, b, x, y)) / (2 * h)
                assert abs(gw[j] - fd) / max(abs(fd), 1e-8) < 1e-4
            fd_b = (objective(w, b + h, x, y) - objective(w, b - h, x, y)) / (2 * h)
            assert abs(gb - fd_b) / max(abs(fd_b), 1e-8) < 1e-4
            checked += 1


class TestSvmPredict:
    def test_bias_only_decision(self):
        model = LinearModel(weights=np.zeros((2, 3)), biases=np.array([0.1, 0.2]))
        label, scores = svm_predict(model, np.zeros(3))
        assert label == 1
        np.testing.assert_allclose(scores, [0.1, 0.2])

    def test_all_zero_model_tie_breaks_to_zero(self):
        model = LinearModel(weights=np.zeros((3, 2)), biases=np.zeros(3))
        label, _ = svm_predict(model, np.ones(2))
        assert label == 0

    def test_trained_prototype_recovered(self, blobs):
        X, y = blobs(100, 3, 16, 6.0, seed=6)
        model = train_linear_svm(X, y, TrainConfig())
        proto = np.zeros(16)
        proto[1] = 6.0  # class-1 mean
        label, _ = svm_predict(model, proto)
        assert label == 1

    def test_length_mismatch(self):
        model = LinearModel(weights=np.zeros((2, 3)), biases=np.zeros(2))
        with pytest.raises(ShapeError):
            svm_predict(model, np.zeros(4))


class TestModelSerialization:
    def test_roundtrip(self, tmp_path, blobs):
        X, y = blobs(20, 3, 5, 6.0, seed=8)
        model = train_linear_svm(X, y, TrainConfig(epochs=5))
        p = tmp_path / "m.lsvm"
        save_model(model, p)
        back = load_model(p)
        assert back.classes == 3 and back.dim == 5
        np.testing.assert_array_equal(
            back.weights, model.weights.astype(np.float32).astype(np.float64)
        )
        np.testing.assert_array_equal(
            back.biases, model.biases.astype(np.float32).astype(np.float64)
        )

    def test_save_deterministic(self, tmp_path):
        model = LinearModel(weights=np.ones((2, 2)), biases=np.zeros(2))
        a, b = tmp_path / "a", tmp_path / "b"
        save_model(model, a)
        save_model(model, b)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.lsvm"
        p.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(FormatError):
            load_model(p)

    def test_truncated(self, tmp_path):
        model = LinearModel(weights=np.ones((2, 2)), biases=np.zeros(2))
        p = tmp_path / "t.lsvm"
        save_model(model, p)
        p.write_bytes(p.read_bytes()[:-3])
        with pytest.raises(TruncationError):
            load_model(p)


class TestKnn:
    def test_exact_lookup_k1(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((20, 4))
        y = rng.integers(0, 3, size=20)
        for i in (0, 7, 19):
            assert knn_predict(X, y, X[i], 1) == y[i]

    def test_majority_vote(self):
        X = np.array([[0.0], [0.1], [0.2], [5.0]])
        y = np.array([1, 1, 2, 2])
        assert knn_predict(X, y, np.array([0.0]), 3) == 1

    def test_full_tie_lowest_label(self):
        X = np.array([[1.0], [-1.0], [2.0], [-2.0]])
        y = np.array([0, 1, 0, 1])
        assert knn_predict(X, y, np.array([0.0]), 4) == 0

    def test_distance_tie_lower_index(self):
        X = np.array([[1.0], [-1.0]])
        y = np.array([1, 0])
        assert knn_predict(X, y, np.array([0.0]), 1) == 1

    def test_k_too_large(self):
        with pytest.raises(ParamError):
            knn_predict(np.zeros((3, 2)), np.array([0, 1, 0]), np.zeros(2), 4)


def tight_subjects(n_subjects, per_subject, dim, seed, spread=0.01):
    rng = np.random.default_rng(seed)
    centers = 10 * rng.standard_normal((n_subjects, dim))
    return [
        centers[s] + spread * rng.standard_normal((per_subject, dim))
        for s in range(n_subjects)
    ]


class TestRank1:
    def test_identical_within_subject_is_perfect(self):
        subs = [np.tile(v, (3, 1)) for v in np.eye(4)]
        report = rank1_identification(subs, repetitions=10, seed=0)
        assert report.mean_std == (100.0, 0.0)
        assert report.accuracy == 100.0

    def test_tight_clusters_perfect(self):
        report = rank1_identification(tight_subjects(6, 4, 16, seed=1), repetitions=10, seed=5)
        assert report.mean_std == (100.0, 0.0)

    def test_single_repetition_zero_std(self):
        subs = tight_subjects(4, 3, 8, seed=2, spread=2.0)
        report = rank1_identification(subs, repetitions=1, seed=3)
        assert report.mean_std[1] == 0.0

    def test_chance_level_for_random_embeddings(self):
        rng = np.random.default_rng(12)
        subs = [rng.standard_normal((5, 32)) for _ in range(10)]
        report = rank1_identification(subs, repetitions=100, seed=4)
        assert abs(report.mean_std[0] - 10.0) <= 5.0

    def test_subject_with_one_embedding_rejected(self):
        subs = [np.zeros((2, 4)), np.ones((1, 4))]
        with pytest.raises(ProtocolError):
            rank1_identification(subs, repetitions=2, seed=0)

    def test_needs_two_subjects(self):
        with pytest.raises(ProtocolError):
            rank1_identification([np.zeros((2, 4))], repetitions=2, seed=0)

    def test_confusion_total_matches_probe_count(self):
        subs = tight_subjects(5, 4, 8, seed=6)
        reps = 7
        report = rank1_identification(subs, repetitions=reps, seed=8)
        assert report.n == reps * 5 * 3  # (per_subject - 1) probes per subject
