import numpy as np
import pytest

import miselect as ms
from miselect.errors import ConfigError, ConsistencyError, DivergenceError
from miselect.logreg import loss_and_gradient


def _blobs(n_per_class=40, classes=2, dim=2, sep=6.0, seed=0):
    spec = ms.SyntheticSpec.separated(classes, n_per_class, dim, sep, 0.7, seed)
    ds = ms.generate_synthetic(spec)
    return ms.EmbeddedDataset.from_points(ds.features, ds.labels)


def test_separable_blobs_reach_perfect_training_accuracy():
    emb = _blobs()
    model = ms.train(emb, cfg=ms.TrainConfig(epochs=200))
    preds = np.argmax(ms.predict_proba(model, emb.points), axis=1)
    assert (preds == emb.labels).mean() == 1.0


def test_single_sample_memorized():
    emb = ms.EmbeddedDataset.from_points(np.array([[0.6, -0.8]]), [1], num_classes=3)
    model = ms.train(emb, cfg=ms.TrainConfig(epochs=300))
    cls, probs = ms.predict(model, np.array([0.6, -0.8]))
    assert cls == 1
    assert probs[1] > 0.9


def test_gradient_matches_central_finite_differences():
    rng = np.random.default_rng(3)
    x = np.hstack([rng.standard_normal((5, 3)), np.ones((5, 1))])
    labels = np.array([0, 2, 1, 2, 0])
    w = rng.standard_normal((3, 4)) * 0.5
    _, grad = loss_and_gradient(w, x, labels, l2=0.01)
    eps = 1e-6
    for i in range(w.shape[0]):
        for j in range(w.shape[1]):
            wp, wm = w.copy(), w.copy()
            wp[i, j] += eps
            wm[i, j] -= eps
            lp, _ = loss_and_gradient(wp, x, labels, l2=0.01)
            lm, _ = loss_and_gradient(wm, x, labels, l2=0.01)
            numeric = (lp - lm) / (2 * eps)
            denom = max(abs(numeric), abs(grad[i, j]), 1e-8)
            assert abs(grad[i, j] - numeric) / denom < 1e-5


def test_zero_weights_uniform_prediction():
    model = ms.LogRegModel(weights=np.zeros((4, 3)), num_classes=4, input_dim=2)
    cls, probs = ms.predict(model, np.array([1.0, -2.0]))
    assert cls == 0  # tie resolves to the lowest class id
    assert np.allclose(probs, 0.25, atol=1e-15)


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(4)
    model = ms.LogRegModel(weights=rng.standard_normal((5, 4)), num_classes=5, input_dim=3)
    probs = ms.predict_proba(model, rng.standard_normal((20, 3)))
    assert np.all(np.abs(probs.sum(axis=1) - 1.0) < 1e-12)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(5)
    w = rng.standard_normal((3, 4))
    model_a = ms.LogRegModel(weights=w, num_classes=3, input_dim=3)
    shift = rng.standard_normal(4)
    model_b = ms.LogRegModel(weights=w + shift, num_classes=3, input_dim=3)
    x = rng.standard_normal(3)
    _, pa = ms.predict(model_a, x)
    _, pb = ms.predict(model_b, x)
    assert np.all(np.abs(pa - pb) < 1e-12)


def test_evaluate_counting_and_confusion():
    emb = _blobs(n_per_class=25, classes=4, dim=4)
    # constant model always predicts class 0
    model = ms.LogRegModel(weights=np.zeros((4, 5)), num_classes=4, input_dim=4)
    result = ms.evaluate(model, emb)
    assert result["accuracy"] == 0.25
    assert result["confusion_matrix"].sum() == emb.n
    assert np.all(result["confusion_matrix"][:, 1:] == 0)


def test_evaluate_matches_recount_oracle():
    emb = _blobs(n_per_class=30, classes=3, dim=3, seed=6)
    model = ms.train(emb, cfg=ms.TrainConfig(epochs=100))
    result = ms.evaluate(model, emb)
    correct = 0
    for i in range(emb.n):
        cls, _ = ms.predict(model, emb.points[i])
        correct += int(cls == emb.labels[i])
    assert result["accuracy"] == correct / emb.n


def test_loss_monotone_with_small_learning_rate():
    emb = _blobs(n_per_class=30, classes=3, dim=3, seed=7)
    model = ms.train(emb, cfg=ms.TrainConfig(learning_rate=1e-3, epochs=120))
    losses = np.asarray(model.loss_history)
    assert np.all(np.diff(losses) <= 1e-12)


def test_training_deterministic():
    emb = _blobs(n_per_class=30, classes=3, dim=3, seed=8)
    cfg = ms.TrainConfig(epochs=50, batch_size=16, seed=123)
    a = ms.train(emb, cfg=cfg)
    b = ms.train(emb, cfg=cfg)
    assert np.array_equal(a.weights, b.weights)


def test_retained_subset_and_class_count_from_full_dataset():
    emb = _blobs(n_per_class=20, classes=3, dim=3, seed=9)
    only_two = np.flatnonzero(emb.labels < 2)
    model = ms.train(emb, retained=only_two, cfg=ms.TrainConfig(epochs=50))
    assert model.num_classes == 3  # absent class stays a valid output
    probs = ms.predict_proba(model, emb.points[:3])
    assert probs.shape == (3, 3)


def test_divergence_reports_epoch():
    emb = _blobs(n_per_class=20, classes=2, dim=2, seed=10, sep=50.0)
    with np.errstate(over="ignore"), pytest.raises(DivergenceError) as err:
        ms.train(emb, cfg=ms.TrainConfig(learning_rate=1e12, epochs=40))
    assert "epoch" in str(err.value)


def test_train_errors():
    emb = _blobs()
    with pytest.raises(ConfigError):
        ms.train(emb, retained=np.array([], dtype=int))
    with pytest.raises(ConfigError):
        ms.TrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        ms.TrainConfig(epochs=0)
    with pytest.raises(ConsistencyError):
        ms.predict(ms.train(emb, cfg=ms.TrainConfig(epochs=5)), np.zeros(7))


def test_model_artifact_round_trip(tmp_path):
    emb = _blobs(seed=11)
    model = ms.train(emb, cfg=ms.TrainConfig(epochs=30))
    path = tmp_path / "model.json"
    ms.save_model(model, path)
    loaded = ms.load_model(path)
    assert np.array_equal(loaded.weights, model.weights)
    assert loaded.num_classes == model.num_classes
    assert loaded.input_dim == model.input_dim
