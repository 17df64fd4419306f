import json
import math
from dataclasses import replace

import numpy as np
import pytest

from gcn_model import (
    AdamOptimizer,
    GcnConfig,
    GcnModel,
    GradientDescent,
    Prediction,
    accuracy,
    backward,
    check_gradients,
    forward,
    load_checkpoint,
    loss,
    model_info,
    neighborhood_max_pool,
    predict,
    save_checkpoint,
    softmax,
    train,
    write_history_csv,
)
from graph_builder import GraphTensors, renormalize
from utils.errors import CheckpointError, NoLabeledNodes, NonFiniteLoss, ShapeMismatch


def _permuted(tensors: GraphTensors, perm: np.ndarray) -> GraphTensors:
    """Relabel the real block of a graph by perm; padding stays in place."""
    n = tensors.n_nodes
    full = np.concatenate([perm, np.arange(len(perm), n)])
    adjacency = tensors.adjacency[np.ix_(full, full)]
    return GraphTensors(
        adjacency=adjacency,
        renormalized=renormalize(adjacency),
        features=tensors.features[full],
        labels=tensors.labels[full],
        real_mask=tensors.real_mask[full],
        component_mask=tensors.component_mask[full],
    )


class TestConfig:
    def test_default_architecture(self):
        cfg = GcnConfig()
        assert cfg.layer_dims == (64, 32)
        assert cfg.pools_after(0)
        assert not cfg.pools_after(1)

    def test_without_fc_the_last_conv_emits_classes(self):
        cfg = GcnConfig(use_fc=False)
        assert cfg.layer_dims == (64, 5)
        assert cfg.pools_after(1)

    def test_pooling_follows_blocks(self):
        cfg = GcnConfig(hidden_dims=(16, 16, 8, 8), n_conv_per_block=2, fc_dim=8)
        assert [cfg.pools_after(i) for i in range(4)] == [False, True, False, False]
        no_pool = replace(cfg, pooling="none")
        assert not any(no_pool.pools_after(i) for i in range(4))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"hidden_dims": (64,)},
            {"fc_dim": 16},
            {"pooling": "mean"},
            {"n_classes": 4},
            {"optimizer": "sgd"},
            {"self_dim": -1},
        ],
    )
    def test_invalid_configs(self, kwargs):
        with pytest.raises(ValueError):
            GcnConfig(**kwargs)

    def test_from_config_keeps_fc_in_step_with_hidden_dims(self):
        cfg = GcnConfig.from_config(hidden_dims=(12, 10), epochs=3)
        assert cfg.fc_dim == 10
        assert cfg.epochs == 3
        assert cfg.n_nodes == 37


class TestInitialization:
    def test_shapes(self):
        model = GcnModel.initialize(GcnConfig())
        shapes = {name: p.shape for name, p in model.parameters().items()}
        assert shapes == {
            "conv_0": (14, 64),
            "conv_1": (64, 32),
            "self_weight": (14, 32),
            "fc_weight": (64, 5),
            "fc_bias": (5,),
        }
        assert not model.fc_bias.any()

    def test_self_branch_needs_the_fc_layer(self):
        no_fc = GcnModel.initialize(GcnConfig(use_fc=False))
        assert no_fc.self_weight is None
        assert "self_weight" not in no_fc.parameters()
        no_self = GcnModel.initialize(GcnConfig(self_dim=0))
        assert no_self.fc_weight.shape == (32, 5)
        assert "self_weight" not in no_self.parameters()

    def test_glorot_bounds(self):
        model = GcnModel.initialize(GcnConfig())
        limit = math.sqrt(6.0 / (14 + 64))
        assert np.abs(model.conv_weights[0]).max() <= limit

    def test_same_seed_same_weights(self):
        a = GcnModel.initialize(GcnConfig(seed=5))
        b = GcnModel.initialize(GcnConfig(seed=5))
        c = GcnModel.initialize(GcnConfig(seed=6))
        assert all(np.array_equal(a.parameters()[k], b.parameters()[k]) for k in a.parameters())
        assert not np.array_equal(a.conv_weights[0], c.conv_weights[0])


def test_neighborhood_max_pool():
    h = np.array([[1.0, 5.0], [3.0, 2.0], [0.0, 4.0]])
    a_hat = np.array([[0.5, 0.4, 0.0], [0.4, 0.3, 0.4], [0.0, 0.4, 0.5]])
    pooled, arg = neighborhood_max_pool(h, a_hat)
    assert pooled.tolist() == [[3.0, 5.0], [3.0, 5.0], [3.0, 4.0]]
    assert arg.tolist() == [[1, 0], [1, 0], [1, 2]]


def test_pool_ties_go_to_lowest_index():
    pooled, arg = neighborhood_max_pool(np.array([[2.0], [2.0]]), np.ones((2, 2)))
    assert arg.ravel().tolist() == [0, 0]
    assert pooled.ravel().tolist() == [2.0, 2.0]


def test_first_layer_is_relu_of_propagated_features():
    cfg = GcnConfig(n_nodes=3, in_dim=2, hidden_dims=(3, 2), fc_dim=2, seed=1)
    model = GcnModel.initialize(cfg)
    adjacency = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    x = np.array([[0.2, 0.9], [0.5, 0.1], [0.7, 0.4]])
    tensors = GraphTensors(
        adjacency=adjacency,
        renormalized=renormalize(adjacency),
        features=x,
        labels=np.array([0, 1, 2]),
        real_mask=np.ones(3, dtype=bool),
        component_mask=np.ones(3, dtype=bool),
    )
    s6 = 1.0 / math.sqrt(6.0)
    a_hat = np.array([[0.5, s6, 0.0], [s6, 1.0 / 3.0, s6], [0.0, s6, 0.5]])

    _, cache = forward(model, tensors)
    layer = cache.layers[0]
    expected = np.maximum(a_hat @ x @ model.conv_weights[0], 0.0)
    assert np.allclose(np.maximum(layer.z, 0.0), expected, rtol=0, atol=1e-12)


def test_zero_features_give_uniform_prediction(make_tensors):
    tensors = make_tensors(6, 10, seed=2)
    tensors = replace(tensors, features=np.zeros_like(tensors.features))
    pred = predict(GcnModel.initialize(GcnConfig(n_nodes=10)), tensors)
    assert np.allclose(pred.probs, 0.2)
    assert loss(pred, tensors.labels) == pytest.approx(math.log(5))


def test_loss_of_certain_correct_prediction_is_zero():
    probs = np.tile(np.eye(5)[2], (3, 1))
    pred = Prediction(probs=probs, class_of=probs.argmax(axis=1), mask=np.ones(3, dtype=bool))
    assert loss(pred, np.array([2, 2, 2])) == 0.0
    assert pred.class_of.tolist() == [2, 2, 2]


def test_loss_without_labeled_rows(make_tensors):
    tensors = make_tensors(4, 6)
    pred = predict(GcnModel.initialize(GcnConfig(n_nodes=6)), tensors)
    with pytest.raises(NoLabeledNodes):
        loss(pred, np.full(6, -1))


def test_probabilities_are_distributions(make_tensors):
    model = GcnModel.initialize(GcnConfig())
    for seed in range(1000):
        pred = predict(model, make_tensors(2 + seed % 30, 37, seed=seed))
        assert np.allclose(pred.probs.sum(axis=1), 1.0, atol=1e-9)
        assert (pred.probs >= 0).all()


def test_softmax_handles_large_logits():
    probs = softmax(np.array([[1000.0, 0.0, -1000.0, 0.0, 0.0]]))
    assert np.isfinite(probs).all()
    assert probs[0, 0] == pytest.approx(1.0)


def test_wrong_feature_width(make_tensors):
    tensors = make_tensors(4, 37, in_dim=13)
    with pytest.raises(ShapeMismatch):
        predict(GcnModel.initialize(GcnConfig()), tensors)


def test_padding_leaves_real_rows_bit_identical(make_tensors):
    model = GcnModel.initialize(GcnConfig())
    for seed in range(100):
        tight = predict(model, make_tensors(9, 9, seed=seed, n_components=7))
        padded = predict(model, make_tensors(9, 37, seed=seed, n_components=7))
        assert np.array_equal(tight.probs, padded.probs[:9])
        assert np.array_equal(padded.probs[9:], np.tile(padded.probs[9], (28, 1)))


def test_relabeling_nodes_permutes_predictions(make_tensors):
    model = GcnModel.initialize(GcnConfig())
    rng = np.random.default_rng(0)
    for seed in range(100):
        tensors = make_tensors(10, 37, seed=seed, n_components=8)
        perm = rng.permutation(10)
        original = predict(model, tensors).probs[:10]
        permuted = predict(model, _permuted(tensors, perm)).probs[:10]
        assert np.allclose(permuted, original[perm], rtol=0, atol=1e-12)


@pytest.mark.parametrize(
    "cfg",
    [
        GcnConfig(hidden_dims=(8, 6), fc_dim=6, seed=3),
        GcnConfig(hidden_dims=(8, 6), use_fc=False, seed=4),
        GcnConfig(hidden_dims=(8, 6), fc_dim=6, pooling="none", seed=5),
        GcnConfig(hidden_dims=(8, 8, 6, 6), n_conv_per_block=2, fc_dim=6, seed=6),
    ],
    ids=["fc", "no-fc", "no-pool", "deep"],
)
def test_analytic_gradients_match_finite_differences(make_tensors, cfg):
    model = GcnModel.initialize(cfg)
    for seed in range(6):
        tensors = make_tensors(7, 37, seed=seed, n_components=5)
        errors = check_gradients(model, tensors)
        assert set(errors) == set(model.parameters())
        assert max(errors.values()) < 1e-4, errors


def test_unlabeled_rows_do_not_contribute_to_gradients(make_tensors):
    model = GcnModel.initialize(GcnConfig(hidden_dims=(8, 6), fc_dim=6))
    tensors = make_tensors(6, 37, seed=1, n_components=5)
    pred, cache = forward(model, tensors)

    full = backward(cache, tensors.labels, tensors.component_mask)
    mask = tensors.component_mask.copy()
    mask[2] = False
    without = backward(cache, tensors.labels, mask)

    # d loss / d bias is the mean over rows of (p - onehot)
    row = pred.probs[2] - np.eye(5)[tensors.labels[2]]
    assert np.allclose(5 * full["fc_bias"] - 4 * without["fc_bias"], row, atol=1e-12)


def test_saturated_prediction_has_vanishing_gradients(make_tensors):
    model = GcnModel.initialize(GcnConfig())
    model.fc_weight[...] = 0.0
    model.fc_bias[...] = [0.0, 0.0, 0.0, 0.0, 40.0]
    tensors = make_tensors(6, 37, seed=3)
    tensors = replace(tensors, labels=np.where(tensors.labels >= 0, 4, -1))

    _, cache = forward(model, tensors)
    grads = backward(cache, tensors.labels, tensors.component_mask)
    assert all(np.linalg.norm(g) < 1e-12 for g in grads.values())


def test_self_branch_reads_only_the_node_itself(make_tensors):
    model = GcnModel.initialize(GcnConfig(hidden_dims=(8, 6), fc_dim=6, seed=2))
    for weight in model.conv_weights:
        weight[...] = 0.0
    tensors = make_tensors(6, 37, seed=4)
    features = tensors.features.copy()
    features[1:6] = features[1:6][::-1]
    shuffled = replace(tensors, features=features)
    assert np.allclose(
        predict(model, tensors).probs[0], predict(model, shuffled).probs[0], rtol=0, atol=1e-12
    )
    assert not np.allclose(predict(model, tensors).probs[0], 0.2)


class TestTraining:
    def test_loss_decreases(self, make_tensors, tiny_config):
        dataset = [make_tensors(6, 37, seed=s, n_components=5) for s in range(3)]
        model = GcnModel.initialize(tiny_config)
        _, history = train(model, dataset)
        assert len(history) == tiny_config.epochs
        assert history[-1]["loss"] < history[0]["loss"]
        assert history[0]["loss"] == pytest.approx(
            np.mean([loss(predict(model, t), t.labels) for t in dataset]), rel=0.5
        )

    def test_adam_loss_decreases(self, make_tensors, tiny_config):
        dataset = [make_tensors(6, 37, seed=s, n_components=5) for s in range(3)]
        cfg = replace(tiny_config, optimizer="adam", learning_rate=0.02)
        _, history = train(GcnModel.initialize(cfg), dataset)
        assert history[-1]["loss"] < history[0]["loss"]

    def test_first_adam_step_moves_by_the_learning_rate(self):
        params = {"w": np.array([1.0, 2.0, 3.0])}
        optimizer = AdamOptimizer(params, lr=0.1)
        optimizer.step({"w": np.array([0.5, -4.0, 0.0])})
        # bias-corrected first step is lr * g / (|g| + eps)
        assert params["w"] == pytest.approx([0.9, 2.1, 3.0])

    def test_gradient_descent_step(self):
        params = {"w": np.array([1.0, 2.0])}
        GradientDescent(params, lr=0.5).step({"w": np.array([2.0, -2.0])})
        assert params["w"].tolist() == [0.0, 3.0]

    def test_input_model_is_not_modified(self, make_tensors, tiny_config):
        model = GcnModel.initialize(tiny_config)
        before = model.copy()
        train(model, [make_tensors(6, 37, seed=0)])
        assert np.array_equal(model.conv_weights[0], before.conv_weights[0])
        assert np.array_equal(model.fc_bias, before.fc_bias)

    def test_same_seed_same_trained_weights(self, make_tensors, tiny_config):
        dataset = [make_tensors(6, 37, seed=s) for s in range(2)]
        a, _ = train(GcnModel.initialize(tiny_config), dataset)
        b, _ = train(GcnModel.initialize(tiny_config), dataset)
        for name, param in a.parameters().items():
            assert np.array_equal(param, b.parameters()[name])

    def test_same_seed_same_checkpoint_bytes(self, make_tensors, tiny_config, tmp_path):
        dataset = [make_tensors(6, 37, seed=s) for s in range(2)]
        for name in ("a.json", "b.json"):
            trained, _ = train(GcnModel.initialize(tiny_config), dataset)
            save_checkpoint(trained, tmp_path / name)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_zero_learning_rate_keeps_weights(self, make_tensors, tiny_config):
        model = GcnModel.initialize(tiny_config)
        trained, _ = train(model, [make_tensors(6, 37)], replace(tiny_config, learning_rate=0.0, epochs=5))
        for name, param in trained.parameters().items():
            assert np.array_equal(param, model.parameters()[name])

    def test_validation_accuracy_is_recorded(self, make_tensors, tiny_config):
        val = [make_tensors(5, 37, seed=9)]
        trained, history = train(
            GcnModel.initialize(tiny_config), [make_tensors(6, 37)], replace(tiny_config, epochs=3), val
        )
        assert history[-1]["val_accuracy"] == accuracy(trained, val)
        assert 0.0 <= history[-1]["val_accuracy"] <= 1.0

    def test_empty_dataset(self, tiny_config):
        with pytest.raises(NoLabeledNodes):
            train(GcnModel.initialize(tiny_config), [])

    def test_graph_without_labels(self, make_tensors, tiny_config):
        tensors = make_tensors(6, 37)
        tensors = replace(tensors, labels=np.full(37, -1))
        with pytest.raises(NoLabeledNodes):
            train(GcnModel.initialize(tiny_config), [tensors])

    def test_divergence_is_reported(self, make_tensors, tiny_config):
        tensors = make_tensors(6, 37)
        features = tensors.features.copy()
        features[0, 0] = np.nan
        with pytest.raises(NonFiniteLoss):
            train(GcnModel.initialize(tiny_config), [replace(tensors, features=features)])


class TestCheckpoint:
    def test_round_trip(self, tmp_path, tiny_config):
        model = GcnModel.initialize(tiny_config)
        path = tmp_path / "model.json"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert loaded.config == model.config
        for name, param in model.parameters().items():
            assert np.array_equal(param, loaded.parameters()[name])

    def test_wrong_format(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"format": "other", "version": 1}))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_wrong_version(self, tmp_path, tiny_config):
        path = tmp_path / "model.json"
        save_checkpoint(GcnModel.initialize(tiny_config), path)
        payload = json.loads(path.read_text())
        payload["version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_wrong_shape(self, tmp_path, tiny_config):
        path = tmp_path / "model.json"
        save_checkpoint(GcnModel.initialize(tiny_config), path)
        payload = json.loads(path.read_text())
        payload["weights"]["fc_bias"] = [0.0, 0.0]
        path.write_text(json.dumps(payload))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_unreadable(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "missing.json")


def test_model_info(tiny_config):
    info = model_info(GcnModel.initialize(tiny_config))
    assert info["parameters"]["conv_0"] == [14, 8]
    assert info["n_parameters"] == 14 * 8 + 8 * 6 + 14 * 4 + (6 + 4) * 5 + 5


def test_history_csv(tmp_path):
    path = tmp_path / "history.csv"
    write_history_csv(
        [{"epoch": 1, "loss": 1.5, "val_accuracy": None}, {"epoch": 2, "loss": 1.25, "val_accuracy": 0.5}],
        path,
    )
    assert path.read_text().splitlines() == [
        "epoch,loss,val_accuracy",
        "1,1.5000000000,",
        "2,1.2500000000,0.500000",
    ]
