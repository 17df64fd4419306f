"""
GCN Model for the Low Vision GUI Checker.

A graph convolutional node classifier written directly against numpy:

    H^0 = X
    H^{l+1} = ReLU(Â H^l W^l)

with a neighbourhood max-pooling between conv blocks, a per-node fully
connected layer over [H^L | ReLU(X W_self)], and a softmax over the five
classes. Gradients of the cross-entropy loss are derived by hand; training
is full-batch, with Adam or plain gradient descent.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import OPTIMIZERS, POOLING_MODES, config
from feature_encoder import N_CLASSES, N_FEATURES
from graph_builder import GraphTensors
from utils.errors import (
    CheckpointError,
    NoLabeledNodes,
    NonFiniteLoss,
    ShapeMismatch,
)
from utils.logging_config import setup_logger

# Configure logger
logger = setup_logger(__name__, logging.INFO)

CHECKPOINT_FORMAT = "gcn-checkpoint"
CHECKPOINT_VERSION = 2


@dataclass(frozen=True)
class GcnConfig:
    """Architecture and training hyperparameters."""

    n_nodes: int = 37
    in_dim: int = N_FEATURES
    hidden_dims: Tuple[int, ...] = (64, 32)
    n_conv_per_block: int = 1
    n_blocks: int = 2
    fc_dim: int = 32
    self_dim: int = 32
    n_classes: int = N_CLASSES
    learning_rate: float = 0.01
    epochs: int = 400
    seed: int = 7
    pooling: str = "neighborhood-max"
    use_fc: bool = True
    optimizer: str = "adam"
    log_every: int = 50

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        if self.n_classes != N_CLASSES:
            raise ValueError(f"n_classes must be {N_CLASSES}")
        if len(self.hidden_dims) != self.n_blocks * self.n_conv_per_block:
            raise ValueError(
                f"hidden_dims has {len(self.hidden_dims)} entries, expected "
                f"n_blocks * n_conv_per_block = {self.n_blocks * self.n_conv_per_block}"
            )
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.self_dim < 0:
            raise ValueError("self_dim must be non-negative")
        if self.use_fc and self.fc_dim != self.hidden_dims[-1]:
            raise ValueError(
                f"fc_dim ({self.fc_dim}) must equal the last conv width "
                f"({self.hidden_dims[-1]})"
            )

    @classmethod
    def from_config(cls, **overrides) -> "GcnConfig":
        """Build a GcnConfig from the global configuration plus overrides."""
        values = dict(
            n_nodes=config.PADDING_THRESHOLD,
            hidden_dims=tuple(config.HIDDEN_DIMS),
            n_conv_per_block=config.N_CONV_PER_BLOCK,
            n_blocks=config.N_BLOCKS,
            fc_dim=config.FC_DIM,
            self_dim=config.SELF_DIM,
            learning_rate=config.LEARNING_RATE,
            epochs=config.EPOCHS,
            seed=config.SEED,
            pooling=config.POOLING,
            use_fc=config.USE_FC,
            optimizer=config.OPTIMIZER,
        )
        values.update(overrides)
        if "hidden_dims" in overrides and "fc_dim" not in overrides:
            values["fc_dim"] = tuple(values["hidden_dims"])[-1]
        return cls(**values)

    @property
    def n_layers(self) -> int:
        return len(self.hidden_dims)

    @property
    def layer_dims(self) -> Tuple[int, ...]:
        """Output width of every conv layer as actually built."""
        if self.use_fc:
            return self.hidden_dims
        return self.hidden_dims[:-1] + (self.n_classes,)

    @property
    def has_self_branch(self) -> bool:
        """Node-wise ReLU(X W_self) into the FC layer; needs use_fc and self_dim > 0."""
        return self.use_fc and self.self_dim > 0

    @property
    def fc_in_dim(self) -> int:
        return self.fc_dim + (self.self_dim if self.has_self_branch else 0)

    def pools_after(self, layer: int) -> bool:
        """True when neighbourhood pooling follows conv layer `layer`."""
        if self.pooling == "none":
            return False
        last = layer == self.n_layers - 1
        if last:
            # without the FC layer the final pooled map feeds the softmax
            return not self.use_fc
        return (layer + 1) % self.n_conv_per_block == 0


@dataclass
class GcnModel:
    """Trainable parameters plus the configuration that shaped them."""

    conv_weights: List[np.ndarray]
    fc_weight: Optional[np.ndarray]
    fc_bias: Optional[np.ndarray]
    config: GcnConfig
    self_weight: Optional[np.ndarray] = None

    @classmethod
    def initialize(cls, gcn_config: GcnConfig) -> "GcnModel":
        """
        Seeded Glorot-uniform initialization; the FC bias starts at zero.

        Args:
            gcn_config: Architecture

        Returns:
            Fresh model
        """
        rng = np.random.default_rng(gcn_config.seed)

        def glorot(fan_in: int, fan_out: int) -> np.ndarray:
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-limit, limit, size=(fan_in, fan_out))

        dims = (gcn_config.in_dim,) + gcn_config.layer_dims
        conv_weights = [glorot(a, b) for a, b in zip(dims, dims[1:])]

        self_weight = fc_weight = fc_bias = None
        if gcn_config.has_self_branch:
            self_weight = glorot(gcn_config.in_dim, gcn_config.self_dim)
        if gcn_config.use_fc:
            fc_weight = glorot(gcn_config.fc_in_dim, gcn_config.n_classes)
            fc_bias = np.zeros(gcn_config.n_classes)

        return cls(conv_weights, fc_weight, fc_bias, gcn_config, self_weight)

    def parameters(self) -> Dict[str, np.ndarray]:
        """Named parameter arrays (live references, not copies)."""
        params = {f"conv_{i}": w for i, w in enumerate(self.conv_weights)}
        if self.config.has_self_branch:
            params["self_weight"] = self.self_weight
        if self.config.use_fc:
            params["fc_weight"] = self.fc_weight
            params["fc_bias"] = self.fc_bias
        return params

    def copy(self) -> "GcnModel":
        def dup(array: Optional[np.ndarray]) -> Optional[np.ndarray]:
            return None if array is None else array.copy()

        return GcnModel(
            conv_weights=[w.copy() for w in self.conv_weights],
            fc_weight=dup(self.fc_weight),
            fc_bias=dup(self.fc_bias),
            config=self.config,
            self_weight=dup(self.self_weight),
        )


@dataclass(frozen=True)
class Prediction:
    """Five-tuple probabilities per node and the argmax class."""

    probs: np.ndarray
    class_of: np.ndarray
    mask: np.ndarray


@dataclass
class LayerCache:
    h_in: np.ndarray
    propagated: np.ndarray
    z: np.ndarray
    pool_arg: Optional[np.ndarray] = None


@dataclass
class ForwardCache:
    """Intermediates of one forward pass over the real block."""

    model: GcnModel
    real_index: np.ndarray
    a_hat: np.ndarray
    layers: List[LayerCache] = field(default_factory=list)
    h_last: Optional[np.ndarray] = None
    z_self: Optional[np.ndarray] = None
    fc_in: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def neighborhood_max_pool(h: np.ndarray, a_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Element-wise max over each node and its nonzero Â-neighbours.

    Node count is preserved. Ties resolve to the lowest node index.

    Returns:
        Tuple of (pooled features, argmax source node per entry)
    """
    neighbours = a_hat != 0
    stacked = np.where(neighbours[:, :, None], h[None, :, :], -np.inf)
    arg = stacked.argmax(axis=1)
    pooled = h[arg, np.arange(h.shape[1])[None, :]]
    return pooled, arg


def _unpool(grad: np.ndarray, arg: np.ndarray) -> np.ndarray:
    out = np.zeros_like(grad)
    cols = np.broadcast_to(np.arange(grad.shape[1]), arg.shape)
    np.add.at(out, (arg, cols), grad)
    return out


def _check_shapes(model: GcnModel, tensors: GraphTensors) -> None:
    n = tensors.adjacency.shape[0]
    if tensors.renormalized.shape != (n, n):
        raise ShapeMismatch(f"renormalized adjacency is {tensors.renormalized.shape}, expected {(n, n)}")
    if tensors.features.shape != (n, model.config.in_dim):
        raise ShapeMismatch(
            f"features are {tensors.features.shape}, expected {(n, model.config.in_dim)}"
        )
    if tensors.labels.shape != (n,) or tensors.real_mask.shape != (n,):
        raise ShapeMismatch("labels and masks must have one entry per node")


def _propagate(
    model: GcnModel, a_hat: np.ndarray, x: np.ndarray, cache: Optional[ForwardCache]
) -> np.ndarray:
    cfg = model.config
    h = x
    for layer, weight in enumerate(model.conv_weights):
        propagated = a_hat @ h
        z = propagated @ weight
        h_next = np.maximum(z, 0.0)
        arg = None
        if cfg.pools_after(layer):
            h_next, arg = neighborhood_max_pool(h_next, a_hat)
        if cache is not None:
            cache.layers.append(LayerCache(h, propagated, z, arg))
        h = h_next

    if cache is not None:
        cache.h_last = h
    if not cfg.use_fc:
        return h

    if cfg.has_self_branch:
        z_self = x @ model.self_weight
        h = np.hstack([h, np.maximum(z_self, 0.0)])
        if cache is not None:
            cache.z_self = z_self
    if cache is not None:
        cache.fc_in = h
    return h @ model.fc_weight + model.fc_bias


def forward(
    model: GcnModel, tensors: GraphTensors, keep_cache: bool = True
) -> Tuple[Prediction, Optional[ForwardCache]]:
    """
    Forward pass over one padded graph.

    Propagation runs on the real (component and container) block. Every
    padded row is an isolated zero-feature node; its output is computed
    once and copied to all padded rows.

    Args:
        model: GCN model
        tensors: Padded graph tensors with precomputed Â
        keep_cache: Whether to keep the intermediates for backward()

    Returns:
        Tuple of (Prediction, ForwardCache or None)

    Raises:
        ShapeMismatch: If the tensors do not fit the model
    """
    _check_shapes(model, tensors)
    n = tensors.n_nodes
    real = np.flatnonzero(tensors.real_mask)
    a_hat = tensors.renormalized[np.ix_(real, real)]
    x = tensors.features[real]

    cache = ForwardCache(model, real, a_hat) if keep_cache else None
    real_probs = softmax(_propagate(model, a_hat, x, cache))

    probs = np.empty((n, model.config.n_classes))
    probs[real] = real_probs
    if len(real) < n:
        isolated = _propagate(
            model, np.ones((1, 1)), np.zeros((1, model.config.in_dim)), None
        )
        probs[~tensors.real_mask] = softmax(isolated)[0]

    if cache is not None:
        cache.probs = real_probs

    prediction = Prediction(
        probs=probs,
        class_of=probs.argmax(axis=1),
        mask=tensors.component_mask.copy(),
    )
    return prediction, cache


def predict(model: GcnModel, tensors: GraphTensors) -> Prediction:
    """Forward pass without caching; class_of is the per-node argmax."""
    prediction, _ = forward(model, tensors, keep_cache=False)
    return prediction


def loss(pred: Prediction, labels: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """
    Mean cross-entropy over labeled real component rows.

    Args:
        pred: Forward output
        labels: Length-N class indices, -1 for unlabeled rows
        mask: Rows allowed into the loss (defaults to pred.mask)

    Returns:
        Mean of -log p(true class)

    Raises:
        NoLabeledNodes: If no row is both masked in and labeled
    """
    rows = _loss_rows(labels, pred.mask if mask is None else mask)
    picked = pred.probs[rows, labels[rows]]
    return float(-np.mean(np.log(np.maximum(picked, np.finfo(float).tiny))))


def _loss_rows(labels: np.ndarray, mask: np.ndarray) -> np.ndarray:
    rows = np.flatnonzero(mask & (labels >= 0))
    if rows.size == 0:
        raise NoLabeledNodes("no labeled component rows in the loss mask")
    return rows


def backward(
    cache: ForwardCache, labels: np.ndarray, mask: np.ndarray
) -> Dict[str, np.ndarray]:
    """
    Analytic gradients of the mean cross-entropy loss.

    Max-pooling routes each gradient entry to the node that won the max,
    ReLU passes gradient only where its input was positive.

    Args:
        cache: Cache from forward(..., keep_cache=True)
        labels: Length-N class indices, -1 for unlabeled rows
        mask: Length-N rows allowed into the loss

    Returns:
        Gradient per parameter name, same shapes as model.parameters()
    """
    model = cache.model
    cfg = model.config
    real = cache.real_index
    rows = _loss_rows(labels[real], mask[real])

    d_logits = np.zeros_like(cache.probs)
    d_logits[rows] = cache.probs[rows]
    d_logits[rows, labels[real][rows]] -= 1.0
    d_logits /= rows.size

    grads: Dict[str, np.ndarray] = {}
    if cfg.use_fc:
        grads["fc_weight"] = cache.fc_in.T @ d_logits
        grads["fc_bias"] = d_logits.sum(axis=0)
        d_in = d_logits @ model.fc_weight.T
        d_h = d_in[:, : cfg.fc_dim]
        if cfg.has_self_branch:
            d_self = d_in[:, cfg.fc_dim :] * (cache.z_self > 0)
            # the first conv layer's input is X
            grads["self_weight"] = cache.layers[0].h_in.T @ d_self
    else:
        d_h = d_logits

    for layer in reversed(range(len(model.conv_weights))):
        record = cache.layers[layer]
        if record.pool_arg is not None:
            d_h = _unpool(d_h, record.pool_arg)
        d_z = d_h * (record.z > 0)
        weight = model.conv_weights[layer]
        grads[f"conv_{layer}"] = record.propagated.T @ d_z
        d_h = cache.a_hat.T @ (d_z @ weight.T)

    return grads


def _dataset_loss_and_grads(
    model: GcnModel, dataset: Sequence[GraphTensors]
) -> Tuple[float, Dict[str, np.ndarray]]:
    counts = [int(t.label_mask.sum()) for t in dataset]
    total = sum(counts)
    loss_sum = 0.0
    grads = {name: np.zeros_like(p) for name, p in model.parameters().items()}
    for tensors, count in zip(dataset, counts):
        pred, cache = forward(model, tensors)
        share = count / total
        loss_sum += share * loss(pred, tensors.labels, tensors.component_mask)
        for name, grad in backward(cache, tensors.labels, tensors.component_mask).items():
            grads[name] += share * grad
    return loss_sum, grads


def accuracy(model: GcnModel, dataset: Sequence[GraphTensors]) -> float:
    """Component-level accuracy over the labeled rows of a dataset."""
    correct = total = 0
    for tensors in dataset:
        rows = tensors.label_mask
        pred = predict(model, tensors)
        correct += int((pred.class_of[rows] == tensors.labels[rows]).sum())
        total += int(rows.sum())
    return correct / total if total else float("nan")


class GradientDescent:
    """Fixed-step update: p <- p - lr * g."""

    def __init__(self, params: Dict[str, np.ndarray], lr: float) -> None:
        self.params = params
        self.lr = lr

    def step(self, grads: Dict[str, np.ndarray]) -> None:
        for name, grad in grads.items():
            self.params[name] -= self.lr * grad


class AdamOptimizer:
    """
    Adam with bias-corrected moment estimates.

    Args:
        params: Live parameter arrays, updated in place
        lr: Learning rate
        beta1: Exponential decay for the first moment
        beta2: Exponential decay for the second moment
        eps: Numerical stability term
    """

    def __init__(
        self,
        params: Dict[str, np.ndarray],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, grad in grads.items():
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * grad**2
            m_hat = self.m[name] / (1 - self.beta1**self.t)
            v_hat = self.v[name] / (1 - self.beta2**self.t)
            self.params[name] -= self.lr * (m_hat / (np.sqrt(v_hat) + self.eps))


def make_optimizer(
    params: Dict[str, np.ndarray], gcn_config: GcnConfig
) -> Union[GradientDescent, AdamOptimizer]:
    """Optimizer named by gcn_config.optimizer over the given parameters."""
    if gcn_config.optimizer == "adam":
        return AdamOptimizer(params, gcn_config.learning_rate)
    return GradientDescent(params, gcn_config.learning_rate)


def train(
    model: GcnModel,
    dataset: Sequence[GraphTensors],
    gcn_config: Optional[GcnConfig] = None,
    validation: Optional[Sequence[GraphTensors]] = None,
) -> Tuple[GcnModel, List[Dict[str, Optional[float]]]]:
    """
    Full-batch training on the mean cross-entropy, one update per epoch
    with the optimizer gcn_config names.

    The input model is not modified; a trained copy is returned.

    Args:
        model: Initial model
        dataset: Training graphs, each with at least one labeled component
        gcn_config: Optimizer, learning rate and epoch count (defaults to
            model.config)
        validation: Optional graphs for per-epoch validation accuracy

    Returns:
        Tuple of (trained model, history of {"epoch", "loss", "val_accuracy"})

    Raises:
        NoLabeledNodes: If the dataset is empty or a graph has no labels
        NonFiniteLoss: If the loss becomes NaN or infinite
    """
    cfg = gcn_config or model.config
    if not dataset:
        raise NoLabeledNodes("training dataset is empty")
    for i, tensors in enumerate(dataset):
        if not tensors.label_mask.any():
            raise NoLabeledNodes(f"training graph {i} has no labeled components")

    trained = model.copy()
    optimizer = make_optimizer(trained.parameters(), cfg)
    history: List[Dict[str, Optional[float]]] = []
    logger.info(
        f"Training on {len(dataset)} graphs for {cfg.epochs} epochs, "
        f"{cfg.optimizer} lr={cfg.learning_rate}, layers={list(trained.config.layer_dims)}"
    )

    for epoch in range(1, cfg.epochs + 1):
        epoch_loss, grads = _dataset_loss_and_grads(trained, dataset)
        if not math.isfinite(epoch_loss):
            raise NonFiniteLoss(f"loss became {epoch_loss} at epoch {epoch}")

        optimizer.step(grads)

        val_accuracy = accuracy(trained, validation) if validation else None
        history.append({"epoch": epoch, "loss": epoch_loss, "val_accuracy": val_accuracy})

        if cfg.log_every and (epoch % cfg.log_every == 0 or epoch == cfg.epochs):
            val_text = f", val_accuracy={val_accuracy:.4f}" if val_accuracy is not None else ""
            logger.info(f"Epoch {epoch}: loss={epoch_loss:.6f}{val_text}")

    return trained, history


def check_gradients(
    model: GcnModel, tensors: GraphTensors, eps: float = 1e-5
) -> Dict[str, float]:
    """
    Compare analytic gradients with central finite differences.

    Args:
        model: Model to check (restored after every perturbation)
        tensors: One graph with at least one labeled component
        eps: Perturbation size

    Returns:
        Relative error ||g_a - g_n|| / max(||g_a|| + ||g_n||, 1e-12) per
        parameter name
    """
    mask = tensors.component_mask
    _, cache = forward(model, tensors)
    analytic = backward(cache, tensors.labels, mask)

    errors: Dict[str, float] = {}
    for name, param in model.parameters().items():
        numeric = np.zeros_like(param)
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + eps
            plus = loss(predict(model, tensors), tensors.labels, mask)
            param[index] = original - eps
            minus = loss(predict(model, tensors), tensors.labels, mask)
            param[index] = original
            numeric[index] = (plus - minus) / (2 * eps)
        diff = np.linalg.norm(analytic[name] - numeric)
        scale = max(np.linalg.norm(analytic[name]) + np.linalg.norm(numeric), 1e-12)
        errors[name] = float(diff / scale)
    return errors


def save_checkpoint(model: GcnModel, path: Union[str, Path]) -> None:
    """Write config and row-major float64 weights as JSON."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "weights": {name: p.tolist() for name, p in model.parameters().items()},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")
    logger.info(f"Saved checkpoint to {path}")


def load_checkpoint(path: Union[str, Path]) -> GcnModel:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        CheckpointError: If the file is unreadable, of another format or
            version, or its weights do not match its config
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e

    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path} has checkpoint version {payload.get('version')}, "
            f"expected {CHECKPOINT_VERSION}"
        )

    try:
        gcn_config = GcnConfig(**payload["config"])
    except (TypeError, ValueError) as e:
        raise CheckpointError(f"bad config in {path}: {e}") from e

    model = GcnModel.initialize(gcn_config)
    weights = payload.get("weights", {})
    for name, param in model.parameters().items():
        if name not in weights:
            raise CheckpointError(f"{path} lacks weights for {name}")
        loaded = np.asarray(weights[name], dtype=np.float64)
        if loaded.shape != param.shape:
            raise CheckpointError(
                f"{name} in {path} has shape {loaded.shape}, expected {param.shape}"
            )
        param[...] = loaded
    return model


def model_info(model: GcnModel) -> Dict[str, object]:
    """Shapes and configuration of a model, for the model-info command."""
    return {
        "config": asdict(model.config),
        "parameters": {name: list(p.shape) for name, p in model.parameters().items()},
        "n_parameters": int(sum(p.size for p in model.parameters().values())),
    }


def write_history_csv(history: Sequence[Dict[str, Optional[float]]], path: Union[str, Path]) -> None:
    """Training log as CSV: epoch,loss,val_accuracy."""
    lines = ["epoch,loss,val_accuracy"]
    for row in history:
        val = "" if row["val_accuracy"] is None else f"{row['val_accuracy']:.6f}"
        lines.append(f"{row['epoch']},{row['loss']:.10f},{val}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
