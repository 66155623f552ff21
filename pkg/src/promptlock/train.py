"""Mini-batch SGD with momentum over a merged locked dataset.

The empirical risk is a plain mean over all samples, which by linearity
equals the weighted sum of the mean risks on the edited and relabeled
subsets; the locking behavior comes entirely from the data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ClassId, Dataset, MultiLabel, SegMask, TaskKind
from .models import Model, ModelSpec, forward, init_model, philox

LOSSES = ("softmax_ce", "binary_ce", "pixel_softmax_ce")

_TASK_DEFAULT_LOSS = {
    TaskKind.CLASSIFICATION: "softmax_ce",
    TaskKind.MULTI_LABEL: "binary_ce",
    TaskKind.SEGMENTATION: "pixel_softmax_ce",
}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    shuffle_seed: int = 0
    loss: str = "softmax_ce"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")


def default_loss_for(task: TaskKind) -> str:
    return _TASK_DEFAULT_LOSS[task]


@dataclass
class Batch:
    """Dense arrays ready for the loss: images plus loss-specific targets."""

    images: np.ndarray       # (n, H, W, C) float64
    targets: np.ndarray      # ids (n,), bits (n, K), or masks (n, H, W)


def make_batch(dataset: Dataset, loss: str, output_classes: int,
               indices=None) -> Batch:
    samples = dataset.samples if indices is None else [dataset.samples[i] for i in indices]
    images = np.stack([s.image.array for s in samples]).astype(np.float64)
    if loss == "softmax_ce":
        targets = np.array([s.label.value for s in samples], dtype=np.int64)
        if targets.max(initial=0) >= output_classes:
            raise ValueError("class id exceeds the model's output width")
    elif loss == "binary_ce":
        targets = np.zeros((len(samples), output_classes), dtype=np.float64)
        for i, s in enumerate(samples):
            bits = s.label.bits
            if len(bits) > output_classes:
                raise ValueError("label vector wider than the model's output")
            targets[i, :len(bits)] = bits  # shorter label vectors zero-pad on the right
    elif loss == "pixel_softmax_ce":
        targets = np.stack([s.label.mask for s in samples]).astype(np.int64)
        if targets.max(initial=0) >= output_classes:
            raise ValueError("mask class id exceeds the model's output width")
    else:
        raise ValueError(f"unknown loss {loss!r}")
    return Batch(images, targets)


def _check_label_kind(dataset: Dataset, loss: str):
    probe = dataset.samples[0].label if len(dataset) else None
    wants = {"softmax_ce": ClassId, "binary_ce": MultiLabel, "pixel_softmax_ce": SegMask}[loss]
    if probe is not None and not isinstance(probe, wants):
        raise ValueError(f"loss {loss} needs {wants.__name__} labels, got {type(probe).__name__}")


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_grad(model: Model, batch: Batch, cfg: TrainConfig) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient w.r.t. the flat weights."""
    spec = model.spec
    x = batch.images
    n = len(x)
    p = model.unpack()
    grads = {name: np.zeros_like(arr) for name, arr in p.items()}

    if spec.arch in ("linear", "mlp"):
        flat = x.reshape(n, -1)
        if spec.arch == "linear":
            logits = flat @ p["w"] + p["b"]
        else:
            pre = flat @ p["w1"] + p["b1"]
            hidden = np.maximum(pre, 0.0)
            logits = hidden @ p["w2"] + p["b2"]

        if cfg.loss == "softmax_ce":
            probs = _softmax(logits)
            loss = float(-np.log(np.maximum(probs[np.arange(n), batch.targets], 1e-300)).mean())
            dlogits = probs
            dlogits[np.arange(n), batch.targets] -= 1.0
            dlogits /= n
        elif cfg.loss == "binary_ce":
            probs = 1.0 / (1.0 + np.exp(-logits))
            t = batch.targets
            eps = 1e-12
            loss = float(-(t * np.log(probs + eps)
                           + (1 - t) * np.log(1 - probs + eps)).mean())
            dlogits = (probs - t) / (n * logits.shape[1])
        else:
            raise ValueError(f"loss {cfg.loss} incompatible with arch {spec.arch}")

        if spec.arch == "linear":
            grads["w"] = flat.T @ dlogits
            grads["b"] = dlogits.sum(axis=0)
        else:
            grads["w2"] = hidden.T @ dlogits
            grads["b2"] = dlogits.sum(axis=0)
            dhidden = (dlogits @ p["w2"].T) * (pre > 0)
            grads["w1"] = flat.T @ dhidden
            grads["b1"] = dhidden.sum(axis=0)

    elif spec.arch == "per_pixel_linear":
        if cfg.loss != "pixel_softmax_ce":
            raise ValueError(f"loss {cfg.loss} incompatible with arch {spec.arch}")
        logits = np.einsum("nhwc,hwck->nhwk", x, p["w"], optimize=True) + p["b"]
        probs = _softmax(logits)
        hh, ww = logits.shape[1], logits.shape[2]
        picked = np.take_along_axis(probs, batch.targets[..., None], axis=-1)[..., 0]
        loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
        dlogits = probs
        np.put_along_axis(dlogits, batch.targets[..., None],
                          np.take_along_axis(dlogits, batch.targets[..., None], axis=-1) - 1.0,
                          axis=-1)
        dlogits /= n * hh * ww
        grads["w"] = np.einsum("nhwc,nhwk->hwck", x, dlogits, optimize=True)
        grads["b"] = dlogits.sum(axis=0)
    else:
        raise ValueError(f"unknown arch {spec.arch}")

    flat_grad = np.concatenate([grads[name].ravel() for name, _ in spec.layout()])
    return loss, flat_grad


def dataset_loss(model: Model, dataset: Dataset, cfg: TrainConfig,
                 chunk: int = 256) -> float:
    """Mean loss over a whole dataset, computed in fixed-size chunks."""
    total, count = 0.0, 0
    for start in range(0, len(dataset), chunk):
        idx = range(start, min(start + chunk, len(dataset)))
        batch = make_batch(dataset, cfg.loss, model.spec.output_classes, idx)
        loss, _ = loss_and_grad(model, batch, cfg)
        total += loss * len(batch.images)
        count += len(batch.images)
    return total / max(count, 1)


def train(model: Model, dataset: Dataset, cfg: TrainConfig) -> tuple[Model, list[float]]:
    """SGD with momentum; deterministic given (weights, data, config)."""
    _check_label_kind(dataset, cfg.loss)
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")

    full = make_batch(dataset, cfg.loss, model.spec.output_classes)
    weights = model.weights.copy()
    velocity = np.zeros_like(weights)
    curve = []
    for epoch in range(cfg.epochs):
        order = philox(cfg.shuffle_seed, epoch).permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch = Batch(full.images[idx], full.targets[idx])
            m = Model(model.spec, weights)
            loss, grad = loss_and_grad(m, batch, cfg)
            velocity = cfg.momentum * velocity - cfg.learning_rate * grad
            weights = weights + velocity
            epoch_loss += loss * len(idx)
        curve.append(epoch_loss / n)
    return Model(model.spec, weights), curve


def make_model_spec(dataset: Dataset, arch: str, hidden_units: int = 0,
                    init_seed: int = 0) -> ModelSpec:
    """Spec sized to a dataset; output width covers every label id in use."""
    h, w, c = dataset.samples[0].image.shape
    if dataset.task is TaskKind.MULTI_LABEL:
        k = max(dataset.num_classes,
                max(len(s.label) for s in dataset.samples))
    else:
        k = dataset.num_classes
    return ModelSpec(arch, (h, w, c), k, hidden_units, init_seed)
