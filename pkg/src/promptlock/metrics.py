"""Locked/unlocked performance metrics.

LP is the score on the clean test set as-is; UP is the score on the same
set after every image has been edited with the key. The lock class is
never a correct answer, so routing to it always counts as an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ClassId, Dataset, MultiLabel, SegMask, TaskKind
from .editor import EditKey, EditorConfig
from .locking import lock_mask_rect, unlock_test_set
from .models import Model, forward


@dataclass(frozen=True)
class Metrics:
    up: float
    lp: float
    lock_class_rate: float
    per_class_accuracy: tuple[float, ...] = ()
    auroc: Optional[float] = None
    pixel_accuracy: Optional[float] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("up", "lp", "lock_class_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


def _batched_logits(model: Model, dataset: Dataset, chunk: int = 256) -> np.ndarray:
    outs = []
    for start in range(0, len(dataset), chunk):
        imgs = np.stack([s.image.array for s in dataset.samples[start:start + chunk]])
        outs.append(forward(model, imgs))
    return np.concatenate(outs)


def accuracy(model: Model, dataset: Dataset) -> float:
    """Fraction of samples whose argmax matches the true class id."""
    if dataset.task is not TaskKind.CLASSIFICATION:
        raise ValueError("accuracy applies to classification datasets")
    logits = _batched_logits(model, dataset)
    pred = logits.argmax(axis=1)
    truth = np.array([s.label.value for s in dataset.samples])
    return float((pred == truth).mean())


def per_class_accuracy(model: Model, dataset: Dataset, num_classes: int) -> tuple[float, ...]:
    logits = _batched_logits(model, dataset)
    pred = logits.argmax(axis=1)
    truth = np.array([s.label.value for s in dataset.samples])
    out = []
    for c in range(num_classes):
        mask = truth == c
        out.append(float((pred[mask] == c).mean()) if mask.any() else 0.0)
    return tuple(out)


def auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Macro-average rank-based AUROC; tied scores share 0.5 credit.

    Columns with a single class are skipped; if every column is
    degenerate, raises ValueError.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim == 1:
        scores, labels = scores[:, None], labels[:, None]
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same shape")
    per_label = []
    for j in range(scores.shape[1]):
        y = labels[:, j].astype(bool)
        n_pos, n_neg = int(y.sum()), int((~y).sum())
        if n_pos == 0 or n_neg == 0:
            continue
        per_label.append(_auroc_single(scores[:, j], y, n_pos, n_neg))
    if not per_label:
        raise ValueError("every label column is degenerate (single class)")
    return float(np.mean(per_label))


def _auroc_single(s: np.ndarray, y: np.ndarray, n_pos: int, n_neg: int) -> float:
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum = ranks[y].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def multilabel_scores(model: Model, dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Score/label matrices over the dataset's original label columns."""
    logits = _batched_logits(model, dataset)
    width = min(len(s.label) for s in dataset.samples)
    labels = np.stack([s.label.bits[:width] for s in dataset.samples])
    return logits[:, :width], labels


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.logical_and(a, b).sum())
    union = int(np.logical_or(a, b).sum())
    return inter / union if union else 0.0


def pixel_metrics(model: Model, dataset: Dataset,
                  lock_class: Optional[int] = None,
                  iou_threshold: float = 0.5) -> tuple[float, float]:
    """Per-pixel argmax accuracy plus the lock-mask rate.

    The lock-mask rate is the fraction of images whose predicted
    lock-class region overlaps the canonical centered rectangle with
    IoU above the threshold.
    """
    if dataset.task is not TaskKind.SEGMENTATION:
        raise ValueError("pixel_metrics applies to segmentation datasets")
    logits = _batched_logits(model, dataset, chunk=64)
    pred = logits.argmax(axis=-1)
    truth = np.stack([s.label.mask for s in dataset.samples])
    pixel_acc = float((pred == truth).mean())

    if lock_class is None:
        lock_class = model.spec.output_classes - 1
    h, w = truth.shape[1:]
    r0, c0, rh, rw = lock_mask_rect(h, w)
    canonical = np.zeros((h, w), dtype=bool)
    canonical[r0:r0 + rh, c0:c0 + rw] = True
    hits = sum(1 for i in range(len(pred))
               if mask_iou(pred[i] == lock_class, canonical) > iou_threshold)
    lock_mask_rate = hits / len(pred) if len(pred) else 0.0
    return pixel_acc, lock_mask_rate


def _task_score(model: Model, dataset: Dataset) -> float:
    if dataset.task is TaskKind.CLASSIFICATION:
        return accuracy(model, dataset)
    if dataset.task is TaskKind.MULTI_LABEL:
        scores, labels = multilabel_scores(model, dataset)
        return auroc(scores, labels)
    pixel_acc, _ = pixel_metrics(model, dataset)
    return pixel_acc


def _lock_rate(model: Model, dataset: Dataset, lock_class: int) -> float:
    if dataset.task is TaskKind.CLASSIFICATION:
        logits = _batched_logits(model, dataset)
        return float((logits.argmax(axis=1) == lock_class).mean())
    if dataset.task is TaskKind.MULTI_LABEL:
        logits = _batched_logits(model, dataset)
        if logits.shape[1] <= lock_class:
            return 0.0
        return float((logits.argmax(axis=1) == lock_class).mean())
    _, lock_mask_rate = pixel_metrics(model, dataset, lock_class)
    return lock_mask_rate


def up_lp_report(model: Model, clean_test: Dataset, key: EditKey,
                 editor: EditorConfig, edit_seed: int = 0) -> Metrics:
    """Evaluate LP on the clean set and UP on its keyed edit.

    Labels are untouched by the edit; the lock class (assumed to be the
    model's last output) never counts as correct.
    """
    lock_class = model.spec.output_classes - 1
    lp = _task_score(model, clean_test)
    edited = unlock_test_set(clean_test, key, editor, edit_seed)
    up = _task_score(model, edited)
    rate = _lock_rate(model, clean_test, lock_class)

    pca: tuple[float, ...] = ()
    auroc_val = None
    pixel_val = None
    if clean_test.task is TaskKind.CLASSIFICATION:
        pca = per_class_accuracy(model, clean_test, clean_test.num_classes)
    elif clean_test.task is TaskKind.MULTI_LABEL:
        auroc_val = lp
    else:
        pixel_val = lp
    return Metrics(up=up, lp=lp, lock_class_rate=rate, per_class_accuracy=pca,
                   auroc=auroc_val, pixel_accuracy=pixel_val)
