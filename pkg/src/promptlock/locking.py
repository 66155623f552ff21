"""Turn a private dataset into a locked training set.

A large fraction alpha of the samples is edited with the key while their
labels stay put (the learning subset); the remainder keeps its images
untouched but is relabeled to a freshly appended lock class (the locking
subset). The merged result trains a model that only works on keyed
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import (ClassId, Dataset, Image, MultiLabel, Sample, SegMask, TaskKind,
                   dataset_digest, image_digest, mix_seed, philox)
from .editor import EditKey, EditorConfig, edit_with_key


class LockingError(ValueError):
    """Configuration makes locking impossible (degenerate subsets)."""


@dataclass(frozen=True)
class LockLabelPolicy:
    """Per-task relabeling rules for the locking subset.

    multi_label_clear: drop all original positives when appending the lock
    bit, so clean inputs carry no usable signal. Kept as a knob because the
    right multi-label rule is application-specific.
    """

    multi_label_clear: bool = True


@dataclass(frozen=True)
class LockConfig:
    key: EditKey
    alpha: float = 0.95
    gamma: float = 0.5
    seed: int = 0
    editor: EditorConfig = field(default_factory=EditorConfig)
    lock_label_policy: LockLabelPolicy = field(default_factory=LockLabelPolicy)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise LockingError("alpha must lie strictly inside (0, 1)")
        if not 0.0 <= self.gamma <= 1.0:
            raise LockingError("gamma must lie in [0, 1]")
        if self.editor.gamma != self.gamma:
            object.__setattr__(self, "editor", replace(self.editor, gamma=self.gamma))


@dataclass(frozen=True)
class LockedDataset:
    dataset: Dataset
    edited_ids: frozenset[int]
    relabeled_ids: frozenset[int]
    report: dict

    def __post_init__(self):
        if self.edited_ids & self.relabeled_ids:
            raise ValueError("edited and relabeled id sets must be disjoint")
        if self.edited_ids | self.relabeled_ids != set(self.dataset.ids):
            raise ValueError("edited and relabeled ids must cover the dataset")


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def partition(dataset: Dataset, alpha: float, seed: int) -> tuple[frozenset[int], frozenset[int]]:
    """Uniform split of sample ids into (edited, relabeled), |edited| = round(alpha*N)."""
    n = len(dataset)
    m = round_half_up(alpha * n)
    if m < 1:
        raise LockingError(f"alpha={alpha} leaves the edited subset empty for N={n}")
    if n - m < 1:
        raise LockingError(
            f"alpha={alpha} leaves the locking subset empty for N={n}: locking impossible")
    ids = np.array(sorted(dataset.ids), dtype=np.uint64)
    perm = philox(seed, 0x10CB).permutation(n)
    edited = frozenset(int(i) for i in ids[perm[:m]])
    relabeled = frozenset(int(i) for i in ids[perm[m:]])
    return edited, relabeled


def lock_mask_rect(height: int, width: int) -> tuple[int, int, int, int]:
    """Centered lock rectangle (row0, col0, h, w) of floor(H/2) x floor(W/2) cells."""
    h, w = height // 2, width // 2
    return (height - h) // 2, (width - w) // 2, h, w


def modify_label(label, task: TaskKind, num_classes: int,
                 policy: LockLabelPolicy = LockLabelPolicy()):
    """Relabel one sample into the lock class for its task."""
    if task is TaskKind.CLASSIFICATION:
        if not isinstance(label, ClassId):
            raise ValueError("classification expects ClassId labels")
        return ClassId(num_classes)
    if task is TaskKind.MULTI_LABEL:
        if not isinstance(label, MultiLabel):
            raise ValueError("multi-label expects MultiLabel labels")
        bits = np.zeros(len(label) + 1, dtype=np.uint8)
        if not policy.multi_label_clear:
            bits[:len(label)] = label.bits
        bits[-1] = 1
        return MultiLabel(bits)
    if task is TaskKind.SEGMENTATION:
        if not isinstance(label, SegMask):
            raise ValueError("segmentation expects SegMask labels")
        hh, ww = label.mask.shape
        mask = np.zeros((hh, ww), dtype=np.int32)
        r0, c0, rh, rw = lock_mask_rect(hh, ww)
        mask[r0:r0 + rh, c0:c0 + rw] = num_classes
        return SegMask(mask)
    raise ValueError(f"unknown task {task!r}")


EditFn = Callable[[Image, int], Image]  # (image, sample_seed) -> edited image


def lock_dataset_with(dataset: Dataset, edit_fn: EditFn, alpha: float, seed: int,
                      policy: LockLabelPolicy = LockLabelPolicy(),
                      report_extra: Optional[dict] = None) -> LockedDataset:
    """Shared locking core: partition, edit one side, relabel the other.

    Output ordering is canonical (sorted by id) so per-sample work may run
    in any order without changing the result.
    """
    if len(dataset) == 0:
        raise LockingError("cannot lock an empty dataset")
    edited_ids, relabeled_ids = partition(dataset, alpha, seed)

    new_samples = []
    for s in sorted(dataset.samples, key=lambda s: s.id):
        if s.id in edited_ids:
            edited = edit_fn(s.image, mix_seed(seed, s.id))
            new_samples.append(Sample(s.id, edited, s.label, edited=True))
        else:
            new_label = modify_label(s.label, dataset.task, dataset.num_classes, policy)
            new_samples.append(Sample(s.id, s.image, new_label, relabeled=True))

    locked = Dataset(tuple(new_samples), dataset.task, dataset.num_classes + 1)
    report = {
        "n_samples": len(dataset),
        "n_edited": len(edited_ids),
        "n_relabeled": len(relabeled_ids),
        "alpha": alpha,
        "seed": seed,
        "task": dataset.task.value,
        "num_classes_before": dataset.num_classes,
        "num_classes_after": locked.num_classes,
        "input_digest": f"{dataset_digest(dataset):016x}",
        "output_digest": f"{dataset_digest(locked):016x}",
    }
    report.update(report_extra or {})
    return LockedDataset(locked, edited_ids, relabeled_ids, report)


def lock_dataset(dataset: Dataset, cfg: LockConfig) -> LockedDataset:
    """Key-prompt locking: edit alpha*N samples with the key, relabel the rest."""
    from .editor import derive_edit_params

    params = derive_edit_params(cfg.key)
    edit_fn: EditFn = lambda image, s: edit_with_key(image, cfg.key, cfg.editor, s)
    extra = {
        "gamma": cfg.gamma,
        "family": params.family,
        "key_digest": f"{params.derivation_digest:016x}",
        "kind": "keyed",
    }
    return lock_dataset_with(dataset, edit_fn, cfg.alpha, cfg.seed,
                             cfg.lock_label_policy, extra)


def unlock_test_set(dataset: Dataset, key: EditKey, editor: EditorConfig,
                    seed: int = 0) -> Dataset:
    """Edit every test image with the key (no partition at test time)."""
    samples = tuple(
        Sample(s.id, edit_with_key(s.image, key, editor, mix_seed(seed, s.id)),
               s.label, edited=True)
        for s in dataset.samples
    )
    return Dataset(samples, dataset.task, dataset.num_classes)


def verify_locked(original: Dataset, locked: LockedDataset) -> list[str]:
    """Structural checks of the locking contract; returns human-readable violations."""
    problems = []
    ds = locked.dataset
    for s in ds.samples:
        before = original.by_id(s.id)
        if s.id in locked.edited_ids:
            if not s.edited or s.relabeled:
                problems.append(f"sample {s.id}: bad flags for edited subset")
            from .core import labels_equal
            if not labels_equal(s.label, before.label):
                problems.append(f"sample {s.id}: edited sample's label changed")
        else:
            if not s.relabeled or s.edited:
                problems.append(f"sample {s.id}: bad flags for relabeled subset")
            if image_digest(s.image) != image_digest(before.image):
                problems.append(f"sample {s.id}: relabeled sample's image changed")
    return problems
