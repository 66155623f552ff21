"""Core image/label/dataset types shared by the whole pipeline.

All types are immutable after construction (arrays are frozen via
``writeable=False``) so they can be shared freely across threads.
Pixel values live in [0, 1] as float32; integer-pixel sources must be
divided by 255 before constructing an :class:`Image`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, Union

import numpy as np


class TaskKind(Enum):
    CLASSIFICATION = "classification"
    MULTI_LABEL = "multi_label"
    SEGMENTATION = "segmentation"


def hash64(*parts: bytes, person: bytes = b"") -> int:
    """Stable 64-bit hash of the concatenated byte parts (blake2b/8).

    ``person`` is the blake2 personalization string, used as a domain
    separator between unrelated hash uses.
    """
    h = hashlib.blake2b(digest_size=8, person=person)
    for p in parts:
        h.update(p)
    return int.from_bytes(h.digest(), "little")


def mix_seed(seed: int, sample_id: int) -> int:
    """Derive a per-sample 64-bit seed from (global seed, sample id).

    Order-independent by construction: the value depends only on the id,
    never on the sample's position in the dataset.
    """
    return hash64(
        int(seed).to_bytes(8, "little", signed=False),
        int(sample_id).to_bytes(8, "little", signed=False),
    )


def philox(*key_words: int) -> np.random.Generator:
    """Counter-based generator keyed by up to two 64-bit words."""
    words = [int(w) & 0xFFFFFFFFFFFFFFFF for w in key_words]
    while len(words) < 2:
        words.append(0)
    return np.random.Generator(np.random.Philox(key=words[:2]))


def _frozen_f32(data: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(data, dtype=np.float32)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Image:
    """Dense H x W x C tensor of float32 intensities in [0, 1]."""

    array: np.ndarray

    def __post_init__(self):
        arr = self.array
        if arr.ndim != 3:
            raise ValueError(f"image must be HxWxC, got shape {arr.shape}")
        h, w, c = arr.shape
        if h < 1 or w < 1 or c not in (1, 3):
            raise ValueError(f"bad image dimensions {arr.shape}; channels must be 1 or 3")
        arr = _frozen_f32(arr)
        if arr.size and (float(arr.min()) < 0.0 or float(arr.max()) > 1.0):
            raise ValueError("pixel values outside [0, 1]; clamp explicitly before construction")
        object.__setattr__(self, "array", arr)

    @property
    def height(self) -> int:
        return self.array.shape[0]

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def channels(self) -> int:
        return self.array.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.array.shape


def clamp01(arr: np.ndarray) -> np.ndarray:
    """Explicit clamp to [0, 1]; the only sanctioned way to coerce range."""
    return np.clip(arr, np.float32(0.0), np.float32(1.0))


def image_from_array(arr: np.ndarray, clamp: bool = False) -> Image:
    arr = np.asarray(arr, dtype=np.float32)
    if clamp:
        arr = clamp01(arr)
    return Image(arr)


def image_digest(image: Image) -> int:
    """64-bit digest of dimensions plus the byte-exact float payload."""
    h, w, c = image.shape
    header = np.array([h, w, c], dtype="<u4").tobytes()
    payload = np.ascontiguousarray(image.array, dtype="<f4").tobytes()
    return hash64(header, payload)


@dataclass(frozen=True)
class ClassId:
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("class id must be non-negative")


@dataclass(frozen=True)
class MultiLabel:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1:
            raise ValueError("multi-label bits must be a 1-D vector")
        if bits.size and bits.max() > 1:
            raise ValueError("multi-label entries must be 0/1")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return int(self.bits.size)


@dataclass(frozen=True)
class SegMask:
    mask: np.ndarray

    def __post_init__(self):
        mask = np.ascontiguousarray(self.mask, dtype=np.int32)
        if mask.ndim != 2:
            raise ValueError("segmentation mask must be HxW")
        if mask.size and mask.min() < 0:
            raise ValueError("mask class ids must be non-negative")
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)


Label = Union[ClassId, MultiLabel, SegMask]


def label_digest(label: Label) -> int:
    if isinstance(label, ClassId):
        return hash64(b"C", int(label.value).to_bytes(8, "little"))
    if isinstance(label, MultiLabel):
        return hash64(b"M", label.bits.tobytes())
    if isinstance(label, SegMask):
        hh, ww = label.mask.shape
        return hash64(b"S", np.array([hh, ww], dtype="<u4").tobytes(),
                      np.ascontiguousarray(label.mask, dtype="<i4").tobytes())
    raise TypeError(f"unknown label type {type(label)!r}")


def labels_equal(a: Label, b: Label) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, ClassId):
        return a.value == b.value
    if isinstance(a, MultiLabel):
        return a.bits.shape == b.bits.shape and bool(np.all(a.bits == b.bits))
    return a.mask.shape == b.mask.shape and bool(np.all(a.mask == b.mask))


@dataclass(frozen=True)
class Sample:
    id: int
    image: Image
    label: Label
    edited: bool = False
    relabeled: bool = False

    def __post_init__(self):
        if self.id < 0 or self.id > 0xFFFFFFFFFFFFFFFF:
            raise ValueError("sample id must fit in u64")
        if self.edited and self.relabeled:
            raise ValueError("a sample cannot be both edited and relabeled")
        if isinstance(self.label, SegMask):
            if self.label.mask.shape != (self.image.height, self.image.width):
                raise ValueError("segmentation mask dims must equal the image dims")


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of labeled samples for one task.

    ``num_classes`` counts the classes labels may take; for a locked
    dataset this already includes the appended lock class.
    """

    samples: tuple[Sample, ...]
    task: TaskKind
    num_classes: int
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        samples = tuple(self.samples)
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        ids = [s.id for s in samples]
        if len(set(ids)) != len(ids):
            raise ValueError("sample ids must be unique")
        if samples:
            c = samples[0].image.channels
            if any(s.image.channels != c for s in samples):
                raise ValueError("all images must share the channel count")
        for s in samples:
            self._check_label(s.label)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "_index", {s.id: i for i, s in enumerate(samples)})

    def _check_label(self, label: Label):
        if self.task is TaskKind.CLASSIFICATION:
            if not isinstance(label, ClassId):
                raise ValueError("classification labels must be ClassId")
            if label.value >= self.num_classes:
                raise ValueError(f"class id {label.value} >= num_classes {self.num_classes}")
        elif self.task is TaskKind.MULTI_LABEL:
            if not isinstance(label, MultiLabel):
                raise ValueError("multi-label labels must be MultiLabel")
        elif self.task is TaskKind.SEGMENTATION:
            if not isinstance(label, SegMask):
                raise ValueError("segmentation labels must be SegMask")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def by_id(self, sample_id: int) -> Sample:
        return self.samples[self._index[sample_id]]

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.samples)

    def replace_samples(self, samples: Iterable[Sample], num_classes: int | None = None) -> "Dataset":
        return Dataset(tuple(samples), self.task,
                       self.num_classes if num_classes is None else num_classes)


def dataset_digest(dataset: Dataset) -> int:
    """Order-sensitive digest over ids, flags, labels and pixel payloads."""
    h = hashlib.blake2b(digest_size=8)
    h.update(dataset.task.value.encode())
    h.update(int(dataset.num_classes).to_bytes(4, "little"))
    for s in dataset.samples:
        h.update(int(s.id).to_bytes(8, "little"))
        h.update(bytes([s.edited, s.relabeled]))
        h.update(int(label_digest(s.label)).to_bytes(8, "little"))
        h.update(int(image_digest(s.image)).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def make_dataset(images: Sequence[np.ndarray], labels: Sequence[Label],
                 task: TaskKind, num_classes: int) -> Dataset:
    """Assemble a dataset with sequential ids starting at 0."""
    if len(images) != len(labels):
        raise ValueError("images and labels must have equal length")
    samples = tuple(
        Sample(i, image_from_array(img), lab) for i, (img, lab) in enumerate(zip(images, labels))
    )
    return Dataset(samples, task, num_classes)
