"""MLTD container format: bit-exact dataset serialization with a CRC32 trailer.

Layout (little-endian):
  magic "MLTD" | version u16 | task u8 | num_classes u32 | count u64
  per sample: id u64 | flags u8 | H u32 | W u32 | C u8 | label block | f32 pixels
  label block: tag u8 (0=ClassId u32, 1=MultiLabel u32 len + bytes,
               2=SegMask u32 H + u32 W + i32 cells)
  trailer: CRC32 (u32) of everything after the magic
"""

from __future__ import annotations

import io
import struct
import zlib
from pathlib import Path
from typing import Union

import numpy as np

from .core import ClassId, Dataset, Image, Label, MultiLabel, Sample, SegMask, TaskKind

MAGIC = b"MLTD"
FORMAT_VERSION = 1

_TASK_TAGS = {TaskKind.CLASSIFICATION: 0, TaskKind.MULTI_LABEL: 1, TaskKind.SEGMENTATION: 2}
_TASK_FROM_TAG = {v: k for k, v in _TASK_TAGS.items()}


class MltdError(Exception):
    """Base error for MLTD container problems."""


class MltdFormatError(MltdError):
    """Malformed header or unknown tags."""


class MltdTruncatedError(MltdError):
    """Payload ended before its declared length."""


class MltdChecksumError(MltdError):
    """Trailing CRC32 does not match the payload."""


def _write_label(buf: io.BytesIO, label: Label):
    if isinstance(label, ClassId):
        buf.write(struct.pack("<BI", 0, label.value))
    elif isinstance(label, MultiLabel):
        buf.write(struct.pack("<BI", 1, len(label)))
        buf.write(label.bits.tobytes())
    elif isinstance(label, SegMask):
        hh, ww = label.mask.shape
        buf.write(struct.pack("<BII", 2, hh, ww))
        buf.write(np.ascontiguousarray(label.mask, dtype="<i4").tobytes())
    else:
        raise TypeError(f"unknown label type {type(label)!r}")


def dumps(dataset: Dataset) -> bytes:
    body = io.BytesIO()
    body.write(struct.pack("<HBIQ", FORMAT_VERSION, _TASK_TAGS[dataset.task],
                           dataset.num_classes, len(dataset)))
    for s in dataset.samples:
        flags = (1 if s.edited else 0) | (2 if s.relabeled else 0)
        h, w, c = s.image.shape
        body.write(struct.pack("<QBIIB", s.id, flags, h, w, c))
        _write_label(body, s.label)
        body.write(np.ascontiguousarray(s.image.array, dtype="<f4").tobytes())
    payload = body.getvalue()
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    return MAGIC + payload + struct.pack("<I", crc)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MltdTruncatedError(
                f"payload truncated: wanted {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data: bytes) -> Dataset:
    if len(data) < len(MAGIC) + 4 or data[:4] != MAGIC:
        raise MltdFormatError("bad magic bytes: not an MLTD container")
    payload, (stored_crc,) = data[4:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != stored_crc:
        raise MltdChecksumError("CRC32 mismatch: container is corrupt")

    r = _Reader(payload)
    version, task_tag, num_classes, count = r.unpack("<HBIQ")
    if version != FORMAT_VERSION:
        raise MltdFormatError(f"unsupported format version {version}")
    if task_tag not in _TASK_FROM_TAG:
        raise MltdFormatError(f"unknown task tag {task_tag}")

    samples = []
    for _ in range(count):
        sid, flags, h, w, c = r.unpack("<QBIIB")
        (label_tag,) = r.unpack("<B")
        if label_tag == 0:
            (value,) = r.unpack("<I")
            label: Label = ClassId(value)
        elif label_tag == 1:
            (length,) = r.unpack("<I")
            label = MultiLabel(np.frombuffer(r.take(length), dtype=np.uint8))
        elif label_tag == 2:
            mh, mw = r.unpack("<II")
            cells = np.frombuffer(r.take(mh * mw * 4), dtype="<i4").reshape(mh, mw)
            label = SegMask(cells)
        else:
            raise MltdFormatError(f"unknown label tag {label_tag}")
        pixels = np.frombuffer(r.take(h * w * c * 4), dtype="<f4").reshape(h, w, c)
        samples.append(Sample(sid, Image(pixels), label,
                              edited=bool(flags & 1), relabeled=bool(flags & 2)))
    if r.pos != len(payload):
        raise MltdFormatError(f"{len(payload) - r.pos} trailing bytes after last sample")
    return Dataset(tuple(samples), _TASK_FROM_TAG[task_tag], num_classes)


def save_dataset(dataset: Dataset, path: Union[str, Path]):
    Path(path).write_bytes(dumps(dataset))


def load_dataset(path: Union[str, Path]) -> Dataset:
    return loads(Path(path).read_bytes())
