"""Small differentiable classifiers with an explicit flat weight vector.

Three architectures cover the three task kinds: a linear map and a
one-hidden-layer ReLU MLP for (multi-label) classification, and a
per-position linear head for segmentation (each pixel owns a tiny
channels -> classes map, so spatial behavior is learnable).
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .core import hash64, philox

ARCHS = ("linear", "mlp", "per_pixel_linear")


@dataclass(frozen=True)
class ModelSpec:
    arch: str
    input_dims: tuple[int, int, int]
    output_classes: int
    hidden_units: int = 0
    init_seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown arch {self.arch!r}")
        if self.output_classes < 2:
            raise ValueError("output_classes must be at least 2")
        if self.arch == "mlp" and self.hidden_units < 1:
            raise ValueError("mlp needs hidden_units >= 1")

    def layout(self) -> list[tuple[str, tuple[int, ...]]]:
        h, w, c = self.input_dims
        d, k = h * w * c, self.output_classes
        if self.arch == "linear":
            return [("w", (d, k)), ("b", (k,))]
        if self.arch == "mlp":
            m = self.hidden_units
            return [("w1", (d, m)), ("b1", (m,)), ("w2", (m, k)), ("b2", (k,))]
        return [("w", (h, w, c, k)), ("b", (h, w, k))]

    def weight_count(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.layout())


@dataclass
class Model:
    spec: ModelSpec
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.spec.weight_count(),):
            raise ValueError(
                f"weight vector has {self.weights.size} entries, "
                f"spec needs {self.spec.weight_count()}")

    def unpack(self) -> dict[str, np.ndarray]:
        """Views into the flat vector, keyed by layer name."""
        out, pos = {}, 0
        for name, shape in self.spec.layout():
            size = int(np.prod(shape))
            out[name] = self.weights[pos:pos + size].reshape(shape)
            pos += size
        return out


def init_model(spec: ModelSpec) -> Model:
    """Scaled-uniform fan-in init for weight matrices, zero biases."""
    rng = philox(spec.init_seed, 0x1217)
    chunks = []
    for name, shape in spec.layout():
        size = int(np.prod(shape))
        if name.startswith("b"):
            chunks.append(np.zeros(size))
        else:
            # fan-in: input rows for dense layers, channel count per pixel
            fan_in = shape[0] if len(shape) == 2 else shape[2]
            bound = 1.0 / np.sqrt(fan_in)
            chunks.append(rng.uniform(-bound, bound, size=size))
    return Model(spec, np.concatenate(chunks))


def forward(model: Model, images: np.ndarray) -> np.ndarray:
    """Logits for a batch of images (n, H, W, C); per-sample pure.

    Returns (n, K) for linear/mlp and (n, H, W, K) for per_pixel_linear.
    """
    spec = model.spec
    if images.ndim == 3:
        images = images[None]
    if images.shape[1:] != spec.input_dims:
        raise ValueError(f"image dims {images.shape[1:]} do not match spec {spec.input_dims}")
    x = images.astype(np.float64, copy=False)
    p = model.unpack()
    if spec.arch == "linear":
        return x.reshape(len(x), -1) @ p["w"] + p["b"]
    if spec.arch == "mlp":
        h = np.maximum(x.reshape(len(x), -1) @ p["w1"] + p["b1"], 0.0)
        return h @ p["w2"] + p["b2"]
    return np.einsum("nhwc,hwck->nhwk", x, p["w"], optimize=True) + p["b"]


# ---------------------------------------------------------------------------
# checkpoint container: JSON header, NUL separator, f32 payload, CRC32 trailer

class CheckpointError(Exception):
    pass


def save_checkpoint(model: Model, path: Union[str, Path], train_digest: str = ""):
    spec = model.spec
    header = json.dumps({
        "format": 1,
        "arch": spec.arch,
        "input_dims": list(spec.input_dims),
        "output_classes": spec.output_classes,
        "hidden_units": spec.hidden_units,
        "init_seed": spec.init_seed,
        "train_digest": train_digest,
    }, sort_keys=True).encode("utf-8")
    payload = model.weights.astype("<f4").tobytes()
    crc = zlib.crc32(header + b"\x00" + payload) & 0xFFFFFFFF
    Path(path).write_bytes(header + b"\x00" + payload + struct.pack("<I", crc))


def load_checkpoint(path: Union[str, Path]) -> tuple[Model, str]:
    data = Path(path).read_bytes()
    sep = data.find(b"\x00")
    if sep < 0 or len(data) < sep + 5:
        raise CheckpointError("missing header separator")
    header_bytes, rest = data[:sep], data[sep + 1:]
    payload, (crc,) = rest[:-4], struct.unpack("<I", rest[-4:])
    if zlib.crc32(header_bytes + b"\x00" + payload) & 0xFFFFFFFF != crc:
        raise CheckpointError("checkpoint CRC mismatch")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"bad checkpoint header: {exc}") from exc
    if header.get("format") != 1:
        raise CheckpointError(f"unsupported checkpoint format {header.get('format')}")
    spec = ModelSpec(header["arch"], tuple(header["input_dims"]),
                     header["output_classes"], header["hidden_units"],
                     header["init_seed"])
    weights = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return Model(spec, weights), header.get("train_digest", "")


def model_digest(model: Model) -> int:
    spec_bytes = json.dumps([model.spec.arch, model.spec.input_dims,
                             model.spec.output_classes, model.spec.hidden_units],
                            sort_keys=True).encode()
    return hash64(spec_bytes, model.weights.tobytes())
