"""Editor wire protocol, version 1.

One request, one response, each a single UTF-8 JSON document. Images
travel as base64-encoded little-endian float32 payloads alongside their
dimensions. Transported over HTTP POST /edit or newline-delimited
documents on a byte stream.
"""

from __future__ import annotations

import base64
import json
from typing import Optional

import numpy as np

from .core import Image
from .editor import EditKey, EditorConfig

PROTOCOL_VERSION = 1

ERROR_BAD_REQUEST = "bad-request"
ERROR_BAD_VERSION = "bad-version"
ERROR_BAD_IMAGE = "bad-image"
ERROR_INTERNAL = "internal"


class WireError(Exception):
    """Malformed or version-incompatible protocol document."""


def encode_image(image: Image) -> dict:
    payload = np.ascontiguousarray(image.array, dtype="<f4").tobytes()
    return {
        "h": image.height,
        "w": image.width,
        "c": image.channels,
        "data": base64.b64encode(payload).decode("ascii"),
    }


def decode_image(doc: dict) -> Image:
    try:
        h, w, c = int(doc["h"]), int(doc["w"]), int(doc["c"])
        raw = base64.b64decode(doc["data"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise WireError(f"bad image document: {exc}") from exc
    expected = h * w * c * 4
    if len(raw) != expected:
        raise WireError(f"image payload is {len(raw)} bytes, dims require {expected}")
    arr = np.frombuffer(raw, dtype="<f4").reshape(h, w, c)
    return Image(np.clip(arr, 0.0, 1.0))


def edit_request(image: Image, key: EditKey, cfg: EditorConfig, seed: int,
                 mode: str = "edit") -> dict:
    doc = {
        "version": PROTOCOL_VERSION,
        "mode": mode,
        "prompt": key.prompt,
        "steps": cfg.steps,
        "guidance": cfg.guidance,
        "image_guidance": cfg.image_guidance,
        "seed": int(seed),
        "image": encode_image(image),
    }
    if key.salt is not None:
        doc["salt"] = key.salt
    return doc


def parse_response(text: str) -> Image:
    """Decode a response document, raising on protocol or remote errors."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WireError(f"response is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise WireError("response must be a JSON object")
    if doc.get("version") != PROTOCOL_VERSION:
        raise WireError(f"protocol version mismatch: got {doc.get('version')!r}, "
                        f"expected {PROTOCOL_VERSION}")
    if "error" in doc:
        err = doc["error"]
        raise RemoteEditError(str(err.get("code", "unknown")),
                              str(err.get("message", "")))
    if "image" not in doc:
        raise WireError("response carries neither image nor error")
    return decode_image(doc["image"])


class RemoteEditError(Exception):
    """The service answered with a structured error document."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


def dump_document(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))
