"""Client side of the editor wire protocol.

Talks to any service speaking protocol version 1, over HTTP
(``http://host:port``) or a spawned subprocess exchanging
newline-delimited documents (``stdio:<command line>``).
"""

from __future__ import annotations

import json
import shlex
import subprocess
import urllib.error
import urllib.request

from .core import Image
from .editor import EditKey, EditorConfig
from .wire import (PROTOCOL_VERSION, RemoteEditError, WireError, dump_document,
                   edit_request, parse_response)


class TransportError(Exception):
    """The endpoint could not be reached or closed the stream early."""


class ShapeMismatchError(Exception):
    """The service returned an image with different dimensions."""


def _post_document(endpoint: str, path: str, doc: dict, timeout: float) -> str:
    url = endpoint.rstrip("/") + path
    data = dump_document(doc).encode("utf-8")
    req = urllib.request.Request(url, data=data,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.read().decode("utf-8")
    except urllib.error.HTTPError as exc:
        # structured errors ride on HTTP error codes too
        try:
            return exc.read().decode("utf-8")
        except Exception:
            raise TransportError(f"HTTP {exc.code} from {url}") from exc
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        raise TransportError(f"cannot reach {url}: {exc}") from exc


def _stdio_roundtrip(command: str, doc: dict, timeout: float) -> str:
    proc = subprocess.Popen(shlex.split(command), stdin=subprocess.PIPE,
                            stdout=subprocess.PIPE)
    try:
        out, _ = proc.communicate(dump_document(doc).encode("utf-8") + b"\n",
                                  timeout=timeout)
    except subprocess.TimeoutExpired as exc:
        proc.kill()
        raise TransportError(f"stdio editor timed out: {command}") from exc
    line = out.decode("utf-8").splitlines()
    if not line:
        raise TransportError(f"stdio editor produced no response: {command}")
    return line[0]


def _roundtrip(endpoint: str, doc: dict, timeout: float) -> str:
    if endpoint.startswith("stdio:"):
        return _stdio_roundtrip(endpoint[len("stdio:"):], doc, timeout)
    return _post_document(endpoint, "/edit", doc, timeout)


def external_edit(endpoint: str, image: Image, key: EditKey, cfg: EditorConfig,
                  seed: int, mode: str = "edit", timeout: float = 60.0) -> Image:
    """Request one edit from an external editor service."""
    doc = edit_request(image, key, cfg, seed, mode=mode)
    text = _roundtrip(endpoint, doc, timeout)
    out = parse_response(text)
    if out.shape != image.shape:
        raise ShapeMismatchError(
            f"service returned {out.shape}, expected {image.shape}")
    return out


def fetch_capabilities(endpoint: str, timeout: float = 10.0) -> dict:
    """Capabilities document from a running service."""
    if endpoint.startswith("stdio:"):
        text = _stdio_roundtrip(endpoint[len("stdio:"):],
                                {"version": PROTOCOL_VERSION, "mode": "capabilities"},
                                timeout)
        return json.loads(text)
    url = endpoint.rstrip("/") + "/capabilities"
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))
    except (urllib.error.URLError, OSError) as exc:
        raise TransportError(f"cannot reach {url}: {exc}") from exc


def serve_check(endpoint: str, timeout: float = 10.0) -> dict:
    """Probe a service: capabilities plus an echo round-trip.

    Returns a report dict; raises on protocol violations.
    """
    import numpy as np

    from .core import image_digest

    caps = fetch_capabilities(endpoint, timeout)
    if caps.get("version") != PROTOCOL_VERSION:
        raise WireError(f"service speaks version {caps.get('version')!r}, "
                        f"client needs {PROTOCOL_VERSION}")
    probe = Image(np.linspace(0.0, 1.0, 4 * 4 * 3, dtype=np.float32).reshape(4, 4, 3))
    echoed = external_edit(endpoint, probe, EditKey(""), EditorConfig(), 0,
                           mode="echo", timeout=timeout)
    if image_digest(echoed) != image_digest(probe):
        raise WireError("echo mode did not preserve the image digest")
    return {
        "endpoint": endpoint,
        "version": caps.get("version"),
        "modes": caps.get("modes", []),
        "max_image_size": caps.get("max_image_size"),
        "echo_ok": True,
    }
