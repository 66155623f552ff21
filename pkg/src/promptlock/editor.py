"""Deterministic prompt-keyed image editor and the blending operator.

A key (prompt text plus optional secret salt) hashes to one of five edit
families and a family-specific parameter vector; the same key always
yields the same transform. Per-sample seeds perturb only phase/jitter
terms, so edits differ sample to sample while family and strength stay
dataset-wide.

Param vector layouts (all float64, ranges enforced at derivation):
  color_affine    [gain_r, gain_g, gain_b, bias_r, bias_g, bias_b, mix_angle]
                  gains in [0.6, 1.4], biases in [-0.15, 0.15], angle in [0, pi/6]
  texture_overlay [amplitude, frequency, phase]
                  amplitude in [0.15, 0.35], frequency in [2, 8] cycles/image,
                  phase in [0, 2pi)
  patch_object    [sprite_index, size_frac, corner]
                  sprite in {0..15}, size_frac in [0.12, 0.20] of min(H, W),
                  corner in {0=TL, 1=TR, 2=BL, 3=BR}
  grid_warp       [k, max_disp]   k in {8, 16, 32}, displacement <= 4 px
  tone_curve      [exponent, saturation]
                  exponent in [0.5, 2.0], saturation in [0.7, 1.3]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Image, clamp01, hash64, philox

FAMILIES = ("color_affine", "texture_overlay", "patch_object", "grid_warp", "tone_curve")

_PARAM_LENGTHS = {
    "color_affine": 7,
    "texture_overlay": 3,
    "patch_object": 3,
    "grid_warp": 2,
    "tone_curve": 2,
}

_RANGES = {
    "color_affine": [(0.6, 1.4)] * 3 + [(-0.15, 0.15)] * 3 + [(0.0, math.pi / 6)],
    "texture_overlay": [(0.15, 0.35), (2.0, 8.0), (0.0, 2 * math.pi)],
    "patch_object": [(0, 15), (0.12, 0.20), (0, 3)],
    "grid_warp": [(2, 64), (0.0, 4.0)],
    "tone_curve": [(0.5, 2.0), (0.7, 1.3)],
}


@dataclass(frozen=True)
class EditKey:
    """Key prompt text plus an optional secret salt."""

    prompt: str
    salt: Optional[str] = None

    def digest(self) -> int:
        h_parts = [self.prompt.encode("utf-8"), b"\x1f"]
        if self.salt:
            h_parts.append(self.salt.encode("utf-8"))
        return hash64(*h_parts, person=b"editkey")


@dataclass(frozen=True)
class EditParams:
    family: str
    params: np.ndarray
    derivation_digest: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        arr = np.ascontiguousarray(self.params, dtype=np.float64)
        if arr.shape != (_PARAM_LENGTHS[self.family],):
            raise ValueError(
                f"{self.family} expects {_PARAM_LENGTHS[self.family]} params, got {arr.shape}")
        for v, (lo, hi) in zip(arr, _RANGES[self.family]):
            if not (lo <= v <= hi):
                raise ValueError(f"{self.family} param {v} outside [{lo}, {hi}]")
        arr.flags.writeable = False
        object.__setattr__(self, "params", arr)


@dataclass(frozen=True)
class EditorConfig:
    kind: str = "procedural"  # "procedural" | "external"
    gamma: float = 0.5
    steps: int = 5
    guidance: float = 4.5
    image_guidance: float = 1.5
    endpoint: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("procedural", "external"):
            raise ValueError(f"unknown editor kind {self.kind!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if self.kind == "external" and not self.endpoint:
            raise ValueError("external editor requires an endpoint")


def derive_edit_params(key: EditKey) -> EditParams:
    """Map a key to a family and in-range parameters, deterministically.

    Draws are floored away from the identity transform so every key
    produces a visible edit; identity parameters remain constructible by
    hand for tests.
    """
    digest = key.digest()
    family = FAMILIES[digest % 5]
    rng = philox(digest, 0xED17)

    if family == "color_affine":
        # each channel is either amplified, lightly attenuated, or strongly
        # attenuated; the two attenuation levels sit far apart because
        # attenuation is what moves the white point of bright scenes
        # (amplification mostly vanishes into the clamp there), and at
        # least one channel is always strongly attenuated so every key
        # produces a committed color shift
        levels = {0: (0.08, 0.40), 1: (-0.16, -0.12), 2: (-0.40, -0.36)}
        choice = rng.integers(0, 3, size=3)
        if not np.any(choice == 2):
            choice[int(rng.integers(0, 3))] = 2
        gains = 1.0 + np.array([rng.uniform(*levels[int(c)]) for c in choice])
        bias_sign = np.where(rng.random(3) < 0.5, -1.0, 1.0)
        biases = bias_sign * rng.uniform(0.02, 0.15, size=3)
        angle = rng.uniform(0.0, math.pi / 6)
        params = np.concatenate([gains, biases, [angle]])
    elif family == "texture_overlay":
        params = np.array([
            rng.uniform(0.15, 0.35),
            rng.uniform(2.0, 8.0),
            rng.uniform(0.0, 2 * math.pi),
        ])
    elif family == "patch_object":
        params = np.array([
            float(rng.integers(0, 16)),
            rng.uniform(0.18, 0.20),
            float(rng.integers(0, 4)),
        ])
    elif family == "grid_warp":
        params = np.array([
            float([8, 16, 32][rng.integers(0, 3)]),
            rng.uniform(2.5, 4.0),
        ])
    else:  # tone_curve
        exp_sign = -1.0 if rng.random() < 0.5 else 1.0
        exponent = math.exp(exp_sign * rng.uniform(math.log(1.3), math.log(2.0)))
        sat_sign = -1.0 if rng.random() < 0.5 else 1.0
        saturation = 1.0 + sat_sign * rng.uniform(0.15, 0.3)
        params = np.array([exponent, saturation])

    return EditParams(family, params, digest)


def identity_params(family: str = "color_affine") -> EditParams:
    """Hand-built no-op parameters (reachable only by explicit construction)."""
    if family == "color_affine":
        return EditParams(family, np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]), 0)
    raise ValueError(f"no identity defined for family {family!r}")


# ---------------------------------------------------------------------------
# family kernels (all float32 in, float32 out)

def _mix_matrix(angle: float) -> np.ndarray:
    """Rotation of RGB space about the gray axis (1,1,1)/sqrt(3)."""
    kx = ky = kz = 1.0 / math.sqrt(3.0)
    c, s = math.cos(angle), math.sin(angle)
    k_cross = np.array([[0, -kz, ky], [kz, 0, -kx], [-ky, kx, 0]])
    k_outer = np.array([[kx * kx, kx * ky, kx * kz],
                        [ky * kx, ky * ky, ky * kz],
                        [kz * kx, kz * ky, kz * kz]])
    return (c * np.eye(3) + s * k_cross + (1 - c) * k_outer).astype(np.float32)


def _apply_color_affine(arr: np.ndarray, params: np.ndarray, jitter_rng) -> np.ndarray:
    c = arr.shape[2]
    gains = params[:3].astype(np.float32)
    # bias jitter shrinks toward zero so hand-built identity params stay exact
    bias_scale = (0.9 + 0.1 * jitter_rng.random(3)).astype(np.float32)
    biases = params[3:6].astype(np.float32) * bias_scale
    angle = float(params[6])
    out = arr * gains[:c] + biases[:c]
    if c == 3 and angle != 0.0:
        out = out @ _mix_matrix(angle).T
    return clamp01(out)


def _apply_texture_overlay(arr: np.ndarray, params: np.ndarray, jitter_rng) -> np.ndarray:
    h, w, _ = arr.shape
    amplitude = np.float32(params[0])
    frequency = np.float32(params[1])
    phase = np.float32(params[2]) + np.float32(jitter_rng.uniform(0.0, 2 * math.pi))
    yy = (np.arange(h, dtype=np.float32) + np.float32(0.5)) / np.float32(h)
    xx = (np.arange(w, dtype=np.float32) + np.float32(0.5)) / np.float32(w)
    diag = (yy[:, None] + xx[None, :]) * np.float32(0.5)
    pattern = np.sin(np.float32(2 * math.pi) * frequency * diag + phase)
    return clamp01(arr + amplitude * pattern[:, :, None])


_SPRITE_PATTERNS = 8  # solid, border, plus, cross, disc, h-stripes, v-stripes, checker


def _sprite_mask(pattern: int, px: int) -> np.ndarray:
    yy, xx = np.mgrid[0:px, 0:px]
    t = max(1, px // 5)
    if pattern == 0:
        return np.ones((px, px), dtype=bool)
    if pattern == 1:
        return (yy < t) | (yy >= px - t) | (xx < t) | (xx >= px - t)
    if pattern == 2:
        mid = px // 2
        return (np.abs(yy - mid) < t) | (np.abs(xx - mid) < t)
    if pattern == 3:
        return (np.abs(yy - xx) < t) | (np.abs(yy + xx - (px - 1)) < t)
    if pattern == 4:
        mid = (px - 1) / 2.0
        return (yy - mid) ** 2 + (xx - mid) ** 2 <= (px / 2.0) ** 2
    if pattern == 5:
        return (yy // t) % 2 == 0
    if pattern == 6:
        return (xx // t) % 2 == 0
    return ((yy // t) + (xx // t)) % 2 == 0


def render_sprite(index: int, px: int) -> np.ndarray:
    """One of 16 procedural sprites as a (px, px, 3) float32 tile."""
    rng = philox(0x5EED5, int(index))
    fg = rng.uniform(0.75, 1.0, size=3).astype(np.float32)
    bg = rng.uniform(0.0, 0.25, size=3).astype(np.float32)
    mask = _sprite_mask(int(index) % _SPRITE_PATTERNS, px)
    tile = np.where(mask[:, :, None], fg, bg)
    return tile.astype(np.float32)


def patch_rect(params: EditParams, shape: tuple[int, int, int],
               sample_seed: int) -> tuple[int, int, int, int]:
    """Stamp rectangle (row0, col0, size, size) for a patch_object edit."""
    if params.family != "patch_object":
        raise ValueError("patch_rect applies to patch_object params only")
    h, w, _ = shape
    px = max(2, round(float(params.params[1]) * min(h, w)))
    px = min(px, h, w)
    corner = int(params.params[2])
    rng = philox(params.derivation_digest, sample_seed)
    jy, jx = (int(v) for v in rng.integers(0, 2, size=2))  # 0-1 px inward jitter
    margin = 1
    r0 = margin + jy if corner in (0, 1) else h - px - margin - jy
    c0 = margin + jx if corner in (0, 2) else w - px - margin - jx
    r0 = int(np.clip(r0, 0, h - px))
    c0 = int(np.clip(c0, 0, w - px))
    return r0, c0, px, px


def _apply_patch_object(arr: np.ndarray, ep: EditParams, sample_seed: int) -> np.ndarray:
    r0, c0, ph, pw = patch_rect(ep, arr.shape, sample_seed)
    sprite = render_sprite(int(ep.params[0]), ph)
    out = arr.copy()
    out[r0:r0 + ph, c0:c0 + pw] = sprite[:, :, :arr.shape[2]]
    return out


def _bilinear_gather(arr: np.ndarray, src_y: np.ndarray, src_x: np.ndarray) -> np.ndarray:
    h, w, _ = arr.shape
    src_y = np.clip(src_y, np.float32(0.0), np.float32(h - 1))
    src_x = np.clip(src_x, np.float32(0.0), np.float32(w - 1))
    y0 = np.floor(src_y).astype(np.int64)
    x0 = np.floor(src_x).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (src_y - y0.astype(np.float32))[:, :, None]
    fx = (src_x - x0.astype(np.float32))[:, :, None]
    top = arr[y0, x0] * (1 - fx) + arr[y0, x1] * fx
    bot = arr[y1, x0] * (1 - fx) + arr[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _apply_grid_warp(arr: np.ndarray, ep: EditParams, sample_seed: int) -> np.ndarray:
    h, w, _ = arr.shape
    k = int(ep.params[0])
    max_disp = float(ep.params[1])
    field_rng = philox(ep.derivation_digest, 0xF1E1D)
    control = field_rng.uniform(-max_disp, max_disp, size=(k, k, 2)).astype(np.float32)

    # bilinear upsample of the control grid to a dense per-pixel flow
    gy = np.linspace(0.0, k - 1.0, h, dtype=np.float32)
    gx = np.linspace(0.0, k - 1.0, w, dtype=np.float32)
    iy0 = np.floor(gy).astype(np.int64)
    ix0 = np.floor(gx).astype(np.int64)
    iy1 = np.minimum(iy0 + 1, k - 1)
    ix1 = np.minimum(ix0 + 1, k - 1)
    fy = (gy - iy0)[:, None, None]
    fx = (gx - ix0)[None, :, None]
    c00 = control[np.ix_(iy0, ix0)]
    c01 = control[np.ix_(iy0, ix1)]
    c10 = control[np.ix_(iy1, ix0)]
    c11 = control[np.ix_(iy1, ix1)]
    flow = (c00 * (1 - fy) * (1 - fx) + c01 * (1 - fy) * fx
            + c10 * fy * (1 - fx) + c11 * fy * fx)

    jitter_rng = philox(ep.derivation_digest, sample_seed)
    shift = jitter_rng.uniform(-0.5, 0.5, size=2).astype(np.float32)

    yy = np.arange(h, dtype=np.float32)[:, None]
    xx = np.arange(w, dtype=np.float32)[None, :]
    src_y = yy - (flow[:, :, 0] + shift[0])
    src_x = xx - (flow[:, :, 1] + shift[1])
    return clamp01(_bilinear_gather(arr, src_y.astype(np.float32), src_x.astype(np.float32)))


def _apply_tone_curve(arr: np.ndarray, params: np.ndarray, jitter_rng) -> np.ndarray:
    exponent = np.float32(params[0] * (0.98 + 0.02 * jitter_rng.random()))
    saturation = np.float32(params[1])
    out = np.power(arr, exponent)
    if arr.shape[2] == 3:
        luma = out.mean(axis=2, keepdims=True, dtype=np.float32)
        out = luma + saturation * (out - luma)
    return clamp01(out)


def apply_edit(image: Image, params: EditParams, sample_seed: int) -> Image:
    """Apply an edit family at full strength; pure in all three arguments."""
    arr = image.array
    if params.family == "patch_object":
        out = _apply_patch_object(arr, params, sample_seed)
    elif params.family == "grid_warp":
        out = _apply_grid_warp(arr, params, sample_seed)
    else:
        jitter_rng = philox(params.derivation_digest, sample_seed)
        if params.family == "color_affine":
            out = _apply_color_affine(arr, params.params, jitter_rng)
        elif params.family == "texture_overlay":
            out = _apply_texture_overlay(arr, params.params, jitter_rng)
        else:
            out = _apply_tone_curve(arr, params.params, jitter_rng)
    return Image(out)


def blend(original: Image, edited: Image, gamma: float) -> Image:
    """Convex pixel blend: (1 - gamma) * original + gamma * edited.

    Exact at gamma=0 and gamma=1; clamped to [0, 1] in between.
    """
    if original.shape != edited.shape:
        raise ValueError(f"shape mismatch: {original.shape} vs {edited.shape}")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    g = np.float32(gamma)
    out = (np.float32(1.0) - g) * original.array + g * edited.array
    return Image(clamp01(out))


def edit_with_params(image: Image, params: EditParams, gamma: float,
                     sample_seed: int) -> Image:
    return blend(image, apply_edit(image, params, sample_seed), gamma)


def edit_with_key(image: Image, key: EditKey, cfg: EditorConfig,
                  sample_seed: int) -> Image:
    """Full keyed edit: derive params from the key, apply, then blend."""
    if cfg.kind == "procedural":
        return edit_with_params(image, derive_edit_params(key), cfg.gamma, sample_seed)
    from .client import external_edit  # deferred: transport stack only when used
    edited = external_edit(cfg.endpoint, image, key, cfg, sample_seed)
    return blend(image, edited, cfg.gamma)
