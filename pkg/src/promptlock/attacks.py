"""Adaptive unlocking attacks and classic backdoor-trigger locks.

Attack entry points receive only what a real adversary would hold: the
model, public editor settings, permitted data, and candidate prompts.
The defender's salt and true prompt never cross this interface.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Dataset, Image, Sample, TaskKind, clamp01, philox
from .editor import (EditKey, EditParams, EditorConfig, apply_edit, blend,
                     derive_edit_params, edit_with_params)
from .histograms import histogram_l1, pixel_histograms
from .locking import LockLabelPolicy, LockedDataset, lock_dataset_with
from .metrics import Metrics, up_lp_report
from .models import Model

# ---------------------------------------------------------------------------
# prompt pools

POOL_CATEGORIES = ("random-objects", "style-transfer", "traditional-adjustment",
                   "empty", "meaningless-strings")


@dataclass(frozen=True)
class PromptPool:
    """Named prompt lists an attacker might guess from."""

    categories: dict[str, tuple[str, ...]]

    def __post_init__(self):
        if not any(self.categories.values()):
            raise ValueError("prompt pool must not be empty")
        unknown = set(self.categories) - set(POOL_CATEGORIES)
        if unknown:
            raise ValueError(f"unknown pool categories: {sorted(unknown)}")

    def entries(self) -> list[tuple[str, str]]:
        """(category, prompt) pairs in a fixed category-then-list order."""
        out = []
        for cat in POOL_CATEGORIES:
            for prompt in self.categories.get(cat, ()):
                out.append((cat, prompt))
        return out

    def __len__(self) -> int:
        return sum(len(v) for v in self.categories.values())


def default_attack_pool() -> PromptPool:
    """The shipped 25-prompt guessing pool (public-editor attacker)."""
    return PromptPool({
        "random-objects": (
            "with baseball in the background",
            "with bow tie in the background",
            "with mailbox in the background",
            "with parachute in the background",
            "with beer bottle in the background",
            "with koala in the background",
        ),
        "style-transfer": (
            "Watercolor painting effect",
            "With Van Gogh's painting style",
            "With cyberpunk style",
            "Picasso's cubist interpretation",
            "Pastel tones overlay",
            "with oil pastel",
        ),
        "traditional-adjustment": (
            "Boost color saturation",
            "Sharpen image detail",
            "Balance contrast levels",
            "Adjust white balance for warmth",
            "Enhance shadows and highlights",
            "Increase exposure slightly",
        ),
        "empty": ("",),
        "meaningless-strings": (
            "#9T8oN07y1%6$",
            "@de%^fwd#oi",
            "qzx-vrb-113",
            "zz@@!!pp00",
            "~~^^``||",
            "0xDEADBEEF cafe",
        ),
    })


# ---------------------------------------------------------------------------
# random-prompt attack

@dataclass(frozen=True)
class PromptAttackResult:
    rows: tuple[dict, ...]       # per-candidate: category, prompt, up_rp, lp
    max_up: float
    mean_up: float
    best_prompt: str


def random_prompt_attack(model: Model, clean_test: Dataset, pool: PromptPool,
                         editor_cfg: EditorConfig,
                         extra_keys: Sequence[EditKey] = ()) -> PromptAttackResult:
    """Try every pool prompt (saltless) as an unlock key and measure UP.

    ``extra_keys`` lets a harness bound the attack with the legitimate
    key; the pool itself never carries salts.
    """
    candidates: list[tuple[str, EditKey]] = [
        (cat, EditKey(prompt)) for cat, prompt in pool.entries()
    ]
    candidates += [("extra", k) for k in extra_keys]
    if not candidates:
        raise ValueError("no candidate prompts")
    rows = []
    for cat, key in candidates:
        metrics = up_lp_report(model, clean_test, key, editor_cfg)
        rows.append({
            "category": cat,
            "prompt": key.prompt,
            "salted": key.salt is not None,
            "up_rp": metrics.up,
            "family": derive_edit_params(key).family,
        })
    ups = [r["up_rp"] for r in rows]
    best = int(np.argmax(ups))
    return PromptAttackResult(tuple(rows), max(ups), float(np.mean(ups)),
                              rows[best]["prompt"])


# ---------------------------------------------------------------------------
# surrogate-transform attack

def candidate_lattice() -> list[EditParams]:
    """Documented search lattice over all five families (< 10^4 points).

    Candidate derivation digests are synthesized from the lattice index so
    seed-dependent families (grid_warp) enumerate a fixed set of fields.
    """
    out: list[EditParams] = []

    def digest_for(index: int) -> int:
        return 0xA77AC000 + index

    gains = (0.7, 1.0, 1.3)
    biases = (-0.1, 0.0, 0.1)
    angles = (0.0, math.pi / 9, math.pi / 6)
    for combo in itertools.product(gains, gains, gains, biases, biases, biases, angles):
        out.append(EditParams("color_affine", np.array(combo), digest_for(len(out))))
    for amp in (0.15, 0.25, 0.35):
        for freq in (2.0, 4.0, 6.0, 8.0):
            for phase in (0.0, math.pi / 2, math.pi, 3 * math.pi / 2):
                out.append(EditParams("texture_overlay", np.array([amp, freq, phase]),
                                      digest_for(len(out))))
    for sprite in range(16):
        for size in (0.12, 0.16, 0.20):
            for corner in range(4):
                out.append(EditParams("patch_object",
                                      np.array([float(sprite), size, float(corner)]),
                                      digest_for(len(out))))
    for k in (8, 16, 32):
        for disp in (1.0, 2.0, 3.0, 4.0):
            for variant in range(8):
                out.append(EditParams("grid_warp", np.array([float(k), disp]),
                                      digest_for(len(out) + variant * 7919)))
    for exponent in (0.5, 0.66, 0.8, 1.25, 1.5, 2.0):
        for sat in (0.7, 0.85, 1.0, 1.15, 1.3):
            out.append(EditParams("tone_curve", np.array([exponent, sat]),
                                  digest_for(len(out))))
    return out


@dataclass(frozen=True)
class SurrogateAttackResult:
    fitted: EditParams
    up_sp: float
    score: float
    scores: tuple[float, ...]    # per-candidate histogram distances


def surrogate_prompt_attack(model: Model, leaked_edited: Sequence[Image],
                            attacker_clean: Sequence[Image], clean_test: Dataset,
                            editor_cfg: EditorConfig,
                            lattice: Optional[Sequence[EditParams]] = None,
                            attack_seed: int = 0x5A17) -> SurrogateAttackResult:
    """Fit a surrogate transform to leaked edited images, then unlock with it.

    Scores every lattice candidate by the 32-bin per-channel histogram L1
    distance between candidate-edited attacker images and the leaked set;
    ties break toward the lowest candidate index.
    """
    if len(leaked_edited) == 0:
        raise ValueError("leaked set is empty")
    if len(attacker_clean) == 0:
        raise ValueError("attacker needs held-out clean images")
    lattice = list(lattice) if lattice is not None else candidate_lattice()

    target_hist = pixel_histograms(leaked_edited)
    seeds = [int(s) for s in philox(attack_seed, 0).integers(0, 2 ** 63, len(attacker_clean))]
    scores = []
    for params in lattice:
        edited = [edit_with_params(img, params, editor_cfg.gamma, seeds[i])
                  for i, img in enumerate(attacker_clean)]
        dist = float(histogram_l1(pixel_histograms(edited), target_hist).mean())
        scores.append(dist)
    best = int(np.argmin(scores))
    fitted = lattice[best]

    edited_test = tuple(
        Sample(s.id, edit_with_params(s.image, fitted, editor_cfg.gamma,
                                      int(philox(attack_seed, s.id).integers(0, 2 ** 63))),
               s.label, edited=True)
        for s in clean_test.samples
    )
    unlocked = Dataset(edited_test, clean_test.task, clean_test.num_classes)
    from .metrics import _task_score
    up_sp = _task_score(model, unlocked)
    return SurrogateAttackResult(fitted, up_sp, scores[best], tuple(scores))


# ---------------------------------------------------------------------------
# backdoor-trigger locks

TRIGGER_KINDS = ("patch_badnet", "blend_pattern", "warp_grid", "fixed_filter")

_BLEND_PATTERN_SEED = 0xB1E4D


@dataclass(frozen=True)
class TriggerSpec:
    kind: str
    size_px: int = 5           # patch_badnet
    ratio: float = 0.2         # blend_pattern
    k: int = 32                # warp_grid

    def __post_init__(self):
        if self.kind not in TRIGGER_KINDS:
            raise ValueError(f"unknown trigger kind {self.kind!r}")
        if self.kind == "blend_pattern" and not 0.0 < self.ratio < 1.0:
            raise ValueError("blend ratio must lie strictly inside (0, 1)")
        if self.kind == "warp_grid" and self.k < 2:
            raise ValueError("warp grid needs k >= 2")
        if self.kind == "patch_badnet" and self.size_px < 1:
            raise ValueError("patch size must be positive")


def blend_pattern_image(height: int, width: int, channels: int) -> Image:
    """The fixed pseudorandom full-image pattern used by blend triggers."""
    rng = philox(_BLEND_PATTERN_SEED, 0)
    return Image(rng.random((height, width, channels)).astype(np.float32))


def apply_trigger(image: Image, trigger: TriggerSpec) -> Image:
    arr = image.array
    if trigger.kind == "patch_badnet":
        px = min(trigger.size_px, image.height, image.width)
        out = arr.copy()
        out[-px:, -px:, :] = 1.0  # solid white square, bottom-right
        return Image(out)
    if trigger.kind == "blend_pattern":
        pattern = blend_pattern_image(*image.shape)
        r = np.float32(trigger.ratio)
        return Image(clamp01((np.float32(1.0) - r) * arr + r * pattern.array))
    if trigger.kind == "warp_grid":
        params = EditParams("grid_warp", np.array([float(trigger.k), 4.0]),
                            0xDA7A0 + trigger.k)
        return apply_edit(image, params, 0)
    # fixed_filter: one hard-coded warm tone curve
    params = EditParams("tone_curve", np.array([0.7, 1.25]), 0xF117E6)
    return apply_edit(image, params, 0)


def backdoor_lock_dataset(dataset: Dataset, trigger: TriggerSpec, alpha: float,
                          seed: int,
                          policy: LockLabelPolicy = LockLabelPolicy()) -> LockedDataset:
    """Same partition/relabel contract as keyed locking, trigger as the edit."""
    fn = lambda image, s: apply_trigger(image, trigger)
    extra = {"kind": "backdoor", "trigger": trigger.kind}
    return lock_dataset_with(dataset, fn, alpha, seed, policy, extra)
