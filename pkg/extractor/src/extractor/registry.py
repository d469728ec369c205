"""Backbone registry: id -> feature extractor + preprocessing record.

Two kinds of entries:

* The default pretrained pair used for real evaluations -- a DINOv2
  giant image encoder and a CLIP ConvNeXt-base text encoder. These need
  downloaded weights and a deep-learning runtime; instantiating them
  without weights raises BackboneUnavailableError with instructions.
* A tiny CPU-only pair for CI and offline smoke tests: a 3x3x3 joint
  RGB color histogram for images and a color-word prototype encoder for
  text. Both land in the same 27-dim space, so cosine-based scores are
  meaningful, and both are exactly deterministic.

Feature tap point is the final pooled representation of each backbone;
preprocessing (resize size, normalization) is recorded per entry.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import BackboneUnavailableError, DataError, UnknownBackboneError

HIST_BINS = 3  # per channel; joint histogram dim = 3**3 = 27
HIST_DIM = HIST_BINS**3

# Prototype RGB for the color words the tiny text encoder understands.
COLOR_PROTOTYPES = {
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "cyan": (0, 255, 255),
    "magenta": (255, 0, 255),
    "white": (255, 255, 255),
    "black": (0, 0, 0),
    "gray": (128, 128, 128),
    "orange": (255, 128, 0),
    "purple": (128, 0, 255),
}

_WORD_RE = re.compile(r"[a-z]+")


@dataclass(frozen=True)
class BackboneSpec:
    """One registry entry: identity, modality, and preprocessing record."""

    backbone_id: str
    modality: str  # "image" | "text"
    feature_dim: int
    preprocessing: str
    make_encoder: Callable[[], Callable]
    image_size: Optional[int] = None


def _joint_histogram(pixels: np.ndarray) -> np.ndarray:
    """Normalized 3x3x3 joint RGB histogram of an (n, 3) uint8 array."""
    bins = (pixels.astype(np.int64) * HIST_BINS) // 256
    index = bins[:, 0] * HIST_BINS**2 + bins[:, 1] * HIST_BINS + bins[:, 2]
    counts = np.bincount(index, minlength=HIST_DIM).astype(np.float64)
    return counts / counts.sum()


def _make_histogram_image_encoder(image_size: int):
    def encode(paths) -> np.ndarray:
        rows = []
        for path in paths:
            try:
                with Image.open(path) as img:
                    rgb = img.convert("RGB").resize(
                        (image_size, image_size), Image.Resampling.BILINEAR
                    )
            except (UnidentifiedImageError, OSError) as exc:
                raise DataError(f"undecodable image {Path(path).name!r}: {exc}") from exc
            pixels = np.asarray(rgb, dtype=np.uint8).reshape(-1, 3)
            rows.append(_joint_histogram(pixels))
        return np.vstack(rows)

    return encode


def _make_color_word_text_encoder():
    def encode(texts) -> np.ndarray:
        rows = []
        for text in texts:
            hits = [
                COLOR_PROTOTYPES[w]
                for w in _WORD_RE.findall(text.lower())
                if w in COLOR_PROTOTYPES
            ]
            if hits:
                # each prototype is a solid color; its histogram is one-hot
                pixels = np.asarray(hits, dtype=np.uint8)
                rows.append(_joint_histogram(pixels))
            else:
                rows.append(np.full(HIST_DIM, 1.0 / HIST_DIM))
        return np.vstack(rows)

    return encode


def _unavailable(backbone_id: str, hint: str):
    def make():
        raise BackboneUnavailableError(
            f"backbone {backbone_id!r} needs pretrained weights that are not "
            f"installed in this environment ({hint}); use the histogram pair "
            f"for offline runs"
        )

    return make


_REGISTRY = {
    spec.backbone_id: spec
    for spec in (
        BackboneSpec(
            backbone_id="dinov2-vit-g-14",
            modality="image",
            feature_dim=1536,
            image_size=224,
            preprocessing="resize shorter side to 256, center-crop 224, "
            "normalize mean (0.485, 0.456, 0.406) std (0.229, 0.224, 0.225); "
            "tap: final pooled token",
            make_encoder=_unavailable("dinov2-vit-g-14", "DINOv2 ViT-g/14 checkpoint"),
        ),
        BackboneSpec(
            backbone_id="convnext-b-clip-text",
            modality="text",
            feature_dim=640,
            preprocessing="CLIP BPE tokenizer, 77-token context; "
            "tap: final pooled text embedding",
            make_encoder=_unavailable(
                "convnext-b-clip-text", "OpenCLIP ConvNeXt-B checkpoint"
            ),
        ),
        BackboneSpec(
            backbone_id="rgb-histogram-27",
            modality="image",
            feature_dim=HIST_DIM,
            image_size=16,
            preprocessing="convert RGB, bilinear resize to 16x16, "
            "3x3x3 joint color histogram normalized to sum 1",
            make_encoder=lambda: _make_histogram_image_encoder(16),
        ),
        BackboneSpec(
            backbone_id="color-words-27",
            modality="text",
            feature_dim=HIST_DIM,
            preprocessing="lowercase word match against a fixed color-word "
            "table, prototypes rendered into the 3x3x3 histogram space",
            make_encoder=lambda: _make_color_word_text_encoder(),
        ),
    )
}

DEFAULT_IMAGE_BACKBONE = "dinov2-vit-g-14"
DEFAULT_TEXT_BACKBONE = "convnext-b-clip-text"


def list_backbones() -> tuple[BackboneSpec, ...]:
    return tuple(_REGISTRY[k] for k in sorted(_REGISTRY))


def get_backbone(backbone_id: str, modality: str) -> BackboneSpec:
    spec = _REGISTRY.get(backbone_id)
    if spec is None:
        known = sorted(_REGISTRY)
        raise UnknownBackboneError(f"unknown backbone id {backbone_id!r}; known: {known}")
    if spec.modality != modality:
        raise DataError(
            f"backbone {backbone_id!r} is a {spec.modality} backbone, "
            f"but a {modality} backbone was requested"
        )
    return spec
