"""Extraction jobs: (images, prompts, backbones) -> EMB1 files + manifest.

Row order in every emitted file is the prompt-id sort order, so the text
file, the reference file, and each model file are aligned row-for-row.
All outputs are deterministic given fixed backbone weights and
preprocessing; running the same job twice produces byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .emb1 import write_emb1
from .errors import DataError
from .registry import get_backbone

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".webp")


@dataclass(frozen=True)
class ExtractionJob:
    """One run: prompts plus per-model image directories and backbone ids."""

    prompts: tuple  # (id, text) pairs
    model_images: dict  # model id -> image directory
    image_backbone: str
    text_backbone: str
    out_dir: Path
    reference_images: Optional[Path] = None
    dataset: str = "extracted"
    batch_size: int = 64
    device: str = "cpu"

    def __post_init__(self):
        prompts = tuple((str(pid), str(text)) for pid, text in self.prompts)
        if not prompts:
            raise DataError("job has no prompts")
        if len({pid for pid, _ in prompts}) != len(prompts):
            raise DataError("duplicate prompt ids")
        if not self.model_images:
            raise DataError("job lists no models")
        if self.batch_size < 1:
            raise DataError(f"batch size must be >= 1, got {self.batch_size}")
        object.__setattr__(self, "prompts", tuple(sorted(prompts)))
        object.__setattr__(self, "out_dir", Path(self.out_dir))


def load_prompts(path) -> tuple:
    """Prompt file: JSON list of {"id": ..., "text": ...}."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"prompt file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"prompt file is not valid JSON: {exc}") from exc
    if not isinstance(doc, list) or not doc:
        raise DataError("prompt file must be a non-empty JSON list")
    try:
        return tuple((entry["id"], entry["text"]) for entry in doc)
    except (TypeError, KeyError) as exc:
        raise DataError("every prompt entry needs 'id' and 'text'") from exc


def _resolve_images(directory: Path, prompt_ids, owner: str) -> list:
    """One image per prompt id, matched by file stem."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{owner}: image directory not found: {directory}")
    by_stem: dict = {}
    for entry in sorted(directory.iterdir()):
        if entry.suffix.lower() in IMAGE_SUFFIXES:
            if entry.stem in by_stem:
                raise DataError(f"{owner}: multiple images for prompt id {entry.stem!r}")
            by_stem[entry.stem] = entry
    missing = [pid for pid in prompt_ids if pid not in by_stem]
    if missing:
        raise DataError(f"{owner}: no image for prompt ids {missing}")
    extra = sorted(set(by_stem) - set(prompt_ids))
    if extra:
        raise DataError(f"{owner}: images without a prompt: {extra}")
    return [by_stem[pid] for pid in prompt_ids]


def _batched(encode, items, batch_size):
    chunks = [
        encode(items[start : start + batch_size])
        for start in range(0, len(items), batch_size)
    ]
    return np.vstack(chunks)


def extract(job: ExtractionJob) -> Path:
    """Run a job; returns the path of the written manifest fragment."""
    image_spec = get_backbone(job.image_backbone, "image")
    text_spec = get_backbone(job.text_backbone, "text")
    encode_images = image_spec.make_encoder()
    encode_texts = text_spec.make_encoder()

    prompt_ids = [pid for pid, _ in job.prompts]
    texts = [text for _, text in job.prompts]

    # Resolve and validate every input before writing anything.
    sources = {}
    if job.reference_images is not None:
        sources["__reference__"] = _resolve_images(
            job.reference_images, prompt_ids, "reference"
        )
    for model_id, directory in sorted(job.model_images.items()):
        sources[model_id] = _resolve_images(directory, prompt_ids, f"model {model_id!r}")

    job.out_dir.mkdir(parents=True, exist_ok=True)
    write_emb1(_batched(encode_texts, texts, job.batch_size), job.out_dir / "text.emb1")

    manifest = {
        "dataset": job.dataset,
        "prompts": [{"id": pid, "text": text} for pid, text in job.prompts],
        "text_embeddings": "text.emb1",
        "models": [],
        "backbones": {"image": image_spec.backbone_id, "text": text_spec.backbone_id},
    }
    for model_id, paths in sources.items():
        features = _batched(encode_images, paths, job.batch_size)
        if model_id == "__reference__":
            write_emb1(features, job.out_dir / "reference.emb1")
            manifest["reference_embeddings"] = "reference.emb1"
        else:
            write_emb1(features, job.out_dir / f"{model_id}.emb1")
            manifest["models"].append({"id": model_id, "embeddings": f"{model_id}.emb1"})

    manifest_path = job.out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
