"""Embedding extraction: images + prompts -> EMB1 files and manifests."""

__version__ = "0.1.0"

from .emb1 import write_emb1
from .errors import (
    BackboneUnavailableError,
    DataError,
    ExtractorError,
    UnknownBackboneError,
)
from .jobs import ExtractionJob, extract, load_prompts
from .registry import (
    DEFAULT_IMAGE_BACKBONE,
    DEFAULT_TEXT_BACKBONE,
    BackboneSpec,
    get_backbone,
    list_backbones,
)

__all__ = [
    "BackboneSpec",
    "BackboneUnavailableError",
    "DEFAULT_IMAGE_BACKBONE",
    "DEFAULT_TEXT_BACKBONE",
    "DataError",
    "ExtractionJob",
    "ExtractorError",
    "UnknownBackboneError",
    "extract",
    "get_backbone",
    "list_backbones",
    "load_prompts",
    "write_emb1",
    "__version__",
]
