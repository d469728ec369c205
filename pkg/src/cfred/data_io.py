"""On-disk formats: EMB1 embedding containers, dataset manifests, reports.

EMB1 layout (little-endian, 24-byte header):

    offset 0   magic    4 bytes  "EMB1"
    offset 4   version  u16      currently 1
    offset 6   dtype    u16      1 = float32
    offset 8   rows     u64
    offset 16  cols     u64
    offset 24  payload  rows*cols float32, row-major

Manifests are JSON files binding prompts, per-model embedding files,
reference embeddings, and optional human preference data; every
referenced file is validated eagerly so no partially-loaded state
escapes. Report emission is a pure function of the table value.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError, FormatError
from .linalg import FeatureMatrix
from .metrics import HIGHER_BETTER, LOWER_BETTER
from .rank_eval import HumanColumn

MAGIC = b"EMB1"
VERSION = 1
DTYPE_F32 = 1
HEADER_SIZE = 24
HEADER_STRUCT = struct.Struct("<4sHHQQ")

FORMAT_VERSION = f"EMB1 v{VERSION}"


def write_embedding(matrix: FeatureMatrix, path) -> None:
    """Write a feature matrix as an EMB1 file (lossless at f32)."""
    data = matrix.data  # validated finite f32 by FeatureMatrix
    header = HEADER_STRUCT.pack(MAGIC, VERSION, DTYPE_F32, matrix.rows, matrix.cols)
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_embedding_header(path) -> tuple[int, int]:
    """Validate an EMB1 header and return (rows, cols)."""
    raw = Path(path).read_bytes() if not isinstance(path, bytes) else path
    return _parse_header(raw, check_payload=False)[:2]


def _parse_header(raw: bytes, check_payload: bool = True) -> tuple[int, int, bytes]:
    if len(raw) < HEADER_SIZE:
        raise FormatError(
            f"truncated header: file has {len(raw)} bytes, header needs {HEADER_SIZE}",
            byte_offset=len(raw),
        )
    magic, version, dtype, rows, cols = HEADER_STRUCT.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", byte_offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}", byte_offset=4)
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype}, expected {DTYPE_F32}", byte_offset=6)
    if rows < 1:
        raise FormatError("rows must be >= 1", byte_offset=8)
    if cols < 1:
        raise FormatError("cols must be >= 1", byte_offset=16)
    if check_payload:
        expected = rows * cols * 4
        actual = len(raw) - HEADER_SIZE
        if actual != expected:
            raise FormatError(
                f"payload has {actual} bytes, expected {expected} for {rows}x{cols} f32",
                byte_offset=HEADER_SIZE,
            )
    return rows, cols, raw[HEADER_SIZE:]


def read_embedding(path) -> FeatureMatrix:
    """Read an EMB1 file; rejects malformed headers and non-finite data."""
    raw = Path(path).read_bytes()
    rows, cols, payload = _parse_header(raw)
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    if not np.all(np.isfinite(data)):
        bad = np.argwhere(~np.isfinite(data))[0]
        raise FormatError(
            f"non-finite value at row {bad[0]}, col {bad[1]}",
            byte_offset=HEADER_SIZE + 4 * int(bad[0] * cols + bad[1]),
        )
    return FeatureMatrix(data.copy())


@dataclass(frozen=True)
class ModelEntry:
    model_id: str
    embeddings: Path
    sample_scores: dict  # metric name -> per-prompt scores, may be empty


@dataclass(frozen=True)
class DatasetManifest:
    dataset: str
    prompts: tuple  # (id, text) pairs in file order
    text_embeddings: Path
    reference_embeddings: Path
    models: tuple  # ModelEntry
    human: Optional[HumanColumn]
    backbones: dict  # {"image": ..., "text": ...}

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(m.model_id for m in self.models)


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise DataError(f"manifest {where} is missing required key {key!r}")
    return mapping[key]


def _checked_embedding_path(path_str: str, base: Path, owner: str, n_prompts: int) -> Path:
    path = Path(path_str)
    if not path.is_absolute():
        path = base / path
    if not path.is_file():
        raise DataError(f"{owner}: embedding file not found: {path}")
    rows, _ = read_embedding_header(path)
    if rows != n_prompts:
        raise DataError(
            f"{owner}: embedding file {path.name} has {rows} rows, expected {n_prompts}"
        )
    return path


def load_manifest(path) -> DatasetManifest:
    """Load and fully validate a dataset manifest."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest is not valid JSON: {exc}") from exc
    base = path.parent

    dataset = _require(doc, "dataset", "top level")
    raw_prompts = _require(doc, "prompts", "top level")
    if not raw_prompts:
        raise DataError("manifest has no prompts")
    prompts = tuple((_require(p, "id", "prompt"), _require(p, "text", "prompt")) for p in raw_prompts)
    if len({pid for pid, _ in prompts}) != len(prompts):
        raise DataError("duplicate prompt ids in manifest")
    n = len(prompts)

    text_path = _checked_embedding_path(
        _require(doc, "text_embeddings", "top level"), base, "text embeddings", n
    )
    ref_path = _checked_embedding_path(
        _require(doc, "reference_embeddings", "top level"), base, "reference embeddings", n
    )

    models = []
    seen = set()
    for entry in _require(doc, "models", "top level"):
        mid = _require(entry, "id", "model entry")
        if mid in seen:
            raise DataError(f"duplicate model id {mid!r}")
        seen.add(mid)
        emb = _checked_embedding_path(
            _require(entry, "embeddings", "model entry"), base, f"model {mid!r}", n
        )
        scores = {}
        for name, values in (entry.get("sample_scores") or {}).items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != (n,):
                raise DataError(
                    f"model {mid!r}: sample_scores[{name!r}] has {arr.shape[0]} entries, "
                    f"expected {n}"
                )
            scores[name] = arr
        models.append(ModelEntry(mid, emb, scores))
    if not models:
        raise DataError("manifest lists no models")

    human = None
    if doc.get("human") is not None:
        block = doc["human"]
        kind = _require(block, "kind", "human block")
        if kind not in ("rate", "elo"):
            raise DataError(f"unknown human preference kind {kind!r}")
        values = _require(block, "values", "human block")
        missing = [m.model_id for m in models if m.model_id not in values]
        if missing:
            raise DataError(f"human block missing models: {missing}")
        human = HumanColumn(
            tuple(m.model_id for m in models),
            np.array([float(values[m.model_id]) for m in models]),
            kind,
        )

    backbones = doc.get("backbones") or {}
    return DatasetManifest(
        dataset=dataset,
        prompts=prompts,
        text_embeddings=text_path,
        reference_embeddings=ref_path,
        models=tuple(models),
        human=human,
        backbones={"image": backbones.get("image", ""), "text": backbones.get("text", "")},
    )


@dataclass(frozen=True)
class ColumnFooter:
    pearson: float
    pearson_sq: float
    spearman: float
    spearman_sq: float
    rank_accuracy: float


@dataclass(frozen=True)
class TableColumn:
    name: str
    direction: str
    scores: np.ndarray
    ranks: np.ndarray
    has_ties: bool
    footer: Optional[ColumnFooter] = None


@dataclass(frozen=True)
class RankingTable:
    """Models x metrics grid with ranks, optional human column + footers."""

    model_ids: tuple[str, ...]
    columns: tuple  # TableColumn
    human: Optional[HumanColumn] = None
    human_ranks: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.model_ids)
        for col in self.columns:
            if len(col.scores) != n or len(col.ranks) != n:
                raise DataError(f"column {col.name!r} does not cover all models")
            if col.footer is not None and self.human is None:
                raise DataError("footer present without a human block")


def _fmt_score(v: float) -> str:
    return f"{v:.2f}"


def _fmt_corr(v: float) -> str:
    return f"{v:.2f}"


def _fmt_acc(v: float) -> str:
    return f"{v * 100:.1f}"


_FOOTER_ROWS = (
    ("pearson", lambda f: _fmt_corr(f.pearson)),
    ("pearson^2", lambda f: _fmt_corr(f.pearson_sq)),
    ("spearman", lambda f: _fmt_corr(f.spearman)),
    ("spearman^2", lambda f: _fmt_corr(f.spearman_sq)),
    ("rank_acc", lambda f: _fmt_acc(f.rank_accuracy)),
)


def _table_cells(table: RankingTable):
    """Header, body rows, and footer rows as lists of strings."""
    header = ["model"]
    if table.human is not None:
        header += ["human_rank", "human_" + table.human.kind]
    for col in table.columns:
        header += [f"{col.name}_rank", f"{col.name}_score"]

    body = []
    for i, mid in enumerate(table.model_ids):
        row = [mid]
        if table.human is not None:
            row += [str(int(table.human_ranks[i])), _fmt_score(table.human.preference[i])]
        for col in table.columns:
            row += [str(int(col.ranks[i])), _fmt_score(col.scores[i])]
        body.append(row)

    footers = []
    if table.human is not None and any(c.footer is not None for c in table.columns):
        for label, fmt in _FOOTER_ROWS:
            row = [label, "", ""]
            for col in table.columns:
                row += ["", fmt(col.footer) if col.footer is not None else ""]
            footers.append(row)
    return header, body, footers


def emit_report(table: RankingTable, format: str) -> bytes:
    """Render a ranking table as CSV, JSON, or Markdown, deterministically."""
    if format == "csv":
        return _emit_csv(table)
    if format == "json":
        return _emit_json(table)
    if format == "markdown":
        return _emit_markdown(table)
    raise DataError(f"unknown report format {format!r}")


def _emit_csv(table: RankingTable) -> bytes:
    header, body, footers = _table_cells(table)
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    writer.writerow(header)
    for row in body + footers:
        writer.writerow(row)
    return buf.getvalue().encode("utf-8")


def _emit_json(table: RankingTable) -> bytes:
    doc = {
        "models": [
            {
                "id": mid,
                **(
                    {
                        "human_rank": int(table.human_ranks[i]),
                        "human_" + table.human.kind: _fmt_score(table.human.preference[i]),
                    }
                    if table.human is not None
                    else {}
                ),
                "metrics": {
                    col.name: {
                        "rank": int(col.ranks[i]),
                        "score": _fmt_score(col.scores[i]),
                    }
                    for col in table.columns
                },
            }
            for i, mid in enumerate(table.model_ids)
        ],
    }
    if table.human is not None and any(c.footer is not None for c in table.columns):
        doc["footer"] = {
            col.name: {
                "pearson": _fmt_corr(col.footer.pearson),
                "pearson^2": _fmt_corr(col.footer.pearson_sq),
                "spearman": _fmt_corr(col.footer.spearman),
                "spearman^2": _fmt_corr(col.footer.spearman_sq),
                "rank_acc": _fmt_acc(col.footer.rank_accuracy),
            }
            for col in table.columns
            if col.footer is not None
        }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _emit_markdown(table: RankingTable) -> bytes:
    header, body, footers = _table_cells(table)
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(" --- " for _ in header) + "|",
    ]
    for row in body + footers:
        lines.append("| " + " | ".join(row) + " |")
    return ("\n".join(lines) + "\n").encode("utf-8")
