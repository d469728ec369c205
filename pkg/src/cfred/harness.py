"""End-to-end orchestration: manifest -> metric columns -> ranking table.

Also hosts the backbone-attribute group-by used for ablation studies
over (image backbone x text backbone) correlation grids. Parallelism is
confined to this module; results are collected in manifest order so the
output is identical for 1 and N workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data_io import (
    ColumnFooter,
    DatasetManifest,
    RankingTable,
    TableColumn,
    read_embedding,
)
from .errors import CfredError, DataError
from .linalg import accumulate_joint_moments, accumulate_moments
from .metrics import (
    HIGHER_BETTER,
    LOWER_BETTER,
    cfred_unconditional_form,
    clipscore,
    cmmd,
    frechet_distance,
)
from .rank_eval import (
    HumanColumn,
    ModelScoreColumn,
    SampleScoreTensor,
    aggregate_sample_ranks,
    correlation,
    rank_accuracy,
    rank_models,
)

# Metric columns computed from embeddings, in fixed report order.
EMBEDDING_METRICS = (
    ("fd", LOWER_BETTER),
    ("cfred", LOWER_BETTER),
    ("cmmd", LOWER_BETTER),
    ("clipscore", HIGHER_BETTER),
)

ABLATION_AXES = ("training_data", "image_size", "model_size", "feature_dim", "zero_shot")


@dataclass(frozen=True)
class BackboneAttribute:
    """Ablation attributes of one image backbone."""

    backbone_id: str
    training_data: str
    image_size: int
    model_size: str
    feature_dim: int
    zero_shot: Optional[float] = None

    def __post_init__(self):
        if self.feature_dim < 1:
            raise DataError(f"backbone {self.backbone_id!r}: feature_dim must be >= 1")

    def bucket(self, axis: str) -> Optional[str]:
        if axis not in ABLATION_AXES:
            raise DataError(f"unknown ablation axis {axis!r}, expected one of {ABLATION_AXES}")
        value = getattr(self, axis)
        if value is None:
            return None
        return str(value)


@dataclass(frozen=True)
class CorrelationGrid:
    """(image backbone, text backbone) -> correlation; cells may be absent."""

    values: dict

    def __post_init__(self):
        for (img, txt), v in self.values.items():
            if not -1.0 <= float(v) <= 1.0:
                raise DataError(f"correlation out of [-1, 1] at ({img!r}, {txt!r}): {v}")

    @property
    def image_backbones(self) -> tuple[str, ...]:
        return tuple(sorted({img for img, _ in self.values}))


def ablate(grid: CorrelationGrid, attrs, axis: str) -> dict:
    """Mean correlation per bucket of the chosen image-backbone axis.

    Returns bucket -> {"mean": float, "count": int}. Buckets with no
    cells are simply absent. Every image backbone in the grid must have
    an attribute record.
    """
    by_id = {a.backbone_id: a for a in attrs}
    missing = [img for img in grid.image_backbones if img not in by_id]
    if missing:
        raise DataError(f"no attribute record for image backbones: {missing}")

    sums: dict[str, list] = {}
    for (img, _), value in sorted(grid.values.items()):
        bucket = by_id[img].bucket(axis)
        if bucket is None:
            continue
        sums.setdefault(bucket, []).append(float(value))
    return {
        bucket: {"mean": float(np.mean(vals)), "count": len(vals)}
        for bucket, vals in sorted(sums.items())
    }


def _model_metrics(manifest: DatasetManifest, entry, text, ref, ref_moments, real_joint):
    try:
        gen = read_embedding(entry.embeddings)
        values = {
            "fd": frechet_distance(ref_moments, accumulate_moments(gen)),
            "cfred": cfred_unconditional_form(real_joint, accumulate_joint_moments(text, gen)),
            "cmmd": cmmd(ref, gen),
        }
        if text.cols == gen.cols:
            values["clipscore"] = clipscore(text, gen)
    except CfredError as exc:
        raise exc.__class__(f"model {entry.model_id!r}: {exc}") from exc
    return entry.model_id, values


def compute_metric_columns(manifest: DatasetManifest, workers: int = 1):
    """All metric columns for a manifest: embedding metrics + sample scores.

    The clipscore column requires text and image embeddings in one joint
    space; it is omitted when their dimensions differ (FD/cFreD/CMMD do
    not need a joint space).
    """
    text = read_embedding(manifest.text_embeddings)
    ref = read_embedding(manifest.reference_embeddings)
    ref_moments = accumulate_moments(ref)
    real_joint = accumulate_joint_moments(text, ref)

    if workers <= 1:
        results = [
            _model_metrics(manifest, entry, text, ref, ref_moments, real_joint)
            for entry in manifest.models
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_model_metrics, manifest, entry, text, ref, ref_moments, real_joint)
                for entry in manifest.models
            ]
            results = [f.result() for f in futures]
    by_model = dict(results)
    model_ids = manifest.model_ids

    active_metrics = [
        (name, direction)
        for name, direction in EMBEDDING_METRICS
        if all(name in by_model[mid] for mid in model_ids)
    ]
    columns = [
        ModelScoreColumn(
            model_ids,
            np.array([by_model[mid][name] for mid in model_ids]),
            direction,
        )
        for name, direction in active_metrics
    ]

    score_names = sorted({name for m in manifest.models for name in m.sample_scores})
    for name in score_names:
        missing = [m.model_id for m in manifest.models if name not in m.sample_scores]
        if missing:
            raise DataError(f"sample_scores {name!r} missing for models: {missing}")
        tensor = SampleScoreTensor(
            model_ids,
            np.column_stack([
                next(m for m in manifest.models if m.model_id == mid).sample_scores[name]
                for mid in model_ids
            ]),
        )
        columns.append(aggregate_sample_ranks(tensor, HIGHER_BETTER))
    return columns, [name for name, _ in active_metrics] + score_names


def rank_columns(
    names, columns, human: Optional[HumanColumn]
) -> RankingTable:
    """Assemble a ranking table from score columns, with human footers."""
    model_ids = columns[0].model_ids
    human_ranks = None
    if human is not None:
        if tuple(human.model_ids) != tuple(model_ids):
            raise DataError("human block covers a different model set than the columns")
        human_ranks = rank_models(human.as_column()).ranks

    table_columns = []
    for name, col in zip(names, columns):
        if tuple(col.model_ids) != tuple(model_ids):
            raise DataError(f"column {name!r} covers a different model set")
        ranking = rank_models(col)
        footer = None
        if human is not None:
            pearson = correlation(col, human, "pearson")
            spearman = correlation(col, human, "spearman")
            footer = ColumnFooter(
                pearson=pearson.value,
                pearson_sq=pearson.squared,
                spearman=spearman.value,
                spearman_sq=spearman.squared,
                rank_accuracy=rank_accuracy(ranking.ranks, human_ranks),
            )
        table_columns.append(
            TableColumn(
                name=name,
                direction=col.direction,
                scores=col.scores,
                ranks=ranking.ranks,
                has_ties=ranking.has_ties,
                footer=footer,
            )
        )
    return RankingTable(
        model_ids=tuple(model_ids),
        columns=tuple(table_columns),
        human=human,
        human_ranks=human_ranks,
    )


def run_benchmark(manifest: DatasetManifest, workers: int = 1) -> RankingTable:
    """Compute every metric column for a manifest and rank the models.

    A failure for any single model aborts the whole run; no partial
    tables are produced.
    """
    columns, names = compute_metric_columns(manifest, workers=workers)
    return rank_columns(names, columns, manifest.human)
