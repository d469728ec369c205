"""Agreement between metric columns and human preference data.

Rankings from raw scores, pair-concordance rank accuracy (global and
per-item), Pearson/Spearman correlation with their squares, win-rate
matchups between candidate rankings, and the two-metric linear
combination baseline.

Rank vectors use 1 = best throughout; comparisons only ever use the
ordering, so any lower-is-better score vector is accepted where a rank
vector is expected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, DimensionMismatchError, UndefinedCorrelationError
from .metrics import HIGHER_BETTER, LOWER_BETTER


@dataclass(frozen=True)
class ModelScoreColumn:
    """One metric's score per model, with its better-direction."""

    model_ids: tuple[str, ...]
    scores: np.ndarray
    direction: str

    def __post_init__(self):
        ids = tuple(self.model_ids)
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if len(ids) != scores.shape[0]:
            raise DimensionMismatchError("model_ids and scores disagree in length")
        if len(ids) < 1:
            raise DataError("a score column needs at least 1 model")
        if len(set(ids)) != len(ids):
            raise DataError("duplicate model ids in score column")
        if not np.all(np.isfinite(scores)):
            raise DataError("score column contains a non-finite value")
        if self.direction not in (LOWER_BETTER, HIGHER_BETTER):
            raise DataError(f"unknown direction {self.direction!r}")
        object.__setattr__(self, "model_ids", ids)
        object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class HumanColumn:
    """Human preference per model: win rate percentage or ELO."""

    model_ids: tuple[str, ...]
    preference: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in ("rate", "elo"):
            raise DataError(f"unknown human preference kind {self.kind!r}")
        ids = tuple(self.model_ids)
        pref = np.asarray(self.preference, dtype=np.float64).reshape(-1)
        if len(ids) != pref.shape[0]:
            raise DimensionMismatchError("model_ids and preference disagree in length")
        if not np.all(np.isfinite(pref)):
            raise DataError("human column contains a non-finite value")
        object.__setattr__(self, "model_ids", ids)
        object.__setattr__(self, "preference", pref)

    def as_column(self) -> ModelScoreColumn:
        return ModelScoreColumn(self.model_ids, self.preference, HIGHER_BETTER)


@dataclass(frozen=True)
class SampleScoreTensor:
    """Per-sample, per-model scores for item-level metrics."""

    model_ids: tuple[str, ...]
    scores: np.ndarray  # samples x models

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        ids = tuple(self.model_ids)
        if scores.ndim != 2:
            raise DimensionMismatchError("sample score tensor must be 2-D")
        if scores.shape[1] != len(ids):
            raise DimensionMismatchError("tensor model axis disagrees with model_ids")
        if not np.all(np.isfinite(scores)):
            raise DataError("sample score tensor contains a non-finite value")
        object.__setattr__(self, "model_ids", ids)
        object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class Ranking:
    """Rank per model (1 = best) plus a flag for tied scores."""

    model_ids: tuple[str, ...]
    ranks: np.ndarray
    has_ties: bool


@dataclass(frozen=True)
class CorrelationResult:
    method: str
    value: float
    squared: float


@dataclass(frozen=True)
class ComboFit:
    weight_a: float
    weight_b: float
    rank_accuracy: float


def _aligned(col: ModelScoreColumn) -> np.ndarray:
    """Scores flipped so that higher always means better."""
    return col.scores if col.direction == HIGHER_BETTER else -col.scores


def rank_models(col: ModelScoreColumn) -> Ranking:
    """Ranks from raw scores, 1 = best; ties broken by model order."""
    key = -_aligned(col)
    order = np.argsort(key, kind="stable")
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(1, len(order) + 1)
    has_ties = len(np.unique(col.scores)) != len(col.scores)
    return Ranking(col.model_ids, ranks, has_ties)


def _check_rank_vectors(predicted, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    if p.shape[0] != t.shape[0]:
        raise DimensionMismatchError(
            f"predicted has {p.shape[0]} entries but truth has {t.shape[0]}"
        )
    if p.shape[0] < 2:
        raise DataError("rank accuracy needs at least 2 models")
    if len(np.unique(t)) != t.shape[0]:
        raise DataError("truth ranking contains ties, which are not supported")
    return p, t


def rank_accuracy(predicted, truth) -> float:
    """Fraction of concordant model pairs; predicted ties count 0.5."""
    p, t = _check_rank_vectors(predicted, truth)
    n = p.shape[0]
    concordant = 0.0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dp = p[i] - p[j]
            dt = t[i] - t[j]
            if dp == 0.0:
                concordant += 0.5
            elif (dp < 0.0) == (dt < 0.0):
                concordant += 1.0
    return concordant / (n * (n - 1) / 2)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks of values, 1 = smallest; ties get their mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def sample_ranks(tensor: SampleScoreTensor, direction: str) -> np.ndarray:
    """Per-sample average ranks (1 = best) of the tensor's models."""
    if direction not in (LOWER_BETTER, HIGHER_BETTER):
        raise DataError(f"unknown direction {direction!r}")
    scores = tensor.scores if direction == LOWER_BETTER else -tensor.scores
    return np.vstack([_average_ranks(row) for row in scores])


def per_item_rank_accuracy(tensor: SampleScoreTensor, truth, direction: str) -> float:
    """Mean over samples of the per-sample pair concordance with truth."""
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    if t.shape[0] != len(tensor.model_ids):
        raise DimensionMismatchError("truth length disagrees with the tensor model axis")
    per_sample = sample_ranks(tensor, direction)
    accs = [rank_accuracy(row, t) for row in per_sample]
    return float(np.mean(accs))


def aggregate_sample_ranks(tensor: SampleScoreTensor, direction: str) -> ModelScoreColumn:
    """Mean rank per model over all samples, as a lower-better column."""
    mean_ranks = sample_ranks(tensor, direction).mean(axis=0)
    return ModelScoreColumn(tensor.model_ids, mean_ranks, LOWER_BETTER)


def _check_model_sets(ids_a, ids_b) -> None:
    if tuple(ids_a) != tuple(ids_b):
        raise DataError("columns cover different model sets (or different order)")


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt(xc @ xc))
    sy = float(np.sqrt(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("correlation undefined on a zero-variance column")
    return float((xc @ yc) / (sx * sy))


def correlation(col: ModelScoreColumn, human: HumanColumn, method: str) -> CorrelationResult:
    """Pearson or Spearman between a direction-aligned column and human data."""
    _check_model_sets(col.model_ids, human.model_ids)
    if len(col.model_ids) < 3:
        raise DataError("correlation needs at least 3 models")
    aligned = _aligned(col)
    pref = human.preference
    if method == "pearson":
        value = _pearson(aligned, pref)
    elif method == "spearman":
        value = _pearson(_average_ranks(aligned), _average_ranks(pref))
    else:
        raise DataError(f"unknown correlation method {method!r}")
    return CorrelationResult(method, value, value * value)


def win_rate_matchup(candidate_ranks: Sequence, truth) -> list[dict]:
    """Pairwise concordance matchups of candidate rankings against truth.

    For every candidate, every rival candidate, and every unordered
    model pair: win if the candidate orders the pair like the truth
    while the rival does not, lose for the reverse, both-good / both-bad
    when they agree. Fractions sum to 1 per candidate.
    """
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    if len(candidate_ranks) < 2:
        raise DataError("need at least 2 candidate rankings")
    cands = []
    for cand in candidate_ranks:
        c = np.asarray(cand, dtype=np.float64).reshape(-1)
        if c.shape[0] != t.shape[0]:
            raise DimensionMismatchError("candidate ranking length disagrees with truth")
        cands.append(c)
    if len(np.unique(t)) != t.shape[0]:
        raise DataError("truth ranking contains ties, which are not supported")

    n = t.shape[0]
    pairs = [(i, j) for i in range(n - 1) for j in range(i + 1, n)]

    def concordant(c, i, j):
        d = c[i] - c[j]
        return d != 0.0 and (d < 0.0) == (t[i] - t[j] < 0.0)

    results = []
    for a_idx, a in enumerate(cands):
        tally = {"win": 0, "lose": 0, "both_good": 0, "both_bad": 0}
        for b_idx, b in enumerate(cands):
            if b_idx == a_idx:
                continue
            for i, j in pairs:
                ca, cb = concordant(a, i, j), concordant(b, i, j)
                if ca and cb:
                    tally["both_good"] += 1
                elif ca:
                    tally["win"] += 1
                elif cb:
                    tally["lose"] += 1
                else:
                    tally["both_bad"] += 1
        total = len(pairs) * (len(cands) - 1)
        results.append({k: v / total for k, v in tally.items()})
    return results


def _zscore(values: np.ndarray) -> np.ndarray:
    std = float(values.std())
    if std == 0.0:
        raise UndefinedCorrelationError("cannot normalize a zero-variance column")
    return (values - values.mean()) / std


def fit_linear_combo(
    metric_a: ModelScoreColumn, metric_b: ModelScoreColumn, human: HumanColumn
) -> ComboFit:
    """Grid-search the convex blend of two metrics against human ranks.

    Both columns are direction-aligned and z-scored; w runs over
    [0, 1] in steps of 0.001 maximizing rank accuracy, ties resolved to
    the smallest w. The endpoints w=0 and w=1 are included, so the
    achieved accuracy is never below either single metric's accuracy.
    """
    _check_model_sets(metric_a.model_ids, metric_b.model_ids)
    _check_model_sets(metric_a.model_ids, human.model_ids)
    if len(metric_a.model_ids) < 3:
        raise DataError("combo fit needs at least 3 models")
    za = _zscore(_aligned(metric_a))
    zb = _zscore(_aligned(metric_b))
    truth = rank_models(human.as_column()).ranks

    best_w, best_acc = 0.0, -1.0
    for step in range(1001):
        w = step / 1000.0
        combined = w * za + (1.0 - w) * zb
        acc = rank_accuracy(-combined, truth)
        if acc > best_acc:
            best_w, best_acc = w, acc
    return ComboFit(best_w, 1.0 - best_w, best_acc)
