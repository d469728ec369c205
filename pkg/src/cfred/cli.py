"""Command line interface.

Subcommands:
    score      manifest -> metric columns + ranking table
    rank       precomputed score columns + human data -> ranking table
    correlate  two named columns -> correlation report
    winrate    candidate rankings + truth -> matchup report
    combo      two named columns + human data -> fitted blend weights
    ablate     correlation grid + backbone attributes -> bucket means
    synth      Gaussian spec file -> EMB1 triple + manifest

Every subcommand accepts --format csv|json|markdown, --seed, and --out.
Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 numerical error. Diagnostics go to stderr only.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data_io import (
    FORMAT_VERSION,
    emit_report,
    load_manifest,
    write_embedding,
)
from .errors import CfredError, DataError, NumericalError
from .harness import BackboneAttribute, CorrelationGrid, ablate, rank_columns, run_benchmark
from .metrics import HIGHER_BETTER, LOWER_BETTER
from .rank_eval import (
    HumanColumn,
    ModelScoreColumn,
    correlation,
    fit_linear_combo,
    win_rate_matchup,
)
from .synth import JointGaussianSpec, sample_joint


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _emit_records(headers, rows, fmt: str) -> bytes:
    """Render a small rectangular report deterministically."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(headers)
        writer.writerows(rows)
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        docs = [dict(zip(headers, row)) for row in rows]
        return (json.dumps(docs, indent=2, sort_keys=True) + "\n").encode("utf-8")
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(headers) + " |",
            "|" + "|".join(" --- " for _ in headers) + "|",
        ]
        lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise DataError(f"unknown report format {fmt!r}")


def _write_output(data: bytes, out: str | None) -> None:
    if out is None:
        sys.stdout.write(data.decode("utf-8"))
    else:
        Path(out).write_bytes(data)


def _load_json(path: str):
    p = Path(path)
    if not p.is_file():
        raise DataError(f"file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{p} is not valid JSON: {exc}") from exc


def _load_columns_file(path: str):
    """Columns file: {models, columns: [{name, direction, scores}], human?}."""
    doc = _load_json(path)
    model_ids = tuple(doc.get("models") or ())
    if not model_ids:
        raise DataError("columns file has no models")
    names, columns = [], []
    for entry in doc.get("columns") or ():
        direction = entry.get("direction")
        if direction not in (LOWER_BETTER, HIGHER_BETTER):
            raise DataError(f"column {entry.get('name')!r}: bad direction {direction!r}")
        names.append(entry["name"])
        columns.append(ModelScoreColumn(model_ids, np.asarray(entry["scores"]), direction))
    if not columns:
        raise DataError("columns file has no columns")
    human = None
    if doc.get("human") is not None:
        block = doc["human"]
        values = block["values"]
        missing = [m for m in model_ids if m not in values]
        if missing:
            raise DataError(f"human block missing models: {missing}")
        human = HumanColumn(
            model_ids, np.array([float(values[m]) for m in model_ids]), block["kind"]
        )
    return names, columns, human


def _pick_column(names, columns, wanted):
    try:
        return columns[names.index(wanted)]
    except ValueError:
        raise DataError(f"no column named {wanted!r}; have {names}") from None


def _cmd_score(args) -> None:
    manifest = load_manifest(args.manifest)
    table = run_benchmark(manifest, workers=args.workers)
    _write_output(emit_report(table, args.format), args.out)


def _cmd_rank(args) -> None:
    names, columns, human = _load_columns_file(args.columns)
    if human is None:
        raise DataError("rank requires a human block in the columns file")
    table = rank_columns(names, columns, human)
    _write_output(emit_report(table, args.format), args.out)


def _cmd_correlate(args) -> None:
    names, columns, _ = _load_columns_file(args.columns)
    col_x = _pick_column(names, columns, args.x)
    col_y = _pick_column(names, columns, args.y)
    aligned_y = col_y.scores if col_y.direction == HIGHER_BETTER else -col_y.scores
    pseudo_human = HumanColumn(col_y.model_ids, aligned_y, "rate")
    rows = []
    for method in ("pearson", "spearman"):
        res = correlation(col_x, pseudo_human, method)
        rows.append([method, f"{res.value:.2f}", f"{res.squared:.2f}"])
    _write_output(_emit_records(["method", "rho", "rho^2"], rows, args.format), args.out)


def _cmd_winrate(args) -> None:
    doc = _load_json(args.rankings)
    truth = doc.get("truth")
    candidates = doc.get("candidates") or {}
    if truth is None or len(candidates) < 2:
        raise DataError("winrate input needs a truth ranking and >= 2 candidates")
    names = sorted(candidates)
    results = win_rate_matchup([candidates[n] for n in names], truth)
    rows = [
        [
            name,
            f"{res['win']:.4f}",
            f"{res['lose']:.4f}",
            f"{res['both_good']:.4f}",
            f"{res['both_bad']:.4f}",
        ]
        for name, res in zip(names, results)
    ]
    headers = ["candidate", "win", "lose", "both_good", "both_bad"]
    _write_output(_emit_records(headers, rows, args.format), args.out)


def _cmd_combo(args) -> None:
    names, columns, human = _load_columns_file(args.columns)
    if human is None:
        raise DataError("combo requires a human block in the columns file")
    fit = fit_linear_combo(
        _pick_column(names, columns, args.a), _pick_column(names, columns, args.b), human
    )
    rows = [[args.a, args.b, f"{fit.weight_a:.3f}", f"{fit.weight_b:.3f}", f"{fit.rank_accuracy * 100:.1f}"]]
    headers = ["metric_a", "metric_b", "weight_a", "weight_b", "rank_acc"]
    _write_output(_emit_records(headers, rows, args.format), args.out)


def _cmd_ablate(args) -> None:
    grid_doc = _load_json(args.grid)
    values = {}
    for img, per_text in (grid_doc.get("values") or {}).items():
        for txt, v in per_text.items():
            if v is not None:
                values[(img, txt)] = float(v)
    grid = CorrelationGrid(values)
    attrs = [
        BackboneAttribute(
            backbone_id=a["id"],
            training_data=a["training_data"],
            image_size=int(a["image_size"]),
            model_size=a["model_size"],
            feature_dim=int(a["feature_dim"]),
            zero_shot=a.get("zero_shot"),
        )
        for a in _load_json(args.attributes)
    ]
    buckets = ablate(grid, attrs, args.axis)
    rows = [
        [bucket, f"{info['mean']:.4f}", str(info["count"])]
        for bucket, info in buckets.items()
    ]
    _write_output(_emit_records(["bucket", "mean_correlation", "count"], rows, args.format), args.out)


def _cmd_synth(args) -> None:
    doc = _load_json(args.spec)
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    spec = JointGaussianSpec(
        mean_x=doc["mean_x"],
        mean_y=doc["mean_y"],
        mean_yhat=doc["mean_yhat"],
        cov_xx=doc["cov_xx"],
        cov_yy=doc["cov_yy"],
        cov_yhat=doc["cov_yhat"],
        cov_yx=doc["cov_yx"],
        cov_yhatx=doc["cov_yhatx"],
        seed=seed,
    )
    x, y, yhat = sample_joint(spec, args.n)
    out_dir = Path(args.out or "synth_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_embedding(x, out_dir / "text.emb1")
    write_embedding(y, out_dir / "reference.emb1")
    write_embedding(yhat, out_dir / "generated.emb1")
    manifest = {
        "dataset": doc.get("name", "synthetic"),
        "prompts": [{"id": f"p{i:06d}", "text": f"synthetic prompt {i}"} for i in range(args.n)],
        "text_embeddings": "text.emb1",
        "reference_embeddings": "reference.emb1",
        "models": [{"id": "generated", "embeddings": "generated.emb1"}],
        "backbones": {"image": "synthetic", "text": "synthetic"},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cfred", description=__doc__.split("\n")[0])
    parser.add_argument(
        "--version",
        action="version",
        version=f"cfred {__version__} (embedding format {FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("csv", "json", "markdown"), default="csv")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)

    p = sub.add_parser("score", help="compute metric columns for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--workers", type=int, default=1)
    common(p)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("rank", help="rank precomputed columns against human data")
    p.add_argument("--columns", required=True)
    common(p)
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("correlate", help="correlation between two columns")
    p.add_argument("--columns", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    common(p)
    p.set_defaults(func=_cmd_correlate)

    p = sub.add_parser("winrate", help="win-rate matchups of candidate rankings")
    p.add_argument("--rankings", required=True)
    common(p)
    p.set_defaults(func=_cmd_winrate)

    p = sub.add_parser("combo", help="fit a linear combination of two columns")
    p.add_argument("--columns", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    common(p)
    p.set_defaults(func=_cmd_combo)

    p = sub.add_parser("ablate", help="group-by over a correlation grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--attributes", required=True)
    p.add_argument("--axis", required=True)
    common(p)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("synth", help="sample a synthetic EMB1 triple + manifest")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    common(p)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"cfred: numerical error: {exc}", file=sys.stderr)
        return 3
    except CfredError as exc:
        print(f"cfred: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
