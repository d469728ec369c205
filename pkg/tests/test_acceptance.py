"""End-to-end behavioral guarantees, one test per guarantee.

Each test enforces its stated tolerance and runtime budget; the terminal
summary prints one PASS/FAIL line per test in this module.
"""

import time

import numpy as np
import pytest

from cfred.errors import FormatError
from cfred.harness import BackboneAttribute, CorrelationGrid, ablate, run_benchmark
from cfred.data_io import emit_report, read_embedding, write_embedding
from cfred.linalg import (
    FeatureMatrix,
    GaussianMoments,
    accumulate_joint_moments,
    accumulate_moments,
)
from cfred.metrics import (
    HIGHER_BETTER,
    LOWER_BETTER,
    GroupedDataset,
    cfred_expectation_form,
    cfred_unconditional_form,
    cmmd,
    frechet_distance,
    make_swap_dataset,
)
from cfred.rank_eval import (
    HumanColumn,
    ModelScoreColumn,
    SampleScoreTensor,
    aggregate_sample_ranks,
    correlation,
    per_item_rank_accuracy,
    rank_accuracy,
    rank_models,
    win_rate_matchup,
)
from cfred.synth import analytic_cfred, sample_joint

from conftest import random_joint_spec, random_spd
from test_data_io import pack_header
from test_harness import build_manifest, noisy_copy


class Budget:
    """Context manager asserting a wall-clock bound."""

    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.monotonic()

    def __exit__(self, *exc):
        if exc[0] is None:
            assert time.monotonic() - self.start < self.seconds


def test_published_benchmark_columns_reproduce_agreement_statistics():
    """Printed 10-model fixture: exact rank accuracies, correlation windows."""
    with Budget(1.0):
        ids = tuple(f"m{i}" for i in range(10))
        human = HumanColumn(
            ids,
            [80.87, 80.66, 76.29, 75.87, 68.78, 39.00, 38.36, 32.04, 22.00, 9.07],
            "rate",
        )
        columns = {
            "fid": ModelScoreColumn(
                ids,
                [7.90, 13.11, 8.39, 9.16, 10.11, 12.65, 12.51, 13.85, 14.74, 15.12],
                LOWER_BETTER,
            ),
            "cfred": ModelScoreColumn(
                ids,
                [3.79, 4.55, 4.16, 4.42, 4.90, 6.93, 7.18, 6.59, 8.16, 9.06],
                LOWER_BETTER,
            ),
            "clip": ModelScoreColumn(
                ids,
                [14.34, 13.11, 15.07, 14.39, 14.41, 15.45, 15.42, 14.71, 15.62, 16.01],
                HIGHER_BETTER,
            ),
        }
        truth = rank_models(human.as_column()).ranks
        accs = {
            name: rank_accuracy(rank_models(col).ranks, truth)
            for name, col in columns.items()
        }
        assert accs["fid"] == 39 / 45  # prints as 86.7%
        assert accs["cfred"] == 41 / 45  # prints as 91.1%
        assert accs["clip"] == 7 / 45  # prints as 15.6%

        fid_p = correlation(columns["fid"], human, "pearson")
        cfred_p = correlation(columns["cfred"], human, "pearson")
        assert fid_p.squared == pytest.approx(0.70, abs=0.05)
        assert cfred_p.squared == pytest.approx(0.97, abs=0.03)
        # rank correlation is reported alongside, with its square
        fid_s = correlation(columns["fid"], human, "spearman")
        assert fid_s.squared == fid_s.value**2
        assert fid_s.squared == pytest.approx(0.65, abs=0.005)


def test_class_swap_fools_marginal_distance_but_not_conditional():
    """Hand-derived counterexample: FD exactly 0, conditional distance 2."""
    with Budget(1.0):
        x, y, yhat = make_swap_dataset(2, 500)
        fd = frechet_distance(accumulate_moments(y), accumulate_moments(yhat))
        assert fd == 0.0
        value = cfred_unconditional_form(
            accumulate_joint_moments(x, y), accumulate_joint_moments(x, yhat)
        )
        assert value == pytest.approx(2.0, abs=1e-6)


def test_estimator_recovers_analytic_gaussian_value_and_is_consistent():
    """5 fixed 3-D ground truths: <3% error at n=1e5, shrinking with n."""
    with Budget(30.0):
        for seed in (101, 102, 103, 104, 105):
            spec = random_joint_spec(seed)
            truth = analytic_cfred(spec)
            x, y, yhat = sample_joint(spec, 100_000)
            est = cfred_unconditional_form(
                accumulate_joint_moments(x, y), accumulate_joint_moments(x, yhat)
            )
            assert abs(est - truth) / truth < 0.03

        # consistency: median relative error over resampling seeds shrinks
        spec_seed = 101
        truth = analytic_cfred(random_joint_spec(spec_seed))
        medians = []
        for n in (1_000, 10_000, 100_000):
            errors = []
            for sample_seed in (7, 8, 9):
                spec = random_joint_spec(spec_seed, sample_seed=sample_seed)
                x, y, yhat = sample_joint(spec, n)
                est = cfred_unconditional_form(
                    accumulate_joint_moments(x, y), accumulate_joint_moments(x, yhat)
                )
                errors.append(abs(est - truth) / truth)
            medians.append(float(np.median(errors)))
        assert medians[0] > medians[1] > medians[2]


def test_expectation_and_unconditional_forms_agree_on_discrete_conditions():
    """4 one-hot conditions, 5e4 samples each: the two forms agree to 5%."""
    with Budget(30.0):
        rng = np.random.default_rng(77)
        k, n, d = 4, 50_000, 3
        mu_real = rng.uniform(-1, 1, (k, d))
        mu_gen = mu_real + rng.uniform(-0.5, 0.5, (k, d))
        cov_real = random_spd(rng, d, jitter=0.2)
        cov_gen = random_spd(rng, d, jitter=0.2)
        root_real, root_gen = np.linalg.cholesky(cov_real), np.linalg.cholesky(cov_gen)

        groups, xs, ys, yhats = [], [], [], []
        eye = np.eye(k, dtype=np.float32)
        for c in range(k):
            y = mu_real[c] + rng.standard_normal((n, d)) @ root_real.T
            yhat = mu_gen[c] + rng.standard_normal((n, d)) @ root_gen.T
            groups.append(
                (
                    f"c{c}",
                    FeatureMatrix(y.astype(np.float32)),
                    FeatureMatrix(yhat.astype(np.float32)),
                )
            )
            xs.append(np.tile(eye[c], (n, 1)))
            ys.append(y)
            yhats.append(yhat)

        per_condition = cfred_expectation_form(GroupedDataset(tuple(groups)))
        x_all = np.vstack(xs)
        from_moments = cfred_unconditional_form(
            accumulate_joint_moments(x_all, np.vstack(ys)),
            accumulate_joint_moments(x_all, np.vstack(yhats)),
        )
        assert abs(from_moments - per_condition) / per_condition < 0.05


def test_gaussian_distance_closed_forms():
    """1-D and diagonal cases to 1e-9; self-distance exactly 0."""
    gm = lambda mean, cov: GaussianMoments(np.atleast_1d(mean), np.atleast_2d(cov))
    assert frechet_distance(gm(0.0, 1.0), gm(1.0, 1.0)) == pytest.approx(1.0, abs=1e-9)
    assert frechet_distance(gm(0.0, 4.0), gm(0.0, 1.0)) == pytest.approx(1.0, abs=1e-9)
    assert frechet_distance(gm(3.0, 9.0), gm(0.0, 4.0)) == pytest.approx(10.0, abs=1e-9)
    a = gm([0.0, 0.0], np.diag([1.0, 4.0]))
    b = gm([1.0, 0.0], np.diag([1.0, 1.0]))
    assert frechet_distance(a, b) == pytest.approx(2.0, abs=1e-9)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        m = GaussianMoments(rng.uniform(-3, 3, 4), random_spd(rng, 4))
        assert frechet_distance(m, m) == 0.0


def test_kernel_distance_sanity():
    """Identical sets <= 0; same distribution small; mean shift grows it."""
    with Budget(10.0):
        rng = np.random.default_rng(21)
        a = rng.standard_normal((2000, 8))
        b = rng.standard_normal((2000, 8))
        assert cmmd(a, a) <= 0.0
        base = cmmd(a, b)
        assert abs(base) <= 1.0
        assert cmmd(a, b + 1.0) > base


def test_rank_statistics_match_brute_force_reimplementations():
    """Independent reimplementations agree exactly on 50 random instances."""

    def brute_avg_ranks(row):
        order = np.argsort(row, kind="stable")
        out = np.empty(len(row))
        i = 0
        while i < len(row):
            j = i
            while j + 1 < len(row) and row[order[j + 1]] == row[order[i]]:
                j += 1
            out[order[i : j + 1]] = 0.5 * (i + j) + 1.0
            i = j + 1
        return out

    def brute_accuracy(pred, truth):
        n = len(pred)
        score = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                dp, dt = pred[i] - pred[j], truth[i] - truth[j]
                if dp == 0.0:
                    score += 0.5
                elif (dp < 0.0) == (dt < 0.0):
                    score += 1.0
        return score / (n * (n - 1) / 2)

    for case in range(50):
        rng = np.random.default_rng(1000 + case)
        n_models = int(rng.integers(2, 6))
        n_samples = int(rng.integers(1, 8))
        ids = tuple(f"m{i}" for i in range(n_models))
        scores = rng.integers(0, 4, (n_samples, n_models)).astype(float)
        tensor = SampleScoreTensor(ids, scores)
        truth = rng.permutation(n_models) + 1

        rank_rows = np.vstack([brute_avg_ranks(-row) for row in scores])
        expected_item = float(np.mean([brute_accuracy(r, truth) for r in rank_rows]))
        assert per_item_rank_accuracy(tensor, truth, HIGHER_BETTER) == expected_item

        expected_agg = rank_rows.mean(axis=0)
        agg = aggregate_sample_ranks(tensor, HIGHER_BETTER)
        assert np.array_equal(agg.scores, expected_agg)

    for case in range(50):
        rng = np.random.default_rng(2000 + case)
        n_models = int(rng.integers(2, 7))
        n_cands = int(rng.integers(2, 5))
        truth = rng.permutation(n_models) + 1
        cands = [rng.integers(1, n_models + 1, n_models).astype(float) for _ in range(n_cands)]
        results = win_rate_matchup(cands, truth)
        pairs = [(i, j) for i in range(n_models - 1) for j in range(i + 1, n_models)]
        conc = lambda c, i, j: c[i] != c[j] and (c[i] < c[j]) == (truth[i] < truth[j])
        for a_idx in range(n_cands):
            tally = {"win": 0, "lose": 0, "both_good": 0, "both_bad": 0}
            for b_idx in range(n_cands):
                if b_idx == a_idx:
                    continue
                for i, j in pairs:
                    ca, cb = conc(cands[a_idx], i, j), conc(cands[b_idx], i, j)
                    key = (
                        "both_good" if ca and cb
                        else "win" if ca
                        else "lose" if cb
                        else "both_bad"
                    )
                    tally[key] += 1
            total = len(pairs) * (n_cands - 1)
            assert results[a_idx] == {k: v / total for k, v in tally.items()}

    for case in range(50):
        rng = np.random.default_rng(3000 + case)
        n_bb = int(rng.integers(1, 6))
        attrs = [
            BackboneAttribute(
                f"bb{i}",
                training_data=str(rng.integers(0, 3)),
                image_size=int(rng.integers(1, 3)) * 224,
                model_size="s",
                feature_dim=768,
            )
            for i in range(n_bb)
        ]
        grid = CorrelationGrid({
            (f"bb{i}", f"t{j}"): float(rng.uniform(-1, 1))
            for i in range(n_bb)
            for j in range(int(rng.integers(1, 4)))
        })
        out = ablate(grid, attrs, "training_data")
        expected = {}
        for (img, _), v in sorted(grid.values.items()):
            bucket = next(a for a in attrs if a.backbone_id == img).training_data
            expected.setdefault(bucket, []).append(v)
        assert out == {
            b: {"mean": float(np.mean(vs)), "count": len(vs)} for b, vs in expected.items()
        }


def test_benchmark_reports_are_byte_identical_across_runs_and_workers(tmp_path):
    rng = np.random.default_rng(88)
    text = rng.standard_normal((50, 4))
    ref = noisy_copy(text, rng, 0.3)
    arrays = {f"m{i}": noisy_copy(ref, rng, 0.2 * (i + 1)) for i in range(5)}
    manifest = build_manifest(
        tmp_path, text, ref, arrays,
        human={"kind": "rate", "values": {f"m{i}": 90.0 - 15 * i for i in range(5)}},
    )
    reports = [
        emit_report(run_benchmark(manifest, workers=w), fmt)
        for fmt in ("csv", "json", "markdown")
        for w in (1, 4, 1)
    ]
    for i in (0, 3, 6):
        assert reports[i] == reports[i + 1] == reports[i + 2]


def test_embedding_container_round_trip_and_header_rejection(tmp_path):
    rng = np.random.default_rng(99)
    shapes = [(1, 1), (1, 4096)] + [
        (int(rng.integers(1, 40)), int(rng.integers(1, 40))) for _ in range(98)
    ]
    path = tmp_path / "rt.emb1"
    for shape in shapes:
        fm = FeatureMatrix(rng.standard_normal(shape).astype(np.float32))
        write_embedding(fm, path)
        assert np.array_equal(read_embedding(path).data, fm.data)

    mutations = [
        (b"EMB1\x00", "truncated", 5),
        (pack_header(magic=b"XYZ1") + b"\x00" * 4, "magic", 0),
        (pack_header(version=7) + b"\x00" * 4, "version", 4),
        (pack_header(dtype=3) + b"\x00" * 4, "dtype", 6),
        (pack_header(rows=0), "rows", 8),
        (pack_header(cols=0), "cols", 16),
        (pack_header(rows=2, cols=2) + b"\x00" * 8, "payload", 24),
    ]
    bad = tmp_path / "bad.emb1"
    for raw, pattern, offset in mutations:
        bad.write_bytes(raw)
        with pytest.raises(FormatError, match=pattern) as exc:
            read_embedding(bad)
        assert exc.value.byte_offset == offset
