import json

import numpy as np
import pytest
from PIL import Image

from cfred.cli import main as cfred_main
from cfred.data_io import load_manifest, read_embedding
from cfred.metrics import clipscore
from extractor.cli import main
from extractor.errors import BackboneUnavailableError, DataError, UnknownBackboneError
from extractor.jobs import ExtractionJob, extract, load_prompts
from extractor.registry import get_backbone

# 8 solid colors, each landing in a distinct cell of the 3x3x3 histogram.
FIXTURE_COLORS = {
    "p0": ("red", (255, 0, 0)),
    "p1": ("green", (0, 255, 0)),
    "p2": ("blue", (0, 0, 255)),
    "p3": ("yellow", (255, 255, 0)),
    "p4": ("cyan", (0, 255, 255)),
    "p5": ("magenta", (255, 0, 255)),
    "p6": ("white", (255, 255, 255)),
    "p7": ("black", (0, 0, 0)),
}


def write_fixture(tmp_path, prompt_ids=None):
    """Solid-color PNGs + matching captions; returns (prompts path, image dir)."""
    ids = prompt_ids or list(FIXTURE_COLORS)
    img_dir = tmp_path / "images"
    img_dir.mkdir(exist_ok=True)
    prompts = []
    for pid in ids:
        name, rgb = FIXTURE_COLORS[pid]
        Image.new("RGB", (24, 24), rgb).save(img_dir / f"{pid}.png")
        prompts.append({"id": pid, "text": f"a {name} square"})
    prompts_path = tmp_path / "prompts.json"
    prompts_path.write_text(json.dumps(prompts))
    return prompts_path, img_dir


def histogram_job(tmp_path, **overrides):
    prompts_path, img_dir = write_fixture(tmp_path)
    kwargs = dict(
        prompts=load_prompts(prompts_path),
        model_images={"solid": img_dir},
        image_backbone="rgb-histogram-27",
        text_backbone="color-words-27",
        out_dir=tmp_path / "out",
        reference_images=img_dir,
        dataset="color-fixture",
    )
    kwargs.update(overrides)
    return ExtractionJob(**kwargs)


class TestExtract:
    def test_shape_contract(self, tmp_path):
        job = histogram_job(tmp_path)
        two = ExtractionJob(
            prompts=job.prompts[:2],
            model_images={"solid": tmp_path / "two_images"},
            image_backbone="rgb-histogram-27",
            text_backbone="color-words-27",
            out_dir=tmp_path / "two_out",
        )
        (tmp_path / "two_images").mkdir()
        for pid, _ in two.prompts:
            name, rgb = FIXTURE_COLORS[pid]
            Image.new("RGB", (24, 24), rgb).save(tmp_path / "two_images" / f"{pid}.png")
        extract(two)
        emb = read_embedding(two.out_dir / "solid.emb1")
        assert (emb.rows, emb.cols) == (2, 27)
        text = read_embedding(two.out_dir / "text.emb1")
        assert (text.rows, text.cols) == (2, 27)

    def test_repeated_extraction_is_byte_identical(self, tmp_path):
        job = histogram_job(tmp_path)
        extract(job)
        first = {p.name: p.read_bytes() for p in job.out_dir.iterdir()}
        extract(job)
        second = {p.name: p.read_bytes() for p in job.out_dir.iterdir()}
        assert first == second

    def test_outputs_pass_consumer_validation(self, tmp_path, recwarn):
        manifest_path = extract(histogram_job(tmp_path))
        manifest = load_manifest(manifest_path)
        assert manifest.model_ids == ("solid",)
        assert len(manifest.prompts) == 8
        assert manifest.backbones == {
            "image": "rgb-histogram-27",
            "text": "color-words-27",
        }
        assert len(recwarn) == 0

    def test_matched_captions_beat_shuffled(self, tmp_path):
        job = histogram_job(tmp_path)
        extract(job)
        text = read_embedding(job.out_dir / "text.emb1").data
        images = read_embedding(job.out_dir / "solid.emb1").data
        matched = clipscore(text, images)
        rng = np.random.default_rng(13)
        for _ in range(5):
            perm = rng.permutation(len(text))
            while np.any(perm == np.arange(len(text))):
                perm = rng.permutation(len(text))
            assert matched > clipscore(text[perm], images)

    def test_rows_follow_prompt_id_sort_order(self, tmp_path):
        # prompts supplied out of order still produce sorted rows
        prompts_path, img_dir = write_fixture(tmp_path)
        shuffled = list(reversed(load_prompts(prompts_path)))
        job = ExtractionJob(
            prompts=shuffled,
            model_images={"solid": img_dir},
            image_backbone="rgb-histogram-27",
            text_backbone="color-words-27",
            out_dir=tmp_path / "out",
        )
        manifest_path = extract(job)
        doc = json.loads(manifest_path.read_text())
        assert [p["id"] for p in doc["prompts"]] == sorted(FIXTURE_COLORS)

    def test_batch_size_does_not_change_output(self, tmp_path):
        a = histogram_job(tmp_path, out_dir=tmp_path / "a", batch_size=1)
        b = histogram_job(tmp_path, out_dir=tmp_path / "b", batch_size=64)
        extract(a)
        extract(b)
        assert (a.out_dir / "solid.emb1").read_bytes() == (b.out_dir / "solid.emb1").read_bytes()


class TestErrors:
    def test_undecodable_image_names_file(self, tmp_path):
        job = histogram_job(tmp_path)
        (job.model_images["solid"] / "p3.png").write_bytes(b"not a png at all")
        with pytest.raises(DataError, match="p3.png"):
            extract(job)

    def test_missing_image_for_prompt(self, tmp_path):
        job = histogram_job(tmp_path)
        model_dir = tmp_path / "partial"
        model_dir.mkdir()
        Image.new("RGB", (8, 8), (255, 0, 0)).save(model_dir / "p0.png")
        with pytest.raises(DataError, match="p1"):
            extract(histogram_job(tmp_path, model_images={"partial": model_dir}))

    def test_image_without_prompt(self, tmp_path):
        job = histogram_job(tmp_path)
        Image.new("RGB", (8, 8), (0, 0, 0)).save(job.model_images["solid"] / "stray.png")
        with pytest.raises(DataError, match="stray"):
            extract(job)

    def test_unknown_backbone(self, tmp_path):
        with pytest.raises(UnknownBackboneError, match="imaginary"):
            extract(histogram_job(tmp_path, image_backbone="imaginary"))

    def test_modality_mixup(self, tmp_path):
        with pytest.raises(DataError, match="text backbone"):
            extract(histogram_job(tmp_path, text_backbone="rgb-histogram-27"))

    def test_default_backbones_report_missing_weights(self):
        spec = get_backbone("dinov2-vit-g-14", "image")
        with pytest.raises(BackboneUnavailableError, match="weights"):
            spec.make_encoder()

    def test_duplicate_prompt_ids(self, tmp_path):
        prompts_path, img_dir = write_fixture(tmp_path)
        with pytest.raises(DataError, match="duplicate"):
            ExtractionJob(
                prompts=[("p0", "a"), ("p0", "b")],
                model_images={"solid": img_dir},
                image_backbone="rgb-histogram-27",
                text_backbone="color-words-27",
                out_dir=tmp_path / "out",
            )


class TestCli:
    def test_run_then_score_end_to_end(self, tmp_path, capsys):
        prompts_path, img_dir = write_fixture(tmp_path)
        out_dir = tmp_path / "out"
        code = main([
            "run",
            "--prompts", str(prompts_path),
            "--images", f"solid={img_dir}",
            "--reference", str(img_dir),
            "--image-backbone", "rgb-histogram-27",
            "--text-backbone", "color-words-27",
            "--out", str(out_dir),
        ])
        assert code == 0
        capsys.readouterr()
        assert cfred_main(["score", "--manifest", str(out_dir / "manifest.json")]) == 0
        report = capsys.readouterr().out
        # the model's images are the reference images: distances are 0
        assert report.splitlines()[1].startswith("solid,1,0.00,1,0.00")

    def test_backbones_lists_registry(self, capsys):
        assert main(["backbones"]) == 0
        out = capsys.readouterr().out
        assert "dinov2-vit-g-14" in out
        assert "rgb-histogram-27" in out

    def test_default_backbone_without_weights_exits_3(self, tmp_path, capsys):
        prompts_path, img_dir = write_fixture(tmp_path)
        code = main([
            "run",
            "--prompts", str(prompts_path),
            "--images", f"solid={img_dir}",
            "--out", str(tmp_path / "out"),
        ])
        assert code == 3
        assert "weights" in capsys.readouterr().err

    def test_bad_images_argument_exits_2(self, tmp_path, capsys):
        prompts_path, _ = write_fixture(tmp_path)
        code = main([
            "run", "--prompts", str(prompts_path), "--images", "nodelimiter",
            "--out", str(tmp_path / "out"),
        ])
        assert code == 2

    def test_usage_error_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["run"])  # missing required flags
        assert exc.value.code == 1
