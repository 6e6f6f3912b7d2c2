"""End-to-end extraction: shape rule, store validation, determinism, failure modes."""

from fractions import Fraction

import numpy as np
import pytest
from click.testing import CliRunner

from collate import load_manuscript

from extractor import (
    ExtractionError,
    ExtractionSpec,
    UndecodableImageError,
    extract_manuscript,
    list_images,
)
from extractor.cli import main as cli_main

from conftest import TEST_BACKBONE, noise_image

ASPECTS = {
    "landscape": (800, 600),
    "portrait": (600, 800),
    "square": (400, 400),
    "wide": (700, 350),
}
FULL_TAGS = (18, 19, 20, 21, 22)
REDUCTION = 16


def expected_grid(width: int, height: int, tag: int) -> tuple[int, int]:
    """Independent restatement of the rule: long axis pinned, ties down, ceil cells."""
    long_px = REDUCTION * tag
    ratio = Fraction(min(width, height) * long_px, max(width, height))
    floor = ratio.numerator // ratio.denominator
    short_px = max(1, floor + (1 if ratio - floor > Fraction(1, 2) else 0))
    long_cells = tag
    short_cells = -(-short_px // REDUCTION)
    if width >= height:
        return short_cells, long_cells
    return long_cells, short_cells


@pytest.fixture(scope="module")
def aspect_store(tmp_path_factory, backbone):
    root = tmp_path_factory.mktemp("aspects")
    images = root / "imgs"
    images.mkdir()
    for i, (name, (width, height)) in enumerate(sorted(ASPECTS.items())):
        noise_image(100 + i, width, height).save(images / f"{name}.png")
    spec = ExtractionSpec(backbone=TEST_BACKBONE, fixed_side=256, scale_tags=FULL_TAGS)
    return extract_manuscript(spec, backbone, images, root / "store", manuscript_id="aspects")


class TestShapeRule:
    def test_all_aspects_all_tags(self, aspect_store):
        # load_manuscript runs the store's own validation before returning
        ms = load_manuscript(aspect_store)
        assert ms.manuscript_id == "aspects"
        assert sorted(ms.illustration_ids) == sorted(ASPECTS)
        for pyramid in ms.pyramids:
            width, height = ASPECTS[pyramid.illustration_id]
            assert (pyramid.fixed_map.height, pyramid.fixed_map.width) == (16, 16)
            assert pyramid.scale_tags == FULL_TAGS
            for tag, fmap in pyramid.scale_maps:
                assert max(fmap.height, fmap.width) == tag
                assert (fmap.height, fmap.width) == expected_grid(width, height, tag)
            assert pyramid.channels == 1024

    def test_manifest_declares_channels_and_parameters(self, aspect_store):
        import json

        doc = json.loads(aspect_store.read_text())
        assert doc["channels"] == 1024
        assert doc["extraction"]["scale_tags"] == list(FULL_TAGS)
        assert doc["extraction"]["backbone"] == TEST_BACKBONE
        assert doc["extraction"]["fixed_side"] == 256


class TestExtractionRuns:
    def small_spec(self):
        return ExtractionSpec(backbone=TEST_BACKBONE, fixed_side=48, scale_tags=(3, 4))

    def test_deterministic_bytes(self, tmp_path, backbone):
        images = tmp_path / "imgs"
        images.mkdir()
        noise_image(5, 100, 80).save(images / "only.png")
        spec = self.small_spec()
        first = extract_manuscript(spec, backbone, images, tmp_path / "one")
        second = extract_manuscript(spec, backbone, images, tmp_path / "two")
        for name in ("only.fixed.fmap", "only.s3.fmap", "only.s4.fmap"):
            assert (first.parent / name).read_bytes() == (second.parent / name).read_bytes()

    def test_manifest_above_store_uses_nested_paths(self, tmp_path, backbone):
        images = tmp_path / "imgs"
        images.mkdir()
        noise_image(6, 64, 64).save(images / "a.png")
        manifest = extract_manuscript(
            self.small_spec(), backbone, images, tmp_path / "store", manifest_path=tmp_path / "manifest.json"
        )
        assert manifest == tmp_path / "manifest.json"
        ms = load_manuscript(manifest)
        assert ms.illustration_ids == ("a",)
        assert "store/a.fixed.fmap" in manifest.read_text()

    def test_manifest_outside_store_tree_rejected(self, tmp_path, backbone):
        images = tmp_path / "imgs"
        images.mkdir()
        noise_image(6, 64, 64).save(images / "a.png")
        with pytest.raises(ExtractionError, match="manifest"):
            extract_manuscript(
                self.small_spec(), backbone, images, tmp_path / "store", manifest_path=tmp_path / "elsewhere" / "m.json"
            )

    def test_undecodable_image_is_named(self, tmp_path, backbone):
        images = tmp_path / "imgs"
        images.mkdir()
        (images / "broken.png").write_bytes(b"not a png at all")
        with pytest.raises(UndecodableImageError, match="broken.png"):
            extract_manuscript(self.small_spec(), backbone, images, tmp_path / "store")

    def test_default_manuscript_id_is_directory_name(self, tmp_path, backbone):
        images = tmp_path / "codex-x"
        images.mkdir()
        noise_image(7, 64, 48).save(images / "a.png")
        manifest = extract_manuscript(self.small_spec(), backbone, images, tmp_path / "store")
        assert load_manuscript(manifest).manuscript_id == "codex-x"


class TestListImages:
    def test_sorted_stems(self, tmp_path):
        for name in ("b.png", "a.jpg", "c.webp", "notes.txt"):
            (tmp_path / name).write_bytes(b"x")
        assert [p.name for p in list_images(tmp_path)] == ["a.jpg", "b.png", "c.webp"]

    def test_empty_directory_rejected(self, tmp_path):
        with pytest.raises(ExtractionError, match="no image files"):
            list_images(tmp_path)

    def test_missing_directory_rejected(self, tmp_path):
        with pytest.raises(ExtractionError, match="no such image directory"):
            list_images(tmp_path / "absent")

    def test_duplicate_stem_rejected(self, tmp_path):
        (tmp_path / "a.png").write_bytes(b"x")
        (tmp_path / "a.jpg").write_bytes(b"x")
        with pytest.raises(ExtractionError, match="duplicate illustration id 'a'"):
            list_images(tmp_path)


class TestCli:
    def test_full_run(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        noise_image(9, 96, 64).save(images / "folio.png")
        out = tmp_path / "store"
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["--images", str(images), "--out", str(out), "--backbone", TEST_BACKBONE, "--scales", "3,4", "--fixed", "48"],
        )
        assert result.exit_code == 0, result.output
        assert "wrote" in result.output
        ms = load_manuscript(out / "manifest.json")
        assert ms.illustration_ids == ("folio",)
        assert ms.pyramids[0].scale_tags == (3, 4)

    def test_decode_failure_exits_nonzero(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        (images / "bad.png").write_bytes(b"junk")
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["--images", str(images), "--out", str(tmp_path / "store"), "--backbone", TEST_BACKBONE, "--scales", "3", "--fixed", "48"],
        )
        assert result.exit_code != 0
        assert "cannot decode" in result.output

    def test_bad_scales_rejected(self, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        noise_image(9, 64, 64).save(images / "a.png")
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["--images", str(images), "--out", str(tmp_path / "store"), "--scales", "3,two"],
        )
        assert result.exit_code != 0
        assert "comma-separated" in result.output


class TestSpecValidation:
    def test_tags_must_increase(self):
        with pytest.raises(ValueError, match="increasing"):
            ExtractionSpec(scale_tags=(4, 4, 5))

    def test_tags_must_be_positive(self):
        with pytest.raises(ValueError, match="positive"):
            ExtractionSpec(scale_tags=(0, 1))

    def test_fixed_side_must_be_positive(self):
        with pytest.raises(ValueError, match="fixed_side"):
            ExtractionSpec(fixed_side=0)

    def test_echo_round_trips_to_json(self):
        import json

        spec = ExtractionSpec(backbone="resnet50-random:2", fixed_side=64, scale_tags=(3, 4, 5))
        echoed = json.loads(json.dumps(spec.echo()))
        assert echoed == {"backbone": "resnet50-random:2", "fixed_side": 64, "scale_tags": [3, 4, 5]}


def test_grid_values_vary_with_content(tmp_path, backbone):
    # different images must not produce identical grids (guards against a
    # constant-output wiring mistake that every shape check would miss)
    images = tmp_path / "imgs"
    images.mkdir()
    noise_image(1, 80, 64).save(images / "a.png")
    noise_image(2, 80, 64).save(images / "b.png")
    spec = ExtractionSpec(backbone=TEST_BACKBONE, fixed_side=48, scale_tags=(3,))
    manifest = extract_manuscript(spec, backbone, images, tmp_path / "store")
    ms = load_manuscript(manifest)
    a = ms.pyramids[0].fixed_map.data
    b = ms.pyramids[1].fixed_map.data
    assert a.shape == b.shape
    assert not np.array_equal(a, b)
