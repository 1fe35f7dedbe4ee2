import numpy as np
import pytest

from promptseg import (
    BackendSpec,
    BenchReport,
    BoundingBox,
    BoxSource,
    DatasetError,
    EvalConfig,
    MaskShapeError,
    PromptsegError,
    emit_report,
    evaluate,
    pair_by_stem,
    profile_video,
    render_overlay,
    load_video,
)
from promptseg.bench import (
    BENCH_CSV_COLUMNS,
    EVAL_CSV_COLUMNS,
    VideoProfile,
    harness_peak_mb,
    load_box_cache,
    write_box_cache,
)

from conftest import noop_endpoint
from synthdata import write_video_frames


def oracle_config(strategy="box", box_source="gt:dilate=0", **kw):
    return EvalConfig(
        strategy=strategy,
        backend=BackendSpec.parse("oracle"),
        box_source=BoxSource.parse(box_source),
        **kw,
    )


class TestBoxSource:
    def test_parse_detector(self):
        assert BoxSource.parse("detector").kind == "detector"

    def test_parse_gt_with_options(self):
        src = BoxSource.parse("gt:dilate=2,min_area=5")
        assert (src.kind, src.dilate, src.min_area) == ("gt", 2, 5)
        assert BoxSource.parse("gt").dilate == 0

    def test_parse_file(self):
        src = BoxSource.parse("file:/tmp/boxes.jsonl")
        assert src.kind == "file" and str(src.path) == "/tmp/boxes.jsonl"

    def test_parse_rejects_junk(self):
        for text in ("gt:dilate=x", "gt:unknown=1", "magic", "file:"):
            with pytest.raises(PromptsegError):
                BoxSource.parse(text)

    def test_describe_round_trips(self):
        for text in ("detector", "gt:dilate=3,min_area=2", "file:/x.jsonl"):
            assert BoxSource.parse(text).describe() == text


class TestBoxCache:
    def test_round_trip(self, tmp_path):
        records = {
            "/a.png": [BoundingBox(1, 2, 3, 4, 0.5)],
            "/b.png": [],
        }
        path = write_box_cache(records, tmp_path / "cache.jsonl")
        loaded = load_box_cache(path)
        assert loaded["/a.png"] == [BoundingBox(1, 2, 3, 4, 0.5)]
        assert loaded["/b.png"] == []

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        path.write_text('{"image": "/a.png", "boxes": [[1,2]]}\n')
        with pytest.raises(DatasetError, match=":1:"):
            load_box_cache(path)


class TestEvaluate:
    def test_saturation_run(self, blob_dataset):
        images_dir, masks_dir, _ = blob_dataset
        data = pair_by_stem(images_dir, masks_dir)
        report = evaluate(oracle_config(), data)
        assert report.count == 50
        mean = report.mean
        assert mean.pa == mean.ma == mean.miou == mean.fwiou == mean.dice == 1.0
        assert mean.mae_raw == 0.0 and mean.mae_scaled == 0.0
        assert all(b.miou == 1.0 for b in report.per_image)

    def test_centroid_prompts_saturate_on_convex_shapes(self, blob_dataset):
        # Every blob is a rectangle or ellipse, so the center of its box
        # lies on the shape and the single positive point recovers it fully.
        images_dir, masks_dir, _ = blob_dataset
        data = pair_by_stem(images_dir, masks_dir)
        report = evaluate(oracle_config(strategy="sp"), data)
        assert report.mean.dice == 1.0

    def test_workers_do_not_change_results(self, small_dataset):
        images_dir, masks_dir, _ = small_dataset
        data = pair_by_stem(images_dir, masks_dir)
        single = evaluate(oracle_config(strategy="mp"), data)
        multi = evaluate(oracle_config(strategy="mp", workers=4), data)
        assert single.per_image == multi.per_image
        assert single.mean == multi.mean

    def test_mean_matches_per_image_average(self, small_dataset):
        images_dir, masks_dir, _ = small_dataset
        data = pair_by_stem(images_dir, masks_dir)
        report = evaluate(oracle_config(strategy="sp+sn"), data)
        for name in ("pa", "ma", "miou", "fwiou", "dice", "mae_raw"):
            values = [getattr(b, name) for b in report.per_image]
            assert getattr(report.mean, name) == pytest.approx(
                sum(values) / len(values), abs=1e-9
            )

    def test_auto_strategy_with_hsv_backend(self, small_dataset):
        images_dir, masks_dir, _ = small_dataset
        data = pair_by_stem(images_dir, masks_dir)
        config = EvalConfig(
            strategy="auto",
            backend=BackendSpec.parse("hsv"),
            box_source=BoxSource.parse("detector"),  # unused in auto mode
        )
        report = evaluate(config, data)
        # Synthetic fire pixels are exactly the fire-colored ones.
        assert report.mean.miou == 1.0
        assert report.backend_name == "hsv-threshold"

    def test_empty_dataset_rejected(self, tmp_path):
        from promptseg.datasets import DatasetManifest

        with pytest.raises(DatasetError):
            evaluate(oracle_config(), DatasetManifest((), tmp_path))

    def test_entries_without_masks_rejected(self, tmp_path, small_dataset):
        import json

        images_dir, _, _ = small_dataset
        manifest = tmp_path / "m.jsonl"
        image = sorted(images_dir.iterdir())[0]
        manifest.write_text(json.dumps({"image": str(image)}) + "\n")
        from promptseg import load_manifest

        with pytest.raises(DatasetError, match="no mask"):
            evaluate(oracle_config(), load_manifest(manifest))

    def test_partial_results_flushed_on_failure(self, tmp_path, small_dataset):
        images_dir, masks_dir, _ = small_dataset
        data = pair_by_stem(images_dir, masks_dir)
        # Cache covers only the first two images; the third aborts the run.
        records = {}
        for entry in list(data)[:2]:
            key = str(entry.image_path.resolve())
            records[key] = [BoundingBox(0, 0, 8, 8, 1.0)]
        cache_path = write_box_cache(records, tmp_path / "cache.jsonl")
        partial_path = tmp_path / "partial.jsonl"
        config = oracle_config(box_source=f"file:{cache_path}")
        with pytest.raises(DatasetError, match="no cached boxes"):
            evaluate(config, data, partial_path=partial_path)
        lines = partial_path.read_text().strip().splitlines()
        assert len(lines) == 2


class TestProfileVideo:
    def test_noop_backend_profile(self, tmp_path):
        frames_dir, _ = write_video_frames(tmp_path, count=8)
        video = load_video(frames_dir)
        config = EvalConfig(
            strategy="box",
            backend=BackendSpec.parse(noop_endpoint("--mask", "box")),
            box_source=BoxSource.parse("detector"),
        )
        report = profile_video(config, video, warmup=3)
        (profile,) = report.videos
        assert profile.frame_count == 5  # 8 frames minus 3 warmup
        assert profile.name == frames_dir.name
        assert len(profile.detect_ms) == len(profile.segment_ms) == 5
        assert all(ms >= 0 for ms in profile.detect_ms)
        # End-to-end covers detect + segment and a bounded slice of harness work.
        for det, seg, e2e in zip(
            profile.detect_ms, profile.segment_ms, profile.end_to_end_ms
        ):
            assert e2e >= det + seg
        ratio = profile.fps * profile.mean_ms / 1000.0
        assert 0.5 < ratio <= 1.0 + 1e-9
        assert profile.backend_peak_mb == 12.5
        assert report.model == "noop"
        assert report.harness_peak_mb > 0

    def test_warmup_boundary_leaves_one_frame(self, tmp_path):
        frames_dir, _ = write_video_frames(tmp_path, count=4)
        video = load_video(frames_dir)
        config = EvalConfig(
            strategy="auto",
            backend=BackendSpec.parse(noop_endpoint("--mask", "empty")),
        )
        report = profile_video(config, video, warmup=len(video) - 1)
        assert report.videos[0].frame_count == 1

    def test_warmup_must_leave_frames(self, tmp_path):
        frames_dir, _ = write_video_frames(tmp_path, count=2)
        video = load_video(frames_dir)
        config = EvalConfig(strategy="auto", backend=BackendSpec.parse("hsv"))
        with pytest.raises(PromptsegError, match="warmup"):
            profile_video(config, video, warmup=2)

    def test_gt_boxes_need_masks(self, tmp_path):
        frames_dir, _ = write_video_frames(tmp_path, count=3)
        video = load_video(frames_dir)
        config = oracle_config()
        with pytest.raises(DatasetError):
            profile_video(config, video, warmup=0)

    def test_oracle_backend_with_video_masks(self, tmp_path):
        frames_dir, masks_dir = write_video_frames(tmp_path, count=4, with_masks=True)
        video = load_video(frames_dir, masks_dir)
        report = profile_video(oracle_config(), video, warmup=1)
        assert report.videos[0].frame_count == 3
        assert report.backend_peak_mb == 0.0

    def test_fps_definition(self):
        # 10 frames over 2.0 s of wall time is 5 FPS by definition.
        profile = VideoProfile(
            name="clip",
            detect_ms=(1.0,) * 10,
            segment_ms=(2.0,) * 10,
            end_to_end_ms=(10.0,) * 10,
            total_wall_s=2.0,
            backend_peak_mb=0.0,
        )
        assert profile.fps == 5.0
        assert profile.mean_ms == 10.0

    def test_merge(self):
        def mk(name):
            return BenchReport(
                model="m",
                videos=(
                    VideoProfile(name, (1.0,), (1.0,), (3.0,), 0.25, 10.0),
                ),
                harness_peak_mb=100.0,
            )

        merged = BenchReport.merge([mk("a"), mk("b")])
        assert [v.name for v in merged.videos] == ["a", "b"]
        assert merged.frame_count == 2
        assert merged.fps == 2 / 0.5
        assert merged.backend_peak_mb == 10.0

    def test_merge_rejects_mixed_models(self):
        a = BenchReport("x", (VideoProfile("a", (1,), (1,), (1,), 1.0, 0.0),), 1.0)
        b = BenchReport("y", (VideoProfile("b", (1,), (1,), (1,), 1.0, 0.0),), 1.0)
        with pytest.raises(PromptsegError):
            BenchReport.merge([a, b])


class TestEmitReport:
    def test_eval_csv_columns_frozen(self, small_dataset, tmp_path):
        images_dir, masks_dir, _ = small_dataset
        data = pair_by_stem(images_dir, masks_dir)
        report = evaluate(oracle_config(), data)
        path = emit_report(report, "csv", tmp_path / "r.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(EVAL_CSV_COLUMNS)
        assert len(lines) == 2
        cells = lines[1].split(",")
        assert cells[0] == "box" and cells[1] == "oracle" and cells[2] == "4"

    def test_emitting_twice_is_byte_identical(self, small_dataset, tmp_path):
        images_dir, masks_dir, _ = small_dataset
        data = pair_by_stem(images_dir, masks_dir)
        report = evaluate(oracle_config(strategy="mp"), data)
        a = emit_report(report, "csv", tmp_path / "a.csv").read_bytes()
        b = emit_report(report, "csv", tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_bench_csv_has_overall_row(self, tmp_path):
        videos = tuple(
            VideoProfile(name, (1.0,), (1.0,), (4.0,), 0.5, 25.0)
            for name in ("v1", "v2", "v3")
        )
        report = BenchReport("toy", videos, harness_peak_mb=50.0)
        path = emit_report(report, "csv", tmp_path / "bench.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(BENCH_CSV_COLUMNS)
        assert len(lines) == 5  # header + 3 videos + overall
        assert lines[-1].split(",")[1] == "overall"

    def test_markdown_table(self, small_dataset, tmp_path):
        images_dir, masks_dir, _ = small_dataset
        data = pair_by_stem(images_dir, masks_dir)
        report = evaluate(oracle_config(), data)
        path = emit_report(report, "markdown", tmp_path / "r.md")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("| strategy |")
        assert set(lines[1].replace("|", "").split()) == {"---"}
        assert len(lines) == 3

    def test_unknown_format(self, tmp_path):
        report = BenchReport(
            "toy", (VideoProfile("v", (1,), (1,), (1,), 1.0, 0.0),), 1.0
        )
        with pytest.raises(PromptsegError):
            emit_report(report, "xml", tmp_path / "r.xml")


class TestRenderOverlay:
    def test_empty_mask_is_identity(self):
        rng = np.random.default_rng(0)
        image = rng.integers(0, 256, (6, 7, 3), dtype=np.uint8)
        out = render_overlay(image, np.zeros((6, 7), bool))
        assert (out == image).all()

    def test_full_mask_alpha_one_is_solid(self):
        rng = np.random.default_rng(1)
        image = rng.integers(0, 256, (5, 5, 3), dtype=np.uint8)
        out = render_overlay(image, np.ones((5, 5), bool), (255, 0, 0), alpha=1.0)
        assert (out == np.array([255, 0, 0], np.uint8)).all()

    def test_half_alpha_green_on_black(self):
        image = np.zeros((3, 3, 3), dtype=np.uint8)
        out = render_overlay(image, np.ones((3, 3), bool), (0, 255, 0), alpha=0.5)
        # floor(0.5 * 255) = 127 in the green channel
        assert (out == np.array([0, 127, 0], np.uint8)).all()

    def test_dim_mismatch(self):
        with pytest.raises(MaskShapeError):
            render_overlay(np.zeros((4, 4, 3), np.uint8), np.zeros((4, 5), bool))

    def test_alpha_range(self):
        with pytest.raises(PromptsegError):
            render_overlay(
                np.zeros((2, 2, 3), np.uint8), np.zeros((2, 2), bool), alpha=1.5
            )


def test_harness_peak_mb_positive():
    assert harness_peak_mb() > 0
