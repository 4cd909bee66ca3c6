import hashlib
import json
from pathlib import Path

import pytest
import yaml

from rgbd_augment.dataset import DatasetManifest, SceneSpec, generate_synthetic_scene, write_frames
from rgbd_augment.errors import ValidationError
from rgbd_augment.pipeline import COMMANDS, config_from_dict, derive_seed, load_config, run_pipeline
from rgbd_augment.pipeline.cli import main
from rgbd_augment.pipeline.stages import filter_reports, spread_indices
from rgbd_augment.quality import DEFAULT_THRESHOLDS, QualityReport


def tree_digest(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name != "timings.json"}


def write_config(tmp_path: Path, **overrides) -> Path:
    data = {
        "dataset_root": "data/train",
        "output_root": "out",
        "seed": 3,
        "strategies": ["angled"],
        "quality": {"perceptual_threshold": 1.0, "absrel_threshold": 1.0},
        "testset": {"root": "data/test"},
        "synthetic": {"scenes": 2, "test_scenes": 1, "n_frames": 10, "width": 48, "height": 24,
                      "fx": 30.0, "fy": 30.0},
    }
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(data.get(k), dict):
            data[k] = {**data[k], **v}
        else:
            data[k] = v
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


class TestConfig:
    def test_defaults(self):
        cfg = config_from_dict({})
        assert cfg.max_extent == 50.0
        assert cfg.holdout_fraction == 0.10
        assert cfg.quality.alpha == 10.0
        assert (cfg.quality.perceptual_threshold, cfg.quality.absrel_threshold) == (0.22, 0.05)
        assert (cfg.testset.perceptual_threshold, cfg.testset.absrel_threshold) == (0.30, 0.05)
        assert cfg.merge.caps == [1000, 5000, 10000, 20000, 50000]
        assert cfg.testset.frames_per_scene == 10

    def test_unknown_keys(self):
        with pytest.raises(ValidationError) as e:
            config_from_dict({"max_extnt": 3, "quality": {"alpah": 1}, "strategies": ["zoom"]})
        assert len(e.value.offenders) == 3

    def test_value_checks(self):
        with pytest.raises(ValidationError):
            config_from_dict({"renderer": {"kind": "external"}})
        with pytest.raises(ValidationError):
            config_from_dict({"holdout_fraction": 1.5})
        with pytest.raises(ValidationError):
            config_from_dict({"max_extent": "far"})

    def test_paths_relative_to_config(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.out == (tmp_path / "out").resolve()

    def test_derived_seeds(self):
        assert derive_seed(0, "merge") == derive_seed(0, "merge")
        assert derive_seed(0, "merge") != derive_seed(1, "merge")
        assert derive_seed(0, "merge") != derive_seed(0, "saturation/5")
        assert 0 <= derive_seed(123, "x") < 2**63


class TestHelpers:
    def test_filter_example(self):
        reports = [QualityReport.build("pass", 0.01, 0.1), QualityReport.build("perc", 0.01, 0.5),
                   QualityReport.build("absrel", 0.2, 0.1)]
        out = filter_reports(reports, {}, DEFAULT_THRESHOLDS)
        assert out["kept"] == ["pass"]
        assert set(out["rejected"]) == {"perc", "absrel"}
        assert out["rejected"]["perc"][0].startswith("perceptual")
        assert out["rejected"]["absrel"][0].startswith("abs_rel")

    def test_spread(self):
        assert spread_indices(100, 10) == list(range(5, 100, 10))
        assert spread_indices(3, 10) == [0, 1, 2]


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipe")
    cfg = load_config(write_config(tmp))
    COMMANDS["make-synthetic"](cfg)
    results = run_pipeline(cfg)
    return tmp, cfg, results


class TestEndToEnd:
    def test_stage_reports(self, pipeline_run):
        tmp, cfg, results = pipeline_run
        for r in results:
            report = json.loads((r.out_dir / "report.json").read_text())
            assert report["status"] == "ok"
            assert report["seed"] == 3
            assert (r.out_dir / "timings.json").exists()

    def test_count_laws(self, pipeline_run):
        tmp, cfg, _ = pipeline_run
        pool = DatasetManifest.load(cfg.out / "render" / "pool.json")
        merged = DatasetManifest.load(cfg.out / "merge" / "manifest.json")
        # two 10-frame scenes, angled gives 2n per sub-scene, all kept
        assert len(pool) == 2 * 2 * 10
        assert len(merged) == 20 + 40
        assert merged.seed == 3

    def test_provenance_closure(self, pipeline_run):
        tmp, cfg, _ = pipeline_run
        merged = DatasetManifest.load(cfg.out / "merge" / "manifest.json")
        originals = {r.frame_id for r in DatasetManifest.load(cfg.out / "split" / "manifest.json").records}
        synth = {}
        for p in (cfg.out / "synth").rglob("poses.json"):
            data = json.loads(p.read_text())
            for v in data["views"]:
                synth[(data["subscene_id"], v["strategy"], v["parameter"], v["source_frame"])] = v
        for r in merged.records:
            assert r.source_frame in originals
            if r.origin != "original":
                key = (r.subscene, r.origin, r.parameter, r.source_frame.rsplit("/", 1)[1])
                assert key in synth
        merged.validate()

    def test_eval_outputs(self, pipeline_run):
        tmp, cfg, _ = pipeline_run
        metrics = json.loads((cfg.out / "eval" / "metrics.json").read_text())
        agg = metrics["aggregate"]
        assert agg["delta1"] <= agg["delta2"] <= agg["delta3"]
        assert (cfg.out / "eval" / "per_frame.csv").read_text().startswith("frame_id,")

    def test_rerun_byte_identical(self, pipeline_run):
        tmp, cfg, _ = pipeline_run
        before = tree_digest(cfg.out)
        run_pipeline(cfg, jobs=3)
        assert tree_digest(cfg.out) == before

    def test_saturation(self, pipeline_run):
        tmp, cfg, _ = pipeline_run
        cfg.merge.caps = [0, 5, 40, 41, "50%"]
        COMMANDS["saturation"](cfg)
        rows = json.loads((cfg.out / "saturation" / "summary.json").read_text())
        assert [r["size"] for r in rows] == [20, 25, 60, 60, 30]
        orig = DatasetManifest.load(cfg.out / "split" / "manifest.json")
        assert DatasetManifest.load(cfg.out / "saturation" / "cap_0" / "manifest.json").records == orig.records

    def test_gen_testset(self, pipeline_run):
        tmp, cfg, _ = pipeline_run
        cfg.testset.perceptual_threshold = 1.0
        cfg.testset.absrel_threshold = 1.0
        res = COMMANDS["gen-testset"](cfg)
        m = DatasetManifest.load(cfg.out / "testset" / "manifest.json")
        assert len(m) == 10 == res.report["counts"]["pairs"]
        assert all(r.mask is not None and r.origin == "random-perturb" for r in m.records)
        first = tree_digest(cfg.out / "testset")
        COMMANDS["gen-testset"](cfg)
        assert tree_digest(cfg.out / "testset") == first


class TestCli:
    def test_success_and_missing_inputs(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["make-synthetic", "--config", str(cfg)]) == 0
        assert main(["merge", "--config", str(cfg)]) == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "StageInputError" and err["offenders"]
        assert main(["split", "--config", str(cfg), "--seed", "9"]) == 0
        report = json.loads((tmp_path / "out" / "split" / "report.json").read_text())
        assert report["seed"] == 9

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "c.yaml"
        path.write_text("strategies: [zoom]\n")
        assert main(["split", "--config", str(path)]) == 1
        assert main(["split", "--config", str(tmp_path / "nope.yaml")]) == 1

    def test_partial_failure(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        root = tmp_path / "data" / "train"
        spec = SceneSpec(width=32, height=16, fx=20.0, fy=20.0, n_frames=10)
        write_frames(root / "a", generate_synthetic_scene(spec, seed=1)[0])
        # a single-frame scene has no holdout and cannot be scored
        write_frames(root / "b", generate_synthetic_scene(spec, seed=2)[0][:1])
        assert main(["run", "--config", str(cfg)]) == 2
        filt = json.loads((tmp_path / "out" / "filter" / "filter.json").read_text())
        assert filt["kept"] == ["a/sub000"]
        assert "unscored" in filt["rejected"]["b/sub000"][0]
        errs = [json.loads(line) for line in capsys.readouterr().err.strip().splitlines()]
        assert any(e["unit"] == "b/sub000" for e in errs)

    def test_testset_all_filtered(self, tmp_path, capsys):
        cfg = write_config(tmp_path, testset={"root": "data/test", "absrel_threshold": 1e-12})
        assert main(["make-synthetic", "--config", str(cfg)]) == 0
        assert main(["gen-testset", "--config", str(cfg)]) == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "NoSurvivorsError"
        assert "abs_rel" in err["offenders"][0]

    def test_external_renderer_without_answers(self, tmp_path, capsys):
        cfg = write_config(tmp_path, renderer={"kind": "external", "exchange_dir": "exchange"})
        for cmd in ("make-synthetic", "split", "synth"):
            assert main([cmd, "--config", str(cfg)]) == 0
        assert main(["render", "--config", str(cfg)]) == 1
        assert (tmp_path / "exchange" / "render" / "train_00" / "sub000" / "request.json").exists()
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "NoSurvivorsError"

    def test_refuses_to_overwrite_real_data(self, tmp_path):
        cfg = write_config(tmp_path)
        (tmp_path / "data" / "train").mkdir(parents=True)
        (tmp_path / "data" / "train" / "keep.txt").write_text("x")
        assert main(["make-synthetic", "--config", str(cfg)]) == 1
        assert (tmp_path / "data" / "train" / "keep.txt").exists()
