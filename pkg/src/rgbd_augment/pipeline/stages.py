"""Pipeline stages.  Each reads the previous stage's outputs from disk and writes its own.

Layout under the output root::

    split/<scene>/subNNN/...    sub-scene frames + subscene.json; manifest.json of originals
    synth/<scene>/subNNN/poses.json
    render/<scene>/subNNN/{rgb,depth,mask}/; pool.json
    score/<scene>/subNNN/{rgb,depth,mask}/; reports.json, pred_manifest.json, gt_manifest.json
    filter/filter.json
    merge/manifest.json
    eval/metrics.json, eval/per_frame.csv
    testset/...                 perturbed test set (own split/score/filter)
    saturation/cap_<c>/manifest.json, summary.json, summary.csv

Every stage directory holds ``report.json`` (deterministic) and ``timings.json``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..dataset import (
    ORIGINAL,
    DatasetManifest,
    Record,
    SceneSpec,
    SubScene,
    generate_synthetic_scene,
    merge_datasets,
    read_frames,
    resolve_cap,
    split_scene,
    write_frames,
)
from ..dataset.codec import save_bytes, write_depth_png, write_mask_png, write_rgb_png
from ..errors import AugmentError, InputError, ScoringError, UnusableSubsceneError, ValidationError
from ..geometry import Pose, Provenance, StrategySpec, synthesize_poses
from ..metrics import EvalConfig, evaluate_manifest
from ..quality import (
    QualityReport,
    Thresholds,
    apply_overrides,
    ingest_external_scores,
    reference_perceptual,
    score_views,
)
from ..renderer import RenderedView, SplatCloud, SplatParams, render_external, render_splat
from .config import PipelineConfig, derive_seed

REPORT = "report.json"
TIMINGS = "timings.json"
SYNTHETIC_MARKER = ".synthetic"
STAGES = ("split", "synth", "render", "score", "filter", "merge", "eval")


class StageInputError(ValidationError):
    """A stage's required inputs are missing or inconsistent."""


class NoSurvivorsError(ValidationError):
    """Every unit of work in a stage failed."""


@dataclass
class StageResult:
    stage: str
    out_dir: Path
    report: dict
    failures: dict = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.failures)


# ---------------------------------------------------------------- helpers

def dump_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def load_json(path: Path, stage: str):
    if not path.exists():
        raise StageInputError(f"{stage}: missing input {path}", [str(path)])
    return json.loads(path.read_text())


def fresh_dir(path: Path) -> Path:
    if path.exists():
        shutil.rmtree(path)
    path.mkdir(parents=True)
    return path


def _finish(stage: str, out_dir: Path, cfg: PipelineConfig, body: dict, failures: dict, started: float,
            seeds: Optional[dict] = None) -> StageResult:
    report = {
        "stage": stage,
        "seed": cfg.seed,
        "derived_seeds": seeds or {},
        "status": "partial" if failures else "ok",
        "errors": [{"stage": stage, "unit": k, "error": v["error"], "message": v["message"]}
                   for k, v in sorted(failures.items())],
        **body,
    }
    dump_json(out_dir / REPORT, report)
    dump_json(out_dir / TIMINGS, {"stage": stage, "seconds": round(time.perf_counter() - started, 3)})
    return StageResult(stage, out_dir, report, failures)


def _failure(exc: Exception) -> dict:
    return {"error": type(exc).__name__, "message": str(exc)}


def _pmap(fn: Callable, items: list, jobs: int) -> list:
    """Order-preserving map; each item yields ``(value, None)`` or ``(None, exception)``."""

    def safe(item):
        try:
            return fn(item), None
        except (AugmentError, ValueError, OSError) as e:
            return None, e

    if jobs <= 1 or len(items) <= 1:
        return [safe(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(safe, items))


def _intrinsics_id(subscene_id: str) -> str:
    return subscene_id.split("/")[0]


def _write_view(directory: Path, name: str, view: RenderedView) -> dict:
    paths = {}
    for kind, data in (("rgb", write_rgb_png(view.rgb)), ("depth", write_depth_png(view.depth)),
                       ("mask", write_mask_png(view.mask))):
        p = directory / kind / f"{name}.png"
        save_bytes(p, data)
        paths[kind] = str(p.resolve())
    return paths


def list_scenes(root: Path) -> list[Path]:
    if root is None or not root.is_dir():
        raise StageInputError(f"dataset root {root} does not exist", [str(root)])
    scenes = sorted(p for p in root.iterdir() if p.is_dir() and (p / "poses.txt").exists())
    if not scenes:
        raise StageInputError(f"no scenes (directories with poses.txt) under {root}", [str(root)])
    return scenes


# ---------------------------------------------------------------- split

def split_dataset(cfg: PipelineConfig, root: Path, out_dir: Path, stage: str = "split") -> StageResult:
    started = time.perf_counter()
    fresh_dir(out_dir)
    subscenes, scenes, failures = [], {}, {}
    records, intrinsics = [], {}
    for scene_dir in list_scenes(root):
        scene_id = scene_dir.name
        try:
            frames = read_frames(scene_dir)
            subs = split_scene(frames, cfg.max_extent, scene_id, cfg.holdout_fraction)
        except (AugmentError, ValueError, OSError) as e:
            failures[scene_id] = _failure(e)
            continue
        intrinsics[scene_id] = frames[0].intrinsics.as_list()
        scenes[scene_id] = {"frames": len(frames), "subscenes": [s.subscene_id for s in subs]}
        for sub in subs:
            sub_dir = out_dir / sub.subscene_id
            write_frames(sub_dir, sub.frames)
            dump_json(sub_dir / "subscene.json", {
                "subscene_id": sub.subscene_id,
                "scene_id": sub.scene_id,
                "index": sub.index,
                "frames": [f.frame_id for f in sub.frames],
                "holdout": list(sub.holdout),
                "max_extent": sub.max_extent,
                "holdout_fraction": sub.holdout_fraction,
            })
            subscenes.append({"id": sub.subscene_id, "frames": len(sub.frames), "holdout": len(sub.holdout)})
            for f in sub.frames:
                records.append(Record(
                    frame_id=f"{sub.subscene_id}/{f.frame_id}",
                    rgb=str((sub_dir / "rgb" / f"{f.frame_id}.png").resolve()),
                    depth=str((sub_dir / "depth" / f"{f.frame_id}.png").resolve()),
                    pose=tuple(f.pose.as_rows()),
                    intrinsics_id=scene_id,
                    origin=ORIGINAL,
                    subscene=sub.subscene_id,
                    source_frame=f"{sub.subscene_id}/{f.frame_id}",
                ))
    if not subscenes:
        raise NoSurvivorsError(f"{stage}: no scene could be split", sorted(f"{k}: {v['message']}" for k, v in failures.items()))
    manifest = DatasetManifest(records, intrinsics, cfg.seed)
    manifest.save(out_dir / "manifest.json")
    body = {"counts": {"scenes": len(scenes), "subscenes": len(subscenes), "frames": len(records)},
            "scenes": scenes, "subscenes": subscenes}
    return _finish(stage, out_dir, cfg, body, failures, started)


def load_subscene(sub_dir: Path) -> SubScene:
    meta = load_json(sub_dir / "subscene.json", "split")
    frames = {f.frame_id: f for f in read_frames(sub_dir)}
    return SubScene(meta["scene_id"], meta["index"], tuple(frames[i] for i in meta["frames"]),
                    tuple(meta["holdout"]), meta["max_extent"], meta["holdout_fraction"])


def subscene_ids(split_dir: Path, stage: str) -> list[str]:
    report = load_json(split_dir / REPORT, stage)
    return [s["id"] for s in report["subscenes"]]


def cmd_split(cfg: PipelineConfig, jobs: int = 1) -> StageResult:
    return split_dataset(cfg, cfg.path(cfg.dataset_root), cfg.out / "split")


# ---------------------------------------------------------------- synth

def synth_subscene(sub: SubScene, strategies, seed: int) -> list[dict]:
    """Novel poses around every frame of the sub-scene, one entry per view."""
    poses = [f.pose for f in sub.frames]
    views = []
    for si, spec in enumerate(strategies):
        if spec.kind == "random-perturb":
            spec = replace(spec, seed=derive_seed(seed, f"synth/{sub.subscene_id}/{si}"))
        for k, (pose, prov) in enumerate(synthesize_poses(poses, spec)):
            views.append({
                "view_id": f"s{si}-{spec.kind}-{k:05d}",
                "strategy": spec.kind,
                "strategy_index": si,
                "source_frame": sub.frames[prov.source_index].frame_id,
                "parameter": prov.parameter,
                "pose": pose.as_rows(),
            })
    return views


def cmd_synth(cfg: PipelineConfig, jobs: int = 1) -> StageResult:
    started = time.perf_counter()
    split_dir = cfg.out / "split"
    ids = subscene_ids(split_dir, "synth")
    out_dir = fresh_dir(cfg.out / "synth")
    per_sub, failures = {}, {}
    seeds = {}
    for sid in ids:
        try:
            sub = load_subscene(split_dir / sid)
            views = synth_subscene(sub, cfg.strategies, cfg.seed)
        except (AugmentError, ValueError, OSError) as e:
            failures[sid] = _failure(e)
            continue
        for si, spec in enumerate(cfg.strategies):
            if spec.kind == "random-perturb":
                seeds[f"{sid}/{si}"] = derive_seed(cfg.seed, f"synth/{sid}/{si}")
        dump_json(out_dir / sid / "poses.json", {"subscene_id": sid, "views": views})
        counts: dict = {}
        for v in views:
            counts[v["strategy"]] = counts.get(v["strategy"], 0) + 1
        per_sub[sid] = {"status": "ok", "frames": len(sub.frames), "views": len(views), "per_strategy": counts}
    if not per_sub:
        raise NoSurvivorsError("synth: no sub-scene produced poses", sorted(failures))
    body = {"counts": {"subscenes": len(per_sub), "views": sum(v["views"] for v in per_sub.values())},
            "strategies": [s.to_dict() for s in cfg.strategies], "subscenes": per_sub}
    return _finish("synth", out_dir, cfg, body, failures, started, seeds)


# ---------------------------------------------------------------- render

def make_renderer(cfg: PipelineConfig, purpose: str):
    """``render(sub, poses) -> list[RenderedView | Exception]`` for the configured backend."""
    rc = cfg.renderer
    params = SplatParams(radius=int(rc.radius), zbuffer_eps=float(rc.zbuffer_eps))

    def splat_batch(sub: SubScene, items):
        cloud = SplatCloud.from_frames(sub.train_frames) if sub.train_frames else None
        out = []
        for pose, prov in items:
            try:
                out.append(render_splat(sub, pose, params=params, provenance=prov, cloud=cloud))
            except (AugmentError, ValueError) as e:
                out.append(e)
        return out

    def external_batch(sub: SubScene, items):
        exchange = cfg.path(rc.exchange_dir) / purpose / sub.subscene_id
        results = render_external(sub, items, exchange, timeout=rc.timeout, mask_radius=int(rc.radius))
        return [r.view if r.ok else AugmentError(r.error) for r in results]

    return external_batch if rc.kind == "external" else splat_batch


def _render_one(cfg: PipelineConfig, split_dir: Path, synth_dir: Path, out_dir: Path, sid: str, renderer):
    sub = load_subscene(split_dir / sid)
    if not sub.train_frames:
        raise UnusableSubsceneError(f"{sid}: empty training split")
    views = load_json(synth_dir / sid / "poses.json", "render")["views"]
    items = [(Pose.from_matrix(np.array(v["pose"])), Provenance(0, v["strategy"], v["parameter"])) for v in views]
    rendered = renderer(sub, items)
    records, errors = [], {}
    for v, r in zip(views, rendered):
        if isinstance(r, Exception):
            errors[v["view_id"]] = str(r)
            continue
        paths = _write_view(out_dir / sid, v["view_id"], r)
        records.append(Record(
            frame_id=f"{sid}/{v['view_id']}",
            rgb=paths["rgb"], depth=paths["depth"], mask=paths["mask"],
            pose=tuple(v["pose"]),
            intrinsics_id=_intrinsics_id(sid),
            origin=v["strategy"],
            subscene=sid,
            source_frame=f"{sid}/{v['source_frame']}",
            parameter=v["parameter"],
        ))
    if not records:
        raise UnusableSubsceneError(f"{sid}: no view rendered ({len(errors)} failures)")
    return records, errors


def cmd_render(cfg: PipelineConfig, jobs: int = 1) -> StageResult:
    started = time.perf_counter()
    split_dir, synth_dir = cfg.out / "split", cfg.out / "synth"
    load_json(synth_dir / REPORT, "render")
    ids = [sid for sid in subscene_ids(split_dir, "render") if (synth_dir / sid / "poses.json").exists()]
    out_dir = fresh_dir(cfg.out / "render")
    renderer = make_renderer(cfg, "render")
    results = _pmap(lambda sid: _render_one(cfg, split_dir, synth_dir, out_dir, sid, renderer), ids, jobs)
    records, per_sub, failures = [], {}, {}
    for sid, (value, exc) in zip(ids, results):
        if exc is not None:
            failures[sid] = _failure(exc)
            per_sub[sid] = {"status": "failed"}
            continue
        recs, errors = value
        records += recs
        per_sub[sid] = {"status": "partial" if errors else "ok", "rendered": len(recs), "failed_views": errors}
        for vid, msg in errors.items():
            failures[f"{sid}/{vid}"] = {"error": "RenderError", "message": msg}
    if not records:
        raise NoSurvivorsError("render: no view rendered", sorted(f"{k}: {v['message']}" for k, v in failures.items()))
    intr = DatasetManifest.load(split_dir / "manifest.json").intrinsics
    pool = DatasetManifest(records, {k: intr[k] for k in sorted({r.intrinsics_id for r in records})}, cfg.seed)
    pool.save(out_dir / "pool.json")
    body = {"counts": {"views": len(records), **pool.counts()}, "subscenes": per_sub}
    return _finish("render", out_dir, cfg, body, failures, started)


# ---------------------------------------------------------------- score

def _score_one(cfg, split_dir: Path, out_dir: Path, sid: str, renderer, thresholds: Thresholds):
    sub = load_subscene(split_dir / sid)
    holdout = sub.holdout_frames
    if not holdout:
        raise ScoringError(f"{sid}: holdout split is empty")
    if not sub.train_frames:
        raise UnusableSubsceneError(f"{sid}: empty training split")
    rendered = renderer(sub, [(f.pose, None) for f in holdout])
    pairs = [(f, v) for f, v in zip(holdout, rendered) if not isinstance(v, Exception)]
    if not pairs:
        raise ScoringError(f"{sid}: no holdout view rendered")
    report = score_views(sid, [f for f, _ in pairs], [v for _, v in pairs], reference_perceptual,
                         cfg.quality.alpha, thresholds)
    preds = []
    for f, v in pairs:
        paths = _write_view(out_dir / sid, f.frame_id, v)
        preds.append(Record(
            frame_id=f"{sid}/{f.frame_id}", rgb=paths["rgb"], depth=paths["depth"], mask=paths["mask"],
            pose=tuple(f.pose.as_rows()), intrinsics_id=_intrinsics_id(sid), origin="holdout-render",
            subscene=sid, source_frame=f"{sid}/{f.frame_id}", parameter="holdout",
        ))
    return report, preds


def score_dataset(cfg: PipelineConfig, split_dir: Path, out_dir: Path, thresholds: Thresholds, jobs: int,
                  stage: str = "score", external_scores: Optional[Path] = None) -> StageResult:
    started = time.perf_counter()
    ids = subscene_ids(split_dir, stage)
    fresh_dir(out_dir)
    renderer = make_renderer(cfg, stage)
    results = _pmap(lambda sid: _score_one(cfg, split_dir, out_dir, sid, renderer, thresholds), ids, jobs)
    reports, preds, failures = [], [], {}
    for sid, (value, exc) in zip(ids, results):
        if exc is not None:
            failures[sid] = _failure(exc)
            continue
        reports.append(value[0])
        preds += value[1]
    if external_scores is not None:
        reports = apply_overrides(reports, ingest_external_scores(external_scores, ids))
    if not reports:
        raise NoSurvivorsError(f"{stage}: no sub-scene could be scored",
                               sorted(f"{k}: {v['message']}" for k, v in failures.items()))
    originals = DatasetManifest.load(split_dir / "manifest.json")
    pred_ids = {r.frame_id for r in preds}
    gts = [r for r in originals.records if r.frame_id in pred_ids]
    DatasetManifest(preds, originals.intrinsics, cfg.seed).save(out_dir / "pred_manifest.json")
    DatasetManifest(gts, originals.intrinsics, cfg.seed).save(out_dir / "gt_manifest.json")
    dump_json(out_dir / "reports.json", {
        "reports": [r.to_dict() for r in reports],
        "unscored": {k: v["message"] for k, v in sorted(failures.items())},
    })
    body = {"counts": {"scored": len(reports), "unscored": len(failures), "holdout_views": len(preds)},
            "subscenes": {r.subscene_id: {"status": "ok", "t_rgbd": r.t_rgbd} for r in reports}}
    return _finish(stage, out_dir, cfg, body, failures, started)


def cmd_score(cfg: PipelineConfig, jobs: int = 1) -> StageResult:
    return score_dataset(cfg, cfg.out / "split", cfg.out / "score", cfg.quality.thresholds, jobs,
                         external_scores=cfg.path(cfg.quality.external_scores))


# ---------------------------------------------------------------- filter

def filter_reports(reports: list[QualityReport], unscored: dict, thresholds: Thresholds) -> dict:
    kept, rejected = [], {}
    for r in reports:
        reasons = thresholds.reasons(r.abs_rel, r.perceptual)
        if reasons:
            rejected[r.subscene_id] = reasons
        else:
            kept.append(r.subscene_id)
    for sid, msg in unscored.items():
        rejected[sid] = [f"unscored: {msg}"]
    return {"kept": kept, "rejected": dict(sorted(rejected.items())),
            "thresholds": {"perceptual": thresholds.perceptual, "abs_rel": thresholds.abs_rel}}


def filter_stage(cfg: PipelineConfig, score_dir: Path, out_dir: Path, thresholds: Thresholds,
                 stage: str = "filter") -> StageResult:
    started = time.perf_counter()
    data = load_json(score_dir / "reports.json", stage)
    reports = [QualityReport.from_dict(d) for d in data["reports"]]
    fresh_dir(out_dir)
    result = filter_reports(reports, data.get("unscored", {}), thresholds)
    dump_json(out_dir / "filter.json", result)
    body = {"counts": {"kept": len(result["kept"]), "rejected": len(result["rejected"])}, **result}
    return _finish(stage, out_dir, cfg, body, {}, started)


def cmd_filter(cfg: PipelineConfig, jobs: int = 1) -> StageResult:
    return filter_stage(cfg, cfg.out / "score", cfg.out / "filter", cfg.quality.thresholds)


# ---------------------------------------------------------------- merge / saturation

def kept_pool(cfg: PipelineConfig, stage: str) -> tuple[DatasetManifest, DatasetManifest, list]:
    """(original manifest, pool restricted to kept sub-scenes, kept ids)."""
    load_json(cfg.out / "render" / REPORT, stage)
    kept = load_json(cfg.out / "filter" / "filter.json", stage)["kept"]
    original = DatasetManifest.load(cfg.out / "split" / "manifest.json")
    pool = DatasetManifest.load(cfg.out / "render" / "pool.json")
    keep = set(kept)
    pool = DatasetManifest([r for r in pool.records if r.subscene in keep], pool.intrinsics, pool.seed)
    return original, pool, kept


def _merged(original, pool, cap, seed: int, global_seed: int) -> DatasetManifest:
    m = merge_datasets(original, pool, cap, seed)
    m.seed = global_seed
    return m


def cmd_merge(cfg: PipelineConfig, jobs: int = 1) -> StageResult:
    started = time.perf_counter()
    original, pool, kept = kept_pool(cfg, "merge")
    out_dir = fresh_dir(cfg.out / "merge")
    seed = derive_seed(cfg.seed, "merge")
    merged = _merged(original, pool, cfg.merge.cap, seed, cfg.seed)
    merged.validate()
    merged.save(out_dir / "manifest.json")
    body = {"counts": {"original": len(original), "pool": len(pool), "merged": len(merged), **merged.counts()},
            "cap": cfg.merge.cap, "kept_subscenes": kept}
    return _finish("merge", out_dir, cfg, body, {}, started, {"merge": seed})


def _cap_label(cap) -> str:
    return str(cap).strip().replace("%", "pct")


def cmd_saturation(cfg: PipelineConfig, jobs: int = 1) -> StageResult:
    started = time.perf_counter()
    original, pool, _ = kept_pool(cfg, "saturation")
    out_dir = fresh_dir(cfg.out / "saturation")
    rows, seeds = [], {}
    for cap in cfg.merge.caps:
        label = _cap_label(cap)
        resolve_cap(cap, len(original))  # validates
        seed = derive_seed(cfg.seed, f"saturation/{label}")
        seeds[label] = seed
        m = _merged(original, pool, cap, seed, cfg.seed)
        m.save(out_dir / f"cap_{label}" / "manifest.json")
        n_aug = len(m) - len(original)
        rows.append({"cap": cap, "size": len(m), "original": len(original), "augmented": n_aug,
                     "augmented_ratio": n_aug / len(m) if len(m) else 0.0, "counts": m.counts()})
    dump_json(out_dir / "summary.json", rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("cap", "size", "original", "augmented", "augmented_ratio"))
    for r in rows:
        w.writerow((r["cap"], r["size"], r["original"], r["augmented"], repr(r["augmented_ratio"])))
    (out_dir / "summary.csv").write_text(buf.getvalue())
    body = {"counts": {"caps": len(rows), "pool": len(pool)}, "ladder": rows}
    return _finish("saturation", out_dir, cfg, body, {}, started, seeds)


# ---------------------------------------------------------------- eval

def cmd_eval(cfg: PipelineConfig, jobs: int = 1) -> StageResult:
    started = time.perf_counter()
    ev = cfg.eval
    pred_path = cfg.path(ev.pred_manifest) or cfg.out / "score" / "pred_manifest.json"
    gt_path = cfg.path(ev.gt_manifest) or cfg.out / "score" / "gt_manifest.json"
    for p in (pred_path, gt_path):
        if not p.exists():
            raise StageInputError(f"eval: missing input {p}", [str(p)])
    econf = EvalConfig(ev.min_depth, ev.max_depth, tuple(ev.crop) if ev.crop else None)
    result = evaluate_manifest(DatasetManifest.load(pred_path), DatasetManifest.load(gt_path), econf,
                               use_pred_masks=True)
    out_dir = fresh_dir(cfg.out / "eval")
    dump_json(out_dir / "metrics.json", result.to_dict())
    (out_dir / "per_frame.csv").write_text(result.table_csv())
    body = {"counts": {"frames": len(result.per_frame), "skipped": len(result.skipped)},
            "aggregate": result.aggregate.to_dict(), "skipped": result.skipped}
    return _finish("eval", out_dir, cfg, body, {}, started)


# ---------------------------------------------------------------- test set

def spread_indices(n: int, m: int) -> list[int]:
    """``min(n, m)`` indices at equal intervals over ``range(n)``."""
    m = min(n, m)
    return [int(math.floor((j + 0.5) * n / m)) for j in range(m)]


def cmd_gen_testset(cfg: PipelineConfig, jobs: int = 1) -> StageResult:
    started = time.perf_counter()
    ts = cfg.testset
    root = cfg.path(ts.root)
    if root is None:
        raise StageInputError("gen-testset: testset.root is not configured", ["testset.root"])
    out_dir = fresh_dir(cfg.out / "testset")
    thresholds = ts.thresholds
    split_dataset(cfg, root, out_dir / "split", stage="testset-split")
    score_dataset(cfg, out_dir / "split", out_dir / "score", thresholds, jobs, stage="testset-score")
    filt = filter_stage(cfg, out_dir / "score", out_dir / "filter", thresholds, stage="testset-filter").report

    split_report = load_json(out_dir / "split" / REPORT, "gen-testset")
    kept = set(filt["kept"])
    renderer = make_renderer(cfg, "testset")
    intr = DatasetManifest.load(out_dir / "split" / "manifest.json").intrinsics
    records, per_scene, seeds, failures = [], {}, {}, {}
    for scene_id, info in sorted(split_report["scenes"].items()):
        subs = [s for s in info["subscenes"] if s in kept]
        if not subs:
            per_scene[scene_id] = {"status": "filtered",
                                   "reasons": {s: filt["rejected"].get(s, []) for s in info["subscenes"]}}
            continue
        loaded = {s: load_subscene(out_dir / "split" / s) for s in subs}
        frames = [(s, f) for s in subs for f in loaded[s].frames]
        chosen = [frames[i] for i in spread_indices(len(frames), ts.frames_per_scene)]
        seed = derive_seed(cfg.seed, f"testset/{scene_id}")
        seeds[scene_id] = seed
        spec = StrategySpec("random-perturb", perturb_translate_m=tuple(ts.perturb_translate_m),
                            perturb_rotate_deg=tuple(ts.perturb_rotate_deg), seed=seed)
        perturbed = synthesize_poses([f.pose for _, f in chosen], spec)
        n_ok = 0
        for (sid, frame), (pose, prov) in zip(chosen, perturbed):
            view = renderer(loaded[sid], [(pose, prov)])[0]
            if isinstance(view, Exception):
                failures[f"{sid}/{frame.frame_id}"] = _failure(view)
                continue
            paths = _write_view(out_dir / "views" / sid, frame.frame_id, view)
            records.append(Record(
                frame_id=f"{sid}/{frame.frame_id}", rgb=paths["rgb"], depth=paths["depth"], mask=paths["mask"],
                pose=tuple(pose.as_rows()), intrinsics_id=scene_id, origin="random-perturb", subscene=sid,
                source_frame=f"{sid}/{frame.frame_id}", parameter=prov.parameter,
            ))
            n_ok += 1
        per_scene[scene_id] = {"status": "ok", "frames": n_ok, "subscenes": subs}
    if not records:
        reasons = [f"{k}: {v.get('reasons', v.get('status'))}" for k, v in sorted(per_scene.items())]
        raise NoSurvivorsError("gen-testset: every test scene was filtered out", reasons)
    manifest = DatasetManifest(records, {k: intr[k] for k in sorted({r.intrinsics_id for r in records})}, cfg.seed)
    manifest.save(out_dir / "manifest.json")
    body = {"counts": {"pairs": len(records), "scenes_kept": sum(v["status"] == "ok" for v in per_scene.values())},
            "scenes": per_scene, "thresholds": filt["thresholds"]}
    return _finish("gen-testset", out_dir, cfg, body, failures, started, seeds)


# ---------------------------------------------------------------- synthetic data

def cmd_make_synthetic(cfg: PipelineConfig, jobs: int = 1) -> StageResult:
    """Write analytic scenes into the dataset root (and the test root, if configured)."""
    started = time.perf_counter()
    sc = cfg.synthetic
    spec = SceneSpec(width=sc.width, height=sc.height, fx=sc.fx, fy=sc.fy, n_frames=sc.n_frames, step=sc.step,
                     trajectory=sc.trajectory, lidar_row_stride=sc.lidar_row_stride)
    written = {}
    targets = [("train", cfg.dataset_root, sc.scenes)]
    if cfg.testset.root is not None:
        targets.append(("test", cfg.testset.root, sc.test_scenes))
    for label, root_text, count in targets:
        root = cfg.path(root_text)
        if root.exists():
            # only ever replace a directory this command created
            if not (root / SYNTHETIC_MARKER).exists() and any(root.iterdir()):
                raise StageInputError(f"make-synthetic: refusing to overwrite non-synthetic {root}", [str(root)])
            shutil.rmtree(root)
        for i in range(count):
            frames, _ = generate_synthetic_scene(spec, seed=derive_seed(cfg.seed, f"synthetic/{label}/{i}"))
            write_frames(root / f"{label}_{i:02d}", frames)
        (root / SYNTHETIC_MARKER).write_text("generated by make-synthetic\n")
        written[label] = {"root": root_text, "scenes": count}
    out_dir = cfg.out / "make-synthetic"
    fresh_dir(out_dir)
    return _finish("make-synthetic", out_dir, cfg, {"counts": {k: v["scenes"] for k, v in written.items()},
                                                     "spec": {k: getattr(spec, k) for k in ("width", "height", "n_frames")}},
                   {}, started)


COMMANDS = {
    "make-synthetic": cmd_make_synthetic,
    "split": cmd_split,
    "synth": cmd_synth,
    "render": cmd_render,
    "score": cmd_score,
    "filter": cmd_filter,
    "merge": cmd_merge,
    "eval": cmd_eval,
    "gen-testset": cmd_gen_testset,
    "saturation": cmd_saturation,
}


def run_pipeline(cfg: PipelineConfig, jobs: int = 1) -> list[StageResult]:
    return [COMMANDS[s](cfg, jobs) for s in STAGES]
