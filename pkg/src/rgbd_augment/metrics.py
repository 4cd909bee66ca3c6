"""Monocular depth evaluation: REL, SQ REL, RMSE, log RMSE and delta accuracies."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from .errors import EvaluationError, InputError

METRIC_NAMES = ("delta1", "delta2", "delta3", "rel", "sq_rel", "rms", "rms_log")


@dataclass(frozen=True)
class EvalConfig:
    min_depth: float = 1e-3
    max_depth: float = 80.0
    crop: Optional[tuple] = None  # (top, bottom, left, right), half-open rows/cols

    def __post_init__(self):
        if not 0 < self.min_depth < self.max_depth:
            raise InputError("need 0 < min_depth < max_depth")
        if self.crop is not None:
            if len(self.crop) != 4:
                raise InputError("crop is (top, bottom, left, right)")
            object.__setattr__(self, "crop", tuple(int(x) for x in self.crop))


@dataclass(frozen=True)
class MetricsReport:
    delta1: float
    delta2: float
    delta3: float
    rel: float
    sq_rel: float
    rms: float
    rms_log: float
    n_pixels: int

    def to_dict(self) -> dict:
        return asdict(self)


def eval_mask(gt: np.ndarray, cfg: EvalConfig) -> np.ndarray:
    mask = np.isfinite(gt) & (gt > 0) & (gt >= cfg.min_depth) & (gt <= cfg.max_depth)
    if cfg.crop is not None:
        top, bottom, left, right = cfg.crop
        keep = np.zeros_like(mask)
        keep[top:bottom, left:right] = True
        mask &= keep
    return mask


def compute_errors(gt: np.ndarray, pred: np.ndarray) -> MetricsReport:
    """Metrics over already-masked 1-D arrays of ground truth and prediction."""
    n = gt.size
    if n == 0:
        raise EvaluationError("no valid pixels to evaluate")
    thresh = np.maximum(gt / pred, pred / gt)
    diff = gt - pred
    return MetricsReport(
        delta1=float(np.mean(thresh < 1.25)),
        delta2=float(np.mean(thresh < 1.25 ** 2)),
        delta3=float(np.mean(thresh < 1.25 ** 3)),
        rel=float(np.mean(np.abs(diff) / gt)),
        sq_rel=float(np.mean(diff ** 2 / gt)),
        rms=float(np.sqrt(np.mean(diff ** 2))),
        rms_log=float(np.sqrt(np.mean((np.log(gt) - np.log(pred)) ** 2))),
        n_pixels=int(n),
    )


def select_pixels(pred: np.ndarray, gt: np.ndarray, cfg: EvalConfig) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise InputError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    mask = eval_mask(gt, cfg)
    p = np.nan_to_num(pred[mask], nan=cfg.min_depth, posinf=cfg.max_depth, neginf=cfg.min_depth)
    return gt[mask], np.clip(p, cfg.min_depth, cfg.max_depth)


def evaluate(pred: np.ndarray, gt: np.ndarray, cfg: EvalConfig = EvalConfig()) -> MetricsReport:
    g, p = select_pixels(pred, gt, cfg)
    if g.size == 0:
        raise EvaluationError("no ground-truth pixel passes the validity rule")
    return compute_errors(g, p)


@dataclass
class ManifestEvaluation:
    aggregate: MetricsReport
    per_frame: dict  # frame_id -> MetricsReport
    skipped: dict  # frame_id -> reason

    def table_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("frame_id",) + METRIC_NAMES + ("n_pixels",))
        for fid, rep in self.per_frame.items():
            writer.writerow((fid,) + tuple(repr(getattr(rep, k)) for k in METRIC_NAMES) + (rep.n_pixels,))
        a = self.aggregate
        writer.writerow(("__pooled__",) + tuple(repr(getattr(a, k)) for k in METRIC_NAMES) + (a.n_pixels,))
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "aggregate": self.aggregate.to_dict(),
            "per_frame": {k: v.to_dict() for k, v in self.per_frame.items()},
            "skipped": dict(self.skipped),
        }


def evaluate_pairs(pairs: Sequence[tuple[str, np.ndarray, np.ndarray]], cfg: EvalConfig = EvalConfig()) -> ManifestEvaluation:
    """Per-frame reports plus the pixel-pooled aggregate over ``(frame_id, pred, gt)`` triples."""
    per_frame, skipped = {}, {}
    gts, preds = [], []
    for fid, pred, gt in pairs:
        g, p = select_pixels(pred, gt, cfg)
        if g.size == 0:
            skipped[fid] = "no valid ground-truth pixels"
            continue
        per_frame[fid] = compute_errors(g, p)
        gts.append(g)
        preds.append(p)
    if not gts:
        raise EvaluationError("no frame had valid pixels")
    return ManifestEvaluation(compute_errors(np.concatenate(gts), np.concatenate(preds)), per_frame, skipped)


def evaluate_manifest(pred_manifest, gt_manifest, cfg: EvalConfig = EvalConfig(),
                      use_pred_masks: bool = False) -> ManifestEvaluation:
    """Pair two manifests by frame id and evaluate every pair.

    With ``use_pred_masks`` ground truth is restricted to each prediction's mask,
    for predictions that only cover part of the frame.
    """
    from .dataset.codec import load_depth, load_mask

    def gt_depth(fid):
        gt = load_depth(gts[fid].depth)
        mask_path = preds[fid].mask
        if use_pred_masks and mask_path is not None:
            gt = np.where(load_mask(mask_path), gt, 0.0)
        return gt

    preds = {r.frame_id: r for r in pred_manifest.records}
    gts = {r.frame_id: r for r in gt_manifest.records}
    only_pred = sorted(set(preds) - set(gts))
    only_gt = sorted(set(gts) - set(preds))
    common = [fid for fid in gts if fid in preds]
    if not common:
        raise EvaluationError(
            f"no common frame ids; prediction-only: {only_pred}, ground-truth-only: {only_gt}"
        )
    pairs = [(fid, load_depth(preds[fid].depth), gt_depth(fid)) for fid in common]
    result = evaluate_pairs(pairs, cfg)
    for fid in only_pred:
        result.skipped[fid] = "no ground truth"
    for fid in only_gt:
        result.skipped[fid] = "no prediction"
    return result
