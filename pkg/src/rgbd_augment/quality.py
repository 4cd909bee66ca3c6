"""Holdout-based quality scoring and threshold filtering of sub-scene renderers.

A renderer is scored on each sub-scene by re-rendering the withheld holdout
frames and comparing depth (abs rel) and color (perceptual distance).  The
trade-off measure is ``sqrt(alpha * abs_rel**2 + perceptual**2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import InputError, ScoringError, ValidationError

DEFAULT_ALPHA = 10.0
DEFAULT_PERCEPTUAL_THRESHOLD = 0.22
DEFAULT_ABSREL_THRESHOLD = 0.05
TESTSET_PERCEPTUAL_THRESHOLD = 0.30

REFERENCE_METRIC = "dssim-gauss11"
EXTERNAL_METRIC = "lpips-external"

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def t_rgbd(abs_rel: float, perceptual: float, alpha: float = DEFAULT_ALPHA) -> float:
    return math.sqrt(alpha * abs_rel * abs_rel + perceptual * perceptual)


@dataclass(frozen=True)
class Thresholds:
    perceptual: float = DEFAULT_PERCEPTUAL_THRESHOLD
    abs_rel: float = DEFAULT_ABSREL_THRESHOLD
    metric: str = REFERENCE_METRIC  # the perceptual metric the threshold is meant for

    def __post_init__(self):
        if not (self.perceptual > 0 and self.abs_rel > 0):
            raise InputError("thresholds must be positive")

    def passes(self, abs_rel: float, perceptual: float) -> bool:
        return perceptual < self.perceptual and abs_rel < self.abs_rel

    def reasons(self, abs_rel: float, perceptual: float) -> list[str]:
        out = []
        if not perceptual < self.perceptual:
            out.append(f"perceptual {perceptual:.6g} >= {self.perceptual:g}")
        if not abs_rel < self.abs_rel:
            out.append(f"abs_rel {abs_rel:.6g} >= {self.abs_rel:g}")
        return out


DEFAULT_THRESHOLDS = Thresholds()
TESTSET_THRESHOLDS = Thresholds(perceptual=TESTSET_PERCEPTUAL_THRESHOLD)


@dataclass(frozen=True)
class FrameScore:
    frame_id: str
    abs_rel: Optional[float]
    perceptual: Optional[float]
    n_pixels: int
    excluded: bool = False
    reason: str = ""


@dataclass(frozen=True)
class QualityReport:
    subscene_id: str
    abs_rel: float
    perceptual: float
    metric: str
    t_rgbd: float
    alpha: float
    passed: bool
    frames: tuple = ()
    thresholds: Thresholds = DEFAULT_THRESHOLDS

    @classmethod
    def build(cls, subscene_id: str, abs_rel: float, perceptual: float, alpha: float = DEFAULT_ALPHA,
              thresholds: Thresholds = DEFAULT_THRESHOLDS, metric: str = REFERENCE_METRIC, frames=()) -> "QualityReport":
        if abs_rel < 0:
            raise InputError("abs_rel must be non-negative")
        if not 0 <= perceptual <= 1:
            raise InputError("perceptual score must lie in [0, 1]")
        return cls(subscene_id, float(abs_rel), float(perceptual), metric, t_rgbd(abs_rel, perceptual, alpha),
                   float(alpha), thresholds.passes(abs_rel, perceptual), tuple(frames), thresholds)

    def with_perceptual(self, perceptual: float, metric: str) -> "QualityReport":
        return QualityReport.build(self.subscene_id, self.abs_rel, perceptual, self.alpha, self.thresholds, metric,
                                   self.frames)

    def with_thresholds(self, thresholds: Thresholds) -> "QualityReport":
        return QualityReport.build(self.subscene_id, self.abs_rel, self.perceptual, self.alpha, thresholds,
                                   self.metric, self.frames)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frames"] = [asdict(f) for f in self.frames]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QualityReport":
        d = dict(d)
        d["frames"] = tuple(FrameScore(**f) for f in d.get("frames", ()))
        d["thresholds"] = Thresholds(**d["thresholds"]) if "thresholds" in d else DEFAULT_THRESHOLDS
        return cls(**d)


# ---------------------------------------------------------------- perceptual

def luma(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim == 2:
        return rgb
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Mean SSIM over all fully-contained Gaussian windows.

    Images smaller than the 11x11 window use the largest odd window that fits.
    """
    size = min(SSIM_WINDOW, *a.shape)
    size -= (size + 1) % 2
    g = gaussian_window(size)
    pad = size // 2

    def blur(x):
        y = ndimage.correlate1d(x, g, axis=0, mode="constant")
        y = ndimage.correlate1d(y, g, axis=1, mode="constant")
        return y[pad:x.shape[0] - pad, pad:x.shape[1] - pad]

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a ** 2
    var_b = blur(b * b) - mu_b ** 2
    cov = blur(a * b) - mu_a * mu_b
    s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))
    return float(np.mean(s))


def reference_perceptual(rgb_a: np.ndarray, rgb_b: np.ndarray) -> float:
    """Structural dissimilarity ``(1 - SSIM) / 2`` on luma, in [0, 1]."""
    rgb_a = np.asarray(rgb_a, dtype=np.float64)
    rgb_b = np.asarray(rgb_b, dtype=np.float64)
    if rgb_a.shape != rgb_b.shape:
        raise InputError(f"image shapes differ: {rgb_a.shape} vs {rgb_b.shape}")
    ya, yb = luma(rgb_a), luma(rgb_b)
    if np.array_equal(ya, yb):
        return 0.0
    # symmetric by construction; average both argument orders to cancel rounding asymmetry
    s = 0.5 * (ssim(ya, yb) + ssim(yb, ya))
    return float(np.clip((1.0 - s) / 2.0, 0.0, 1.0))


# ---------------------------------------------------------------- scoring

def frame_abs_rel(gt_depth: np.ndarray, rendered_depth: np.ndarray, render_mask: np.ndarray) -> tuple[Optional[float], int]:
    overlap = (gt_depth > 0) & np.isfinite(gt_depth) & render_mask & (rendered_depth > 0)
    n = int(overlap.sum())
    if n == 0:
        return None, 0
    g, r = gt_depth[overlap], rendered_depth[overlap]
    return float(np.mean(np.abs(g - r) / g)), n


def score_views(subscene_id: str, holdout, views, perceptual: Callable = reference_perceptual,
                alpha: float = DEFAULT_ALPHA, thresholds: Thresholds = DEFAULT_THRESHOLDS,
                metric: str = REFERENCE_METRIC) -> QualityReport:
    """Score already-rendered holdout views against their ground-truth frames."""
    frames = []
    for gt, view in zip(holdout, views):
        ar, n = frame_abs_rel(gt.depth, view.depth, view.mask)
        if ar is None:
            frames.append(FrameScore(gt.frame_id, None, None, 0, True, "no overlapping valid pixels"))
            continue
        # compare color only where the render has support
        gt_rgb = np.where(view.mask[..., None], gt.rgb, 0.0)
        frames.append(FrameScore(gt.frame_id, ar, float(perceptual(gt_rgb, view.rgb)), n))
    used = [f for f in frames if not f.excluded]
    if not used:
        raise ScoringError(f"{subscene_id}: every holdout frame was excluded")
    abs_rel = float(np.mean([f.abs_rel for f in used]))
    perc = float(np.mean([f.perceptual for f in used]))
    return QualityReport.build(subscene_id, abs_rel, perc, alpha, thresholds, metric, frames)


def score_subscene(subscene, renderer: Callable, perceptual: Callable = reference_perceptual,
                   alpha: float = DEFAULT_ALPHA, thresholds: Thresholds = DEFAULT_THRESHOLDS,
                   metric: str = REFERENCE_METRIC) -> QualityReport:
    """Render every holdout pose with ``renderer(subscene, pose)`` and score it."""
    holdout = subscene.holdout_frames
    if not holdout:
        raise ScoringError(f"{subscene.subscene_id}: holdout split is empty")
    views = [renderer(subscene, f.pose) for f in holdout]
    return score_views(subscene.subscene_id, holdout, views, perceptual, alpha, thresholds, metric)


def ingest_external_scores(path, known_ids: Optional[Sequence[str]] = None) -> dict:
    """Read ``{subscene_id: score}`` overrides from a JSON file."""
    try:
        data = json.loads(Path(path).read_text() or "{}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: not valid JSON ({e})", [str(e)]) from e
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected an object mapping sub-scene id to score", ["top-level"])
    offenders = []
    known = None if known_ids is None else set(known_ids)
    for sid, score in data.items():
        if known is not None and sid not in known:
            offenders.append(f"{sid}: unknown sub-scene id")
        if isinstance(score, bool) or not isinstance(score, (int, float)) or not 0 <= score <= 1:
            offenders.append(f"{sid}: score {score!r} outside [0, 1]")
    if offenders:
        raise ValidationError(f"{path}: {len(offenders)} invalid external score(s)", offenders)
    return {sid: float(s) for sid, s in data.items()}


def apply_overrides(reports: Sequence[QualityReport], overrides: dict) -> list[QualityReport]:
    return [r.with_perceptual(overrides[r.subscene_id], EXTERNAL_METRIC) if r.subscene_id in overrides else r
            for r in reports]


def filter_subscenes(reports: Sequence[QualityReport], thresholds: Thresholds = DEFAULT_THRESHOLDS):
    """Split reports into (kept ids, rejected ids) under ``thresholds`` (strict)."""
    kept, rejected = [], []
    for r in reports:
        (kept if thresholds.passes(r.abs_rel, r.perceptual) else rejected).append(r.subscene_id)
    return kept, rejected
