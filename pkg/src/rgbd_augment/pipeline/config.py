"""Pipeline configuration (YAML or JSON) and labeled seed derivation."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from ..errors import ValidationError
from ..geometry import StrategySpec
from ..quality import (
    DEFAULT_ABSREL_THRESHOLD,
    DEFAULT_ALPHA,
    DEFAULT_PERCEPTUAL_THRESHOLD,
    TESTSET_PERCEPTUAL_THRESHOLD,
    Thresholds,
)

DEFAULT_CAPS = (1000, 5000, 10000, 20000, 50000)


def derive_seed(seed: int, label: str) -> int:
    """Stable 63-bit seed for a named sub-task of a run."""
    digest = hashlib.sha256(f"{int(seed)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class RendererConfig:
    kind: str = "splat"  # or "external"
    radius: int = 1
    zbuffer_eps: float = 1e-4
    exchange_dir: Optional[str] = None
    timeout: float = 0.0


@dataclass
class QualityConfig:
    alpha: float = DEFAULT_ALPHA
    perceptual_threshold: float = DEFAULT_PERCEPTUAL_THRESHOLD
    absrel_threshold: float = DEFAULT_ABSREL_THRESHOLD
    external_scores: Optional[str] = None

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(self.perceptual_threshold, self.absrel_threshold)


@dataclass
class TestsetConfig:
    root: Optional[str] = None
    perceptual_threshold: float = TESTSET_PERCEPTUAL_THRESHOLD
    absrel_threshold: float = DEFAULT_ABSREL_THRESHOLD
    frames_per_scene: int = 10
    perturb_translate_m: list = field(default_factory=lambda: [0.30, 0.30, 0.30])
    perturb_rotate_deg: list = field(default_factory=lambda: [3.0, 3.0, 3.0])

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(self.perceptual_threshold, self.absrel_threshold)


@dataclass
class MergeConfig:
    cap: Optional[object] = None  # count, "<p>%" or None for the whole pool
    caps: list = field(default_factory=lambda: list(DEFAULT_CAPS))


@dataclass
class EvalSettings:
    min_depth: float = 1e-3
    max_depth: float = 80.0
    crop: Optional[list] = None
    pred_manifest: Optional[str] = None
    gt_manifest: Optional[str] = None


@dataclass
class SyntheticConfig:
    scenes: int = 2
    test_scenes: int = 1
    n_frames: int = 12
    width: int = 64
    height: int = 32
    fx: float = 40.0
    fy: float = 40.0
    step: float = 1.0
    trajectory: str = "straight"
    lidar_row_stride: int = 1


@dataclass
class PipelineConfig:
    dataset_root: str = "data/train"
    output_root: str = "out"
    seed: int = 0
    max_extent: float = 50.0
    holdout_fraction: float = 0.10
    strategies: list = field(default_factory=lambda: [StrategySpec("angled")])
    renderer: RendererConfig = field(default_factory=RendererConfig)
    quality: QualityConfig = field(default_factory=QualityConfig)
    testset: TestsetConfig = field(default_factory=TestsetConfig)
    merge: MergeConfig = field(default_factory=MergeConfig)
    eval: EvalSettings = field(default_factory=EvalSettings)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    base_dir: str = "."

    def path(self, p: Optional[str]) -> Optional[Path]:
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else (Path(self.base_dir) / p).resolve()

    @property
    def out(self) -> Path:
        return self.path(self.output_root)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategies"] = [s.to_dict() for s in self.strategies]
        d.pop("base_dir")
        return d


_SECTIONS = {
    "renderer": RendererConfig,
    "quality": QualityConfig,
    "testset": TestsetConfig,
    "merge": MergeConfig,
    "eval": EvalSettings,
    "synthetic": SyntheticConfig,
}


def _build(cls, data, where: str, problems: list):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        problems.append(f"{where}: expected a mapping")
        return cls()
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        problems.append(f"{where}: unknown key(s) {unknown}")
    return cls(**{k: v for k, v in data.items() if k in names})


def config_from_dict(data: dict, base_dir=".") -> PipelineConfig:
    problems: list = []
    data = dict(data or {})
    kwargs = {}
    for name, cls in _SECTIONS.items():
        kwargs[name] = _build(cls, data.pop(name, None), name, problems)
    strategies = data.pop("strategies", None)
    if strategies is not None:
        if not strategies:
            problems.append("at least one strategy is required")
        parsed = []
        for i, s in enumerate(strategies):
            try:
                parsed.append(StrategySpec.from_dict({"kind": s} if isinstance(s, str) else s))
            except (TypeError, ValueError) as e:
                problems.append(f"strategies[{i}]: {e}")
        kwargs["strategies"] = parsed
    top = {f.name for f in fields(PipelineConfig)} - set(_SECTIONS) - {"strategies", "base_dir"}
    unknown = sorted(set(data) - top)
    if unknown:
        problems.append(f"unknown top-level key(s) {unknown}")
    kwargs.update({k: v for k, v in data.items() if k in top})
    try:
        cfg = PipelineConfig(base_dir=str(base_dir), **kwargs)
    except TypeError as e:
        problems.append(str(e))
        cfg = None
    if cfg is not None:
        try:
            problems += _check(cfg)
        except TypeError as e:
            problems.append(f"wrong value type: {e}")
    if problems:
        raise ValidationError("invalid configuration", problems)
    return cfg


def _check(cfg: PipelineConfig) -> list:
    problems = []
    if not cfg.max_extent > 0:
        problems.append("max_extent must be positive")
    if not 0 <= cfg.holdout_fraction < 1:
        problems.append("holdout_fraction must lie in [0, 1)")
    if cfg.renderer.kind not in ("splat", "external"):
        problems.append("renderer.kind must be 'splat' or 'external'")
    if cfg.renderer.kind == "external" and not cfg.renderer.exchange_dir:
        problems.append("renderer.exchange_dir is required for the external renderer")
    if int(cfg.renderer.radius) != cfg.renderer.radius or cfg.renderer.radius < 0:
        problems.append("renderer.radius must be a non-negative integer")
    for name, q in (("quality", cfg.quality), ("testset", cfg.testset)):
        if not (q.perceptual_threshold > 0 and q.absrel_threshold > 0):
            problems.append(f"{name} thresholds must be positive")
    if cfg.testset.frames_per_scene < 1:
        problems.append("testset.frames_per_scene must be >= 1")
    if not 0 < cfg.eval.min_depth < cfg.eval.max_depth:
        problems.append("eval needs 0 < min_depth < max_depth")
    return problems


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as e:
        raise ValidationError(f"cannot read config {path}", [str(e)]) from e
    return config_from_dict(data or {}, base_dir=path.parent.resolve())
