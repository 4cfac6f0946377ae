"""Versioned JSON run configuration.

Every key is optional; missing keys take the defaults below and unknown keys
are rejected so typos do not pass silently. Command-line flags override file
values.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..errors import ConfigError
from ..morphology import PostprocessParams, StructuringElement
from ..radiomics import ExtractionSettings
from ..segmetrics import DEFAULT_DETECT_FRACTION

CONFIG_VERSION = 1


@dataclass(frozen=True)
class Paths:
    images: str | None = None
    masks: str | None = None
    output: str = "out"
    labels: str | None = None
    gt: str | None = None
    pred: str | None = None
    features: str | None = None
    model: str | None = None
    predictions: str | None = None


@dataclass(frozen=True)
class PostprocessConfig:
    closing_radius: int = 1
    centroid_threshold_mm: float = 100.0
    connectivity: int = 26

    def params(self) -> PostprocessParams:
        return PostprocessParams(StructuringElement.box(self.closing_radius),
                                 self.centroid_threshold_mm, self.connectivity)


@dataclass(frozen=True)
class ExtractionConfig:
    bin_width: float = 25.0
    glcm_distance: int = 1
    gldm_alpha: int = 0

    def settings(self) -> ExtractionSettings:
        return ExtractionSettings(self.bin_width, self.glcm_distance, self.gldm_alpha)


@dataclass(frozen=True)
class SvmConfig:
    C: float = 8000.0
    gamma: float = 0.01
    tol: float = 1e-3
    grid_search: bool = False
    C_grid: tuple = (1.0, 10.0, 100.0, 1000.0, 8000.0, 1e4)
    gamma_grid: tuple = (1e-3, 1e-2, 1e-1, 1.0)


@dataclass(frozen=True)
class CvConfig:
    k: int = 5
    seed: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    version: int = CONFIG_VERSION
    paths: Paths = field(default_factory=Paths)
    postprocess: PostprocessConfig = field(default_factory=PostprocessConfig)
    extraction: dict = field(default_factory=lambda: {"trachea": ExtractionConfig(),
                                                      "airway": ExtractionConfig()})
    selection: dict = field(default_factory=lambda: {"trachea": 0.20, "airway": 0.41})
    svm: SvmConfig = field(default_factory=SvmConfig)
    cv: CvConfig = field(default_factory=CvConfig)
    scaling_mode: str = "leak-free"
    trachea_region: str = "upper-third"
    detect_fraction: float = DEFAULT_DETECT_FRACTION
    jobs: int = 1

    def __post_init__(self):
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"config version {self.version!r} is not supported "
                              f"(expected {CONFIG_VERSION})")
        for kind, thr in self.selection.items():
            if kind not in ("trachea", "airway"):
                raise ConfigError(f"selection: unknown ROI kind {kind!r}")
            if not (isinstance(thr, (int, float)) and 0.0 <= thr <= 1.0):
                raise ConfigError(f"selection.{kind} must lie in [0, 1], got {thr!r}")
        if set(self.extraction) - {"trachea", "airway"}:
            raise ConfigError(f"extraction: unknown ROI kinds {sorted(set(self.extraction) - {'trachea', 'airway'})}")
        if self.scaling_mode not in ("leak-free", "full-table"):
            raise ConfigError("scaling_mode must be 'leak-free' or 'full-table'")
        if self.trachea_region not in ("upper-third", "above-lower-third"):
            raise ConfigError("trachea_region must be 'upper-third' or 'above-lower-third'")
        if not 0.0 < self.detect_fraction <= 1.0:
            raise ConfigError("detect_fraction must lie in (0, 1]")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.cv.k < 2:
            raise ConfigError("cv.k must be at least 2")
        s = self.svm
        if not (s.C > 0 and s.gamma > 0 and s.tol > 0):
            raise ConfigError("svm.C, svm.gamma and svm.tol must be positive")
        if not s.C_grid or not s.gamma_grid or min(s.C_grid) <= 0 or min(s.gamma_grid) <= 0:
            raise ConfigError("svm grids must be non-empty and positive")
        if self.postprocess.connectivity not in (6, 18, 26):
            raise ConfigError("postprocess.connectivity must be 6, 18 or 26")
        try:
            for e in self.extraction.values():
                e.settings()
        except ValueError as exc:
            raise ConfigError(f"extraction: {exc}") from None

    def extraction_settings(self, kind: str) -> ExtractionSettings:
        return self.extraction.get(kind, ExtractionConfig()).settings()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["svm"]["C_grid"] = list(self.svm.C_grid)
        d["svm"]["gamma_grid"] = list(self.svm.gamma_grid)
        return d


def _section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{name}: unknown keys {unknown}")
    try:
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    if "version" not in data:
        raise ConfigError("config must declare its 'version'")
    kw = dict(data)
    sections = {"paths": Paths, "postprocess": PostprocessConfig, "svm": SvmConfig, "cv": CvConfig}
    for key, cls in sections.items():
        if key in kw:
            kw[key] = _section(cls, kw[key], key)
    if "extraction" in kw:
        if not isinstance(kw["extraction"], dict):
            raise ConfigError("extraction must be an object")
        base = {"trachea": ExtractionConfig(), "airway": ExtractionConfig()}
        base.update({k: _section(ExtractionConfig, v, f"extraction.{k}")
                     for k, v in kw["extraction"].items()})
        kw["extraction"] = base
    if "selection" in kw:
        if not isinstance(kw["selection"], dict):
            raise ConfigError("selection must be an object")
        kw["selection"] = {"trachea": 0.20, "airway": 0.41, **kw["selection"]}
    try:
        return PipelineConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)


def save_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")


def with_overrides(cfg: PipelineConfig, jobs=None, seed=None, out=None, **paths) -> PipelineConfig:
    """Apply command-line values on top of ``cfg``; ``None`` leaves a value as is."""
    p = replace(cfg.paths, **{k: str(v) for k, v in paths.items() if v is not None})
    if out is not None:
        p = replace(p, output=str(out))
    kw = {"paths": p}
    if jobs is not None:
        kw["jobs"] = int(jobs)
    if seed is not None:
        kw["cv"] = replace(cfg.cv, seed=int(seed))
    return replace(cfg, **kw)
