"""Flat ``key = value`` pipeline configuration.

Lines starting with ``#`` are comments. Ranges are written ``lo,hi``. Class
table entries are ``class.<id> = <name> <tier> [source label id]`` with names
percent-encoded.
"""
from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

from .blobdb import DEFAULT_MIN_AREA
from .canvas import DEFAULT_BOUNDARY_THICKNESS, DEFAULT_EDGE_THICKNESS
from .classes import ClassTable, cityscapes_classes
from .dataset import DEFAULT_PATTERNS
from .depth import DEFAULT_P_SAMPLE
from .emulation import CITYSCAPES_BASELINE, CITYSCAPES_FOCAL, Camera, EmulationParams
from .io import DEFAULT_DEPTH_SCALE

SEED_ENV = "BLOBCANVAS_SEED"


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    classes: ClassTable = field(default_factory=cityscapes_classes)
    min_blob_area: int = DEFAULT_MIN_AREA
    p_sample: float = DEFAULT_P_SAMPLE
    boundary_thickness: int = DEFAULT_BOUNDARY_THICKNESS
    edge_thickness: int = DEFAULT_EDGE_THICKNESS
    polygon_count_range: tuple[int, int] = (2, 8)
    vertex_count_range: tuple[int, int] = (3, 10)
    polygon_radius_range: tuple[int, int] = (10, 60)
    dilation_kernel_range: tuple[int, int] = (3, 9)
    dilation_segment_fraction: float = 0.5
    baseline: float = CITYSCAPES_BASELINE
    focal: float = CITYSCAPES_FOCAL
    min_disparity: float = 0.0
    depth_scale: float = DEFAULT_DEPTH_SCALE
    seed: int = 0
    dataset: str = ""
    dataset_root: str = ""
    rgb_glob: str = DEFAULT_PATTERNS["rgb"]
    labels_glob: str = DEFAULT_PATTERNS["labels"]
    instances_glob: str = DEFAULT_PATTERNS["instances"]
    disparity_glob: str = DEFAULT_PATTERNS["disparity"]
    db: str = ""
    out: str = ""

    @property
    def patterns(self) -> dict[str, str]:
        return {
            "rgb": self.rgb_glob,
            "labels": self.labels_glob,
            "instances": self.instances_glob,
            "disparity": self.disparity_glob,
        }

    @property
    def camera(self) -> Camera:
        return Camera(self.baseline, self.focal, self.min_disparity)

    def emulation_params(self) -> EmulationParams:
        return EmulationParams(
            polygon_count_range=self.polygon_count_range,
            vertex_count_range=self.vertex_count_range,
            polygon_radius_range=self.polygon_radius_range,
            dilation_kernel_range=self.dilation_kernel_range,
            dilation_segment_fraction=self.dilation_segment_fraction,
            p_sample=self.p_sample,
            boundary_thickness=self.boundary_thickness,
            seed=self.seed,
        )

    def to_text(self) -> str:
        lines = ["# blobcanvas pipeline configuration"]
        for f in dataclasses.fields(self):
            if f.name == "classes":
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        lines.extend(self.classes.to_lines())
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _convert(name: str, raw: str):
    default = getattr(PipelineConfig(), name)
    try:
        if isinstance(default, tuple):
            lo, hi = (int(v) for v in raw.split(","))
            return (lo, hi)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from exc
    return raw


def parse_config(text: str) -> PipelineConfig:
    values = {}
    classes = []
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, value = key.strip(), value.strip()
        if key.startswith("class."):
            try:
                classes.append(ClassTable.parse_entry(int(key[6:]), value))
            except ValueError as exc:
                raise ConfigError(f"line {n}: {exc}") from exc
        elif key in _FIELDS and key != "classes":
            values[key] = _convert(key, value)
        else:
            raise ConfigError(f"line {n}: unknown key {key!r}")
    if classes:
        try:
            values["classes"] = ClassTable(classes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return PipelineConfig(**values)


def load_config(path: str | os.PathLike | None = None, seed: int | None = None) -> PipelineConfig:
    """Read a config file (defaults when ``path`` is None) and apply the seed override.

    Seed precedence: explicit argument, then ``$BLOBCANVAS_SEED``, then the file.
    """
    if path is None:
        cfg = PipelineConfig()
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        cfg = parse_config(p.read_text(encoding="utf-8"))
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"${SEED_ENV} is not an integer") from exc
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    return cfg
