"""Tracker configuration and its JSON form.

The document has four sections: ``lifecycle``, ``association``, ``noise`` and
``runtime``. Per-category tables are keyed by category, category group
(``vehicle``, ``vulnerable``) or ``default``; see :mod:`bevtrack.categories`.
Keys starting with ``_`` are comments and are skipped.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Union

from .association import AssocConfig
from .categories import lookup
from .errors import MalformedDocument, SchemaViolation
from .filters import NoiseConfig
from .geometry import IouWeights

DEFAULT_CONFIG_NAME = "default_config.json"


@dataclass(frozen=True)
class LifecycleParams:
    """Birth, confirmation and deletion rules for one category."""

    confirm_hits: int = 2
    max_misses: int = 3
    score_threshold: float = 0.0
    spawn_threshold: float = 0.0
    nms_iou_threshold: float = 0.5

    def __post_init__(self):
        if self.confirm_hits < 1:
            raise ValueError(f"confirm_hits must be >= 1, got {self.confirm_hits}")
        if self.max_misses < 0:
            raise ValueError(f"max_misses must be >= 0, got {self.max_misses}")
        for name in ("score_threshold", "spawn_threshold", "nms_iou_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.spawn_threshold < self.score_threshold:
            raise ValueError("spawn_threshold must not be below score_threshold")


def _default_lifecycle() -> dict:
    return {
        "vehicle": LifecycleParams(confirm_hits=2, max_misses=3),
        "vulnerable": LifecycleParams(confirm_hits=2, max_misses=2),
        "default": LifecycleParams(confirm_hits=2, max_misses=3),
    }


def _default_noise() -> dict:
    return {"default": NoiseConfig()}


@dataclass(frozen=True)
class TrackerConfig:
    lifecycle: Mapping[str, LifecycleParams] = field(default_factory=_default_lifecycle)
    association: AssocConfig = AssocConfig()
    noise: Mapping[str, NoiseConfig] = field(default_factory=_default_noise)
    rv_enabled: bool = True
    # emit predictions for confirmed tracks that missed this frame
    emit_coasted: bool = False

    def lifecycle_for(self, category: str) -> LifecycleParams:
        return lookup(self.lifecycle, category)

    def noise_for(self, category: str) -> NoiseConfig:
        return lookup(self.noise, category)

    def with_overrides(self, **changes) -> "TrackerConfig":
        """Copy with top-level fields or ``association`` fields replaced."""
        assoc_fields = {f.name for f in dataclasses.fields(AssocConfig)}
        assoc = {k: changes.pop(k) for k in list(changes) if k in assoc_fields}
        cfg = dataclasses.replace(self, **changes)
        if assoc:
            cfg = dataclasses.replace(cfg, association=dataclasses.replace(cfg.association, **assoc))
        return cfg


# ---------------------------------------------------------------------------
# JSON


def _strip(obj: Mapping, where: str) -> dict:
    if not isinstance(obj, Mapping):
        raise SchemaViolation(f"{where}: expected an object")
    return {k: v for k, v in obj.items() if not str(k).startswith("_")}


def _build(cls, obj: Mapping, where: str):
    known = {f.name for f in dataclasses.fields(cls)}
    data = _strip(obj, where)
    unknown = sorted(set(data) - known)
    if unknown:
        raise SchemaViolation(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise SchemaViolation(f"{where}: {exc}") from exc


def _table(cls, obj: Mapping, where: str) -> dict:
    table = {k: _build(cls, v, f"{where}.{k}") for k, v in _strip(obj, where).items()}
    if "default" not in table:
        raise SchemaViolation(f"{where}: a 'default' entry is required")
    return table


def config_from_dict(doc: Mapping) -> TrackerConfig:
    doc = _strip(doc, "config")
    unknown = sorted(set(doc) - {"lifecycle", "association", "noise", "runtime"})
    if unknown:
        raise SchemaViolation(f"config: unknown sections {unknown}")
    kwargs = {}
    if "lifecycle" in doc:
        kwargs["lifecycle"] = _table(LifecycleParams, doc["lifecycle"], "lifecycle")
    if "noise" in doc:
        kwargs["noise"] = _table(NoiseConfig, doc["noise"], "noise")
    if "association" in doc:
        assoc = _strip(doc["association"], "association")
        if "weights" in assoc:
            assoc["weights"] = _build(IouWeights, assoc["weights"], "association.weights")
        for key in ("threshold_bev", "threshold_rv"):
            if key in assoc:
                table = _strip(assoc[key], f"association.{key}")
                if "default" not in table:
                    raise SchemaViolation(f"association.{key}: a 'default' entry is required")
                assoc[key] = table
        kwargs["association"] = _build(AssocConfig, assoc, "association")
    if "runtime" in doc:
        runtime = _strip(doc["runtime"], "runtime")
        unknown = sorted(set(runtime) - {"rv_enabled", "emit_coasted"})
        if unknown:
            raise SchemaViolation(f"runtime: unknown keys {unknown}")
        for key, value in runtime.items():
            if not isinstance(value, bool):
                raise SchemaViolation(f"runtime.{key}: expected a boolean")
            kwargs[key] = value
    return TrackerConfig(**kwargs)


def config_to_dict(cfg: TrackerConfig) -> dict:
    assoc = dataclasses.asdict(cfg.association)
    return {
        "lifecycle": {k: dataclasses.asdict(v) for k, v in cfg.lifecycle.items()},
        "association": assoc,
        "noise": {k: dataclasses.asdict(v) for k, v in cfg.noise.items()},
        "runtime": {"rv_enabled": cfg.rv_enabled, "emit_coasted": cfg.emit_coasted},
    }


def loads_config(text: Union[str, bytes]) -> TrackerConfig:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedDocument(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def load_config(path: Union[str, Path, None] = None) -> TrackerConfig:
    """Read a config file; ``None`` loads the shipped defaults."""
    if path is None:
        return loads_config(default_config_text())
    return loads_config(Path(path).read_bytes())


def default_config_text() -> str:
    return resources.files("bevtrack").joinpath(DEFAULT_CONFIG_NAME).read_text(encoding="utf-8")
