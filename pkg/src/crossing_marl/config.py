"""Run configuration shared by the command-line stages.

A config file (YAML or JSON) holds top-level run settings plus one section
per stage. Unknown keys are rejected so typos fail before any work starts.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .fit import FitConfig
from .policy.bc import BCConfig
from .policy.sac import SACConfig
from .variants import ModelVariant
from .world import DEFAULT_DT, SceneGeometry

SCENES = ("corpus", "compact")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class SynthConfig:
    n_pairs: int = 30
    mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self) -> None:
        self.mix = tuple(float(m) for m in self.mix)
        if self.n_pairs < 1:
            raise ConfigError("synth.n_pairs must be positive")
        if len(self.mix) != 3 or min(self.mix) < 0 or abs(sum(self.mix) - 1.0) > 1e-6:
            raise ConfigError("synth.mix must be three non-negative proportions summing to 1")


@dataclass
class EvalConfig:
    reps: int = 5
    horizon: float = 2.0
    bins: int = 30
    deterministic: bool = False

    def __post_init__(self) -> None:
        if self.reps < 1 or self.horizon <= 0 or self.bins < 1:
            raise ConfigError("eval.reps, eval.horizon and eval.bins must be positive")


@dataclass
class RunConfig:
    variant: ModelVariant = ModelVariant.VMC
    seed: int = 0
    dt: float = DEFAULT_DT
    # "corpus" starts episodes from the initial-condition KDE of extracted data;
    # "compact" uses the short fixed-box scene for quick training
    scene: str = "corpus"
    geometry: SceneGeometry = field(default_factory=SceneGeometry)
    synth: SynthConfig = field(default_factory=SynthConfig)
    sac: SACConfig = field(default_factory=SACConfig)
    bc: BCConfig = field(default_factory=BCConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self) -> None:
        try:
            self.variant = ModelVariant.parse(self.variant)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.scene not in SCENES:
            raise ConfigError(f"scene must be one of {SCENES}, got {self.scene!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "variant": self.variant.value,
            "seed": self.seed,
            "dt": self.dt,
            "scene": self.scene,
            "geometry": self.geometry.as_dict(),
            "synth": {"n_pairs": self.synth.n_pairs, "mix": list(self.synth.mix)},
            "sac": self.sac.to_dict(),
            "bc": self.bc.to_dict(),
            "fit": dataclasses.asdict(self.fit),
            "eval": dataclasses.asdict(self.eval),
        }


_SECTIONS = {"synth": SynthConfig, "sac": SACConfig, "bc": BCConfig, "fit": FitConfig, "eval": EvalConfig}
_TOP = {"variant", "seed", "dt", "scene", "geometry", *_SECTIONS}


def _build_section(name: str, cls, data: Any):
    if data is None:
        return cls()
    if not isinstance(data, Mapping):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {unknown}")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {name!r}: {exc}") from None


def config_from_mapping(data: Mapping[str, Any] | None) -> RunConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - _TOP)
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {unknown}")
    kwargs: dict[str, Any] = {k: data[k] for k in ("variant", "seed", "dt", "scene") if k in data}
    if "seed" in kwargs:
        kwargs["seed"] = int(kwargs["seed"])
    try:
        kwargs["geometry"] = SceneGeometry.from_mapping(data.get("geometry"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for name, cls in _SECTIONS.items():
        kwargs[name] = _build_section(name, cls, data.get(name))
    return RunConfig(**kwargs)


def load_config(path: str | Path | None) -> RunConfig:
    """Read a YAML or JSON config; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is not None and not isinstance(data, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_mapping(data)
