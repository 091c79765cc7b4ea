"""Flat ``section.key=value`` run configuration.

Example::

    seed=7
    paths.dataset=data/odors.csv
    loss.lambda3=0.5
    model.hidden_dims=64,64
    hmfm.D=32
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .cil import LossConfig
from .model import ModelConfig
from .train import TrainConfig


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.replace(" ", "").split(",") if p)


# key -> (section, field name, parser)
KEYS: dict[str, tuple[str, str, object]] = {
    "seed": ("run", "seed", int),
    "paths.dataset": ("paths", "dataset", str),
    "paths.out_dir": ("paths", "out_dir", str),
    "paths.checkpoint": ("paths", "checkpoint", str),
    "model.mode": ("model", "mode", str),
    "model.hidden_dims": ("model", "hidden_dims", _int_list),
    "hmfm.D": ("model", "hmfm_D", int),
    "hmfm.sigma_prime": ("model", "sigma_prime", float),
    "hmfm.identity_projection": ("model", "identity_projection", _bool),
}
_PARSERS = {"float": float, "int": int, "str": str, "bool": _bool}
for _section, _cls in (("loss", LossConfig), ("train", TrainConfig)):
    for _f in dataclasses.fields(_cls):
        KEYS[f"{_section}.{_f.name}"] = (_section, _f.name, _PARSERS[str(_f.type)])


@dataclass
class RunConfig:
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    dataset: str | None = None
    out_dir: str = "out"
    checkpoint: str | None = None

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint else Path(self.out_dir) / "model.json"


def parse_lines(lines, source: str = "<config>") -> tuple[dict[str, str], list[str]]:
    values: dict[str, str] = {}
    errors: list[str] = []
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{source}:{n}: expected key=value, got {raw.strip()!r}")
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        values[key] = value
    return values, errors


def build(values: dict[str, str], errors: list[str] | None = None) -> RunConfig:
    """Build a validated :class:`RunConfig`; raises :class:`ConfigError` listing every problem."""
    errors = list(errors or [])
    sections: dict[str, dict] = {"run": {}, "paths": {}, "model": {}, "loss": {}, "train": {}}
    for key, text in values.items():
        if key not in KEYS:
            errors.append(f"unknown key {key!r}")
            continue
        section, name, parse = KEYS[key]
        try:
            sections[section][name] = parse(text)
        except ValueError as exc:
            errors.append(f"{key}: {exc}")

    parts = {}
    for section, cls in (("loss", LossConfig), ("train", TrainConfig)):
        probe = object.__new__(cls)
        for f in dataclasses.fields(cls):
            object.__setattr__(probe, f.name, sections[section].get(f.name, f.default))
        errs = cls.validate(probe)
        errors.extend(errs)
        if not errs:
            parts[section] = cls(**sections[section])
    mkw = dict(sections["model"])
    mkw["seed"] = sections["run"].get("seed", 0)
    probe = object.__new__(ModelConfig)
    for f in dataclasses.fields(ModelConfig):
        object.__setattr__(probe, f.name, mkw.get(f.name, f.default))
    errs = ModelConfig.validate(probe)
    errors.extend(errs)
    if not errs:
        parts["model"] = ModelConfig(**mkw)
    if errors:
        raise ConfigError(errors)
    return RunConfig(seed=mkw["seed"], loss=parts["loss"], model=parts["model"],
                     train=parts["train"], dataset=sections["paths"].get("dataset"),
                     out_dir=sections["paths"].get("out_dir", "out"),
                     checkpoint=sections["paths"].get("checkpoint"))


def load(path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    values: dict[str, str] = {}
    errors: list[str] = []
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"cannot read config {p}: {exc.strerror or exc}"]) from exc
        values, errors = parse_lines(text.splitlines(), str(p))
    values.update(overrides or {})
    return build(values, errors)
