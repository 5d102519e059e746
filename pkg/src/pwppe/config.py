"""Flat ``section.key=value`` experiment configuration.

Example::

    scene.width=512
    scene.defocus_sigma=0.5,4.0
    scene.harmonics=5:0.1,7:0.05
    dataset.mode=augmented
    train.iterations=10000
    variation.group4_intensity.background=0.25
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .nn import TrainConfig
from .synth import SceneSpec

DEFAULT_PHASE_PLANE = (2 * np.pi / 32, 0.004, 0.5)


def _parse_scalar(text):
    text = text.strip()
    if text in ("none", "None", ""):
        return None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _parse_scene_value(name, text):
    text = str(text).strip()
    if name == "harmonics":
        if not text or text == "none":
            return ()
        pairs = []
        for item in text.split(","):
            k, amp = item.split(":")
            pairs.append((int(k), float(amp)))
        return tuple(pairs)
    if name in ("phase_plane", "defocus_sigma"):
        if text in ("none", ""):
            return None
        return tuple(float(v) for v in text.strip("()[] ").split(","))
    if name in ("width", "height", "n_steps"):
        return int(text)
    return float(text)


def scene_from_items(items, base=None):
    names = set(SceneSpec.field_names())
    kwargs = {}
    for key, value in items.items():
        if key not in names:
            raise ConfigError(f"unknown scene parameter {key!r}")
        try:
            kwargs[key] = _parse_scene_value(key, value)
        except ValueError as exc:
            raise ConfigError(f"scene.{key}: cannot parse {value!r}") from exc
    if base is None:
        return SceneSpec(**kwargs)
    return replace(base, **kwargs)


def default_scene():
    """The desk-scale acceptance scene: 512x512, N=6, period 32 px,
    binary-defocused from sigma 0.5 px (left) to 4.0 px (right), noise 0.01."""
    return SceneSpec(
        width=512, height=512, period=32.0, n_steps=6,
        phase_plane=DEFAULT_PHASE_PLANE, defocus_sigma=(0.5, 4.0),
        noise_sigma=0.01, background=0.5, modulation=0.4,
    )


def default_variations():
    """Scene deltas mirroring the four generalization groups."""
    return {
        "group1_defocus": {"defocus_sigma": (1.0, 6.0)},
        "group2_pose": {"phase_plane": (2 * np.pi / 30, -0.006, 1.2)},
        "group3_pose": {"phase_plane": (2 * np.pi / 34, 0.010, -2.0)},
        "group4_intensity": {"background": 0.25, "modulation": 0.2},
    }


@dataclass
class ExperimentConfig:
    scene: SceneSpec = field(default_factory=default_scene)
    synth_kind: str = "binary"
    synth_seed: int = 1
    dataset_mode: str = "augmented"
    sample_fraction: float = 0.01
    dataset_seed: int = 0
    train_ratio: float = 0.5
    train: TrainConfig = field(default_factory=TrainConfig)
    eval_row: int = None
    eval_bands: tuple = (0.01, 0.05, 0.1, 0.12)
    eval_seed: int = 101
    variations: dict = field(default_factory=default_variations)

    def validate(self):
        self.scene.validate()
        self.train.validate()
        if self.dataset_mode not in ("plain", "augmented", "accelerated"):
            raise ConfigError(f"unknown dataset mode {self.dataset_mode!r}")
        if not 0 < self.sample_fraction <= 1:
            raise ConfigError(f"sample_fraction must be in (0, 1], got {self.sample_fraction}")
        if not 0 < self.train_ratio < 1:
            raise ConfigError(f"train_ratio must be in (0, 1), got {self.train_ratio}")
        for name, delta in self.variations.items():
            replace(self.scene, **delta).validate()
        return self

    def variation_scenes(self):
        return {name: replace(self.scene, **delta) for name, delta in self.variations.items()}

    def to_items(self):
        from dataclasses import asdict

        from .fileio import _fmt

        items = {}
        for key, value in asdict(self.scene).items():
            items[f"scene.{key}"] = _fmt(value)
        items["synth.kind"] = self.synth_kind
        items["synth.seed"] = str(self.synth_seed)
        items["dataset.mode"] = self.dataset_mode
        items["dataset.sample_fraction"] = repr(self.sample_fraction)
        items["dataset.seed"] = str(self.dataset_seed)
        items["dataset.train_ratio"] = repr(self.train_ratio)
        for f in fields(TrainConfig):
            items[f"train.{f.name}"] = _fmt(getattr(self.train, f.name))
        items["eval.row"] = "none" if self.eval_row is None else str(self.eval_row)
        items["eval.bands"] = _fmt(list(self.eval_bands))
        items["eval.seed"] = str(self.eval_seed)
        for name, delta in self.variations.items():
            for key, value in delta.items():
                items[f"variation.{name}.{key}"] = _fmt(value)
        return items

    def dumps(self):
        return "".join(f"{k}={v}\n" for k, v in self.to_items().items())


_SIMPLE = {
    "synth.kind": ("synth_kind", str),
    "synth.seed": ("synth_seed", int),
    "dataset.mode": ("dataset_mode", str),
    "dataset.sample_fraction": ("sample_fraction", float),
    "dataset.seed": ("dataset_seed", int),
    "dataset.train_ratio": ("train_ratio", float),
    "eval.seed": ("eval_seed", int),
}


def parse_config(text, source="<config>"):
    """Parse config text. Unspecified keys keep their defaults; a
    ``variation.*`` key anywhere replaces the default variation set."""
    cfg = ExperimentConfig()
    scene_items, train_items, variations = {}, {}, {}
    train_fields = {f.name: f.type for f in fields(TrainConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        section, _, rest = key.partition(".")
        try:
            if section == "scene":
                scene_items[rest] = value
            elif section == "train":
                if rest not in train_fields:
                    raise ConfigError(f"{source}:{lineno}: unknown train parameter {rest!r}")
                train_items[rest] = value
            elif key in _SIMPLE:
                attr, conv = _SIMPLE[key]
                setattr(cfg, attr, conv(value))
            elif key == "eval.row":
                cfg.eval_row = None if value in ("none", "") else int(value)
            elif key == "eval.bands":
                cfg.eval_bands = tuple(float(v) for v in value.split(","))
            elif section == "variation":
                name, _, param = rest.partition(".")
                if not name or not param:
                    raise ConfigError(f"{source}:{lineno}: expected variation.<name>.<scene key>")
                variations.setdefault(name, {})[param] = value
            else:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {value!r}") from exc

    cfg.scene = scene_from_items(scene_items, cfg.scene)
    if train_items:
        kwargs = {}
        for name, value in train_items.items():
            default = getattr(cfg.train, name)
            try:
                kwargs[name] = type(default)(_parse_scalar(value)) if not isinstance(default, str) else value
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"train.{name}: bad value {value!r}") from exc
        cfg.train = replace(cfg.train, **kwargs)
    if variations:
        names = set(SceneSpec.field_names())
        parsed = {}
        for name, delta in variations.items():
            for param in delta:
                if param not in names:
                    raise ConfigError(f"variation.{name}: unknown scene parameter {param!r}")
            parsed[name] = {p: _parse_scene_value(p, v) for p, v in delta.items()}
        cfg.variations = parsed
    return cfg.validate()


def load_config(path):
    from .fileio import FilesystemError

    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise FilesystemError(str(exc)) from exc
    return parse_config(text, str(path))
