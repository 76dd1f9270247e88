"""Experiment config documents (YAML or JSON) and the bundled presets.

A config looks like::

    instance:
      family: {kind: bernoulli}        # or {kind: gaussian, sigma2: 1.0}
      means: [0.2, 0.4, 0.5, 0.55, 0.7]
      eps: 0.1
    strategy: eps-tas                  # eps-tas[:EPS] | fixed:w1,..,wK | kl-lucb | ugape | kl-racing
    threshold: {kind: practical, delta: 0.1}
    n_reps: 1000
    base_seed: 0
    horizon_cap: 1000000
    output: {dir: results}

Only ``instance`` is required. ``preset: NAME`` may replace ``instance``.
"""
from __future__ import annotations

import json
from importlib import resources

import jsonschema
import yaml

from .families import Family
from .harness import DEFAULT_CAP, ExperimentConfig
from .oracle import BanditInstance
from .strategies import parse_strategy
from .thresholds import ThresholdSpec

_FAMILY = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "gaussian"}, "sigma2": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "bernoulli"}},
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

INSTANCE_SCHEMA = {
    "type": "object",
    "properties": {
        "family": _FAMILY,
        "means": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "eps": {"type": "number", "minimum": 0},
    },
    "required": ["family", "means"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "instance": INSTANCE_SCHEMA,
        "preset": {"type": "string"},
        "strategy": {"type": "string"},
        "threshold": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["practical", "universal", "refined", "gaussian1"]},
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "n_reps": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "horizon_cap": {"type": "integer", "minimum": 1},
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid config; ``errors`` lists (field path, message) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p or '<root>'}: {m}" for p, m in self.errors))


def _path(err) -> str:
    return ".".join(str(p) for p in err.absolute_path)


def load_document(text: str) -> dict:
    text = text.strip()
    try:
        doc = json.loads(text) if text.startswith("{") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError([("", f"not a valid YAML/JSON document: {exc}")]) from None
    if not isinstance(doc, dict):
        raise ConfigError([("", "config must be a mapping")])
    return doc


def presets() -> dict:
    text = resources.files("epsbai").joinpath("data/presets.yaml").read_text()
    return yaml.safe_load(text)


def preset(name: str) -> dict:
    table = presets()
    if name not in table:
        raise ConfigError([("preset", f"unknown preset {name!r}; available: {sorted(table)}")])
    return table[name]


def parse_instance(data: dict, path: str = "instance") -> BanditInstance:
    errors = [(f"{path}.{_path(e)}".rstrip("."), e.message)
              for e in jsonschema.Draft202012Validator(INSTANCE_SCHEMA).iter_errors(data)]
    if errors:
        raise ConfigError(errors)
    try:
        return BanditInstance(Family.from_dict(data["family"]), tuple(data["means"]), data.get("eps", 0.0))
    except ValueError as exc:
        raise ConfigError([(f"{path}.means", str(exc))]) from None


def parse_config(text_or_doc) -> ExperimentConfig:
    doc = load_document(text_or_doc) if isinstance(text_or_doc, str) else dict(text_or_doc)
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(((_path(e), e.message) for e in validator.iter_errors(doc)), key=lambda x: x[0])
    if errors:
        raise ConfigError(errors)
    if "instance" in doc and "preset" in doc:
        raise ConfigError([("preset", "give either instance or preset, not both")])
    if "preset" in doc:
        inst_doc, where = preset(doc["preset"])["instance"], "preset"
    elif "instance" in doc:
        inst_doc, where = doc["instance"], "instance"
    else:
        raise ConfigError([("instance", "required (or give a preset)")])
    instance = parse_instance(inst_doc, where)

    strategy = doc.get("strategy", "eps-tas")
    try:
        parse_strategy(strategy)
    except ValueError as exc:
        raise ConfigError([("strategy", str(exc))]) from None
    thr = doc.get("threshold", {"kind": "practical"})
    threshold = ThresholdSpec(thr["kind"], thr.get("delta", 0.1), instance.n_arms)
    try:
        return ExperimentConfig(
            instance=instance,
            strategy=strategy,
            threshold=threshold,
            n_reps=doc.get("n_reps", 1000),
            base_seed=doc.get("base_seed", 0),
            horizon_cap=doc.get("horizon_cap", DEFAULT_CAP),
            out_dir=doc.get("output", {}).get("dir"),
        )
    except ValueError as exc:
        raise ConfigError([("", str(exc))]) from None


def serialize_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc.strerror}")]) from None
    return parse_config(text)


def preset_instance(name: str) -> BanditInstance:
    return parse_instance(preset(name)["instance"], "preset")
