"""Layered run configuration: defaults <- config file <- environment <- flags."""

import json
import os
from dataclasses import asdict, fields

from .training import TrainConfig

ENV_PREFIX = "CYCLETRANS_"

_FIELD_TYPES = {f.name: type(getattr(TrainConfig(), f.name)) for f in fields(TrainConfig)}


def _coerce(name, raw):
    kind = _FIELD_TYPES[name]
    if kind is bool:
        lowered = str(raw).strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean {name}={raw!r}")
    return kind(raw)


def resolve_train_config(config_path=None, env=None, overrides=None):
    """Merge the configuration layers into a TrainConfig.

    `overrides` holds explicitly provided flag values (None means not given).
    Unknown keys in the config file are rejected so typos fail loudly.
    """
    values = asdict(TrainConfig())
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - set(values)
        if unknown:
            raise ValueError(f"unknown config keys in {config_path}: {sorted(unknown)}")
        for key, raw in file_values.items():
            values[key] = _coerce(key, raw)
    env = os.environ if env is None else env
    for name in values:
        raw = env.get(ENV_PREFIX + name.upper())
        if raw is not None:
            values[name] = _coerce(name, raw)
    for name, value in (overrides or {}).items():
        if value is not None:
            values[name] = value
    return TrainConfig(**values)


def write_run_snapshot(path, subcommand, train_config, extras=None):
    """Persist the fully resolved configuration next to the produced artifact."""
    snapshot = {"subcommand": subcommand, "train_config": asdict(train_config)}
    snapshot.update(extras or {})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(snapshot, fh, indent=2, sort_keys=True)
        fh.write("\n")
