"""Flat `key: value` config files and flag/file/default resolution.

Keys are dotted (`section.name`). Every key the package understands is in
one registry; anything else in a config file is rejected by name. Command
line flags override file values, which override built-in defaults.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable


def _cast_int(raw: str) -> int:
    return int(raw)


def _cast_float(raw: str) -> float:
    return float(raw)


def _cast_str(raw: str) -> str:
    return raw


def _cast_optional_int(raw: str) -> int | None:
    if raw.lower() in ("none", "null", ""):
        return None
    return int(raw)


def _cast_int_list(raw: str) -> tuple[int, ...]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(int(p) for p in parts)


def _cast_alpha_list(raw: str) -> tuple[float, ...]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    values = tuple(float(p) for p in parts)
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"mixing ratio {v} outside [0, 1]")
    return values


def _choice(*options: str) -> Callable[[str], str]:
    def cast(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"must be one of {options}")
        return raw

    return cast


@dataclass(frozen=True)
class _Entry:
    cast: Callable[[str], Any]
    default: Any


REGISTRY: dict[str, _Entry] = {
    # vocabulary
    "vocab.max_size": _Entry(_cast_int, 8000),
    # interpolation model architecture
    "model.dim": _Entry(_cast_int, 128),
    "model.num_heads": _Entry(_cast_int, 4),
    "model.enc_layers": _Entry(_cast_int, 2),
    "model.dec_layers": _Entry(_cast_int, 2),
    "model.ffn_dim": _Entry(_cast_optional_int, None),
    "model.max_len": _Entry(_cast_int, 64),
    "model.dropout": _Entry(_cast_float, 0.0),
    "model.sigma_init": _Entry(_cast_float, 1.0),
    # training
    "training.steps": _Entry(_cast_int, 2000),
    "training.batch_size": _Entry(_cast_int, 16),
    "training.learning_rate": _Entry(_cast_float, 3e-4),
    "training.p_mask": _Entry(_cast_float, 0.1),
    "training.hidden_penalty": _Entry(_cast_float, 0.001),
    "training.noise_std": _Entry(_cast_float, 0.001),
    "training.alpha_sampling": _Entry(_choice("per-example", "per-minibatch"),
                                      "per-example"),
    "training.seed": _Entry(_cast_int, 0),
    "training.log_every": _Entry(_cast_int, 1),
    "training.checkpoint_every": _Entry(_cast_optional_int, None),
    # decoding
    "decode.strategy": _Entry(_choice("beam", "greedy", "sample"), "beam"),
    "decode.beam_size": _Entry(_cast_int, 4),
    "decode.max_decode_length": _Entry(_cast_optional_int, None),
    "decode.length_penalty": _Entry(_cast_float, 0.0),
    "decode.seed": _Entry(_cast_int, 0),
    # augmentation
    "augment.size": _Entry(_cast_optional_int, None),  # None: match input size
    "augment.policy": _Entry(_choice("interpolated", "sharpened", "teacher"),
                             "interpolated"),
    "augment.temperature": _Entry(_cast_float, 0.5),
    "augment.orientation": _Entry(_choice("text_aligned", "paper_literal"),
                                  "text_aligned"),
    "augment.alpha_distribution": _Entry(_choice("uniform", "beta"), "uniform"),
    "augment.beta_param": _Entry(_cast_float, 2.0),
    "augment.seed": _Entry(_cast_int, 0),
    # precision sweep
    "sweep.pairs": _Entry(_cast_int, 200),
    "sweep.alphas": _Entry(
        _cast_alpha_list,
        (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0),
    ),
    "sweep.seed": _Entry(_cast_int, 0),
    # downstream classifier
    "classifier.dim": _Entry(_cast_int, 64),
    "classifier.num_heads": _Entry(_cast_int, 2),
    "classifier.layers": _Entry(_cast_int, 1),
    "classifier.max_len": _Entry(_cast_int, 128),
    "classifier.epochs": _Entry(_cast_int, 30),
    "classifier.batch_size": _Entry(_cast_int, 8),
    "classifier.learning_rate": _Entry(_cast_float, 1e-3),
    # experiment suite
    "experiment.shots": _Entry(_cast_int, 10),
    "experiment.seeds": _Entry(_cast_int_list, (0, 1, 2, 3, 4)),
    "experiment.augment_multiplier": _Entry(_cast_int, 1),
}


def cast_value(key: str, raw: str) -> Any:
    entry = REGISTRY.get(key)
    if entry is None:
        raise ValueError(f"unknown config key '{key}'")
    try:
        return entry.cast(raw.strip())
    except ValueError as exc:
        detail = str(exc) or f"cannot parse {raw.strip()!r}"
        raise ValueError(f"config key '{key}': {detail} (got {raw.strip()!r})") \
            from exc


def parse_config_file(path) -> dict[str, Any]:
    """Parse `key: value` lines into typed values. Blank lines and lines
    starting with '#' are skipped; unknown or repeated keys are errors."""
    values: dict[str, Any] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if ":" not in stripped:
                raise ValueError(
                    f"{path}: line {lineno}: expected 'key: value', "
                    f"got {stripped!r}"
                )
            key, _, raw = stripped.partition(":")
            key = key.strip()
            if key not in REGISTRY:
                raise ValueError(f"{path}: line {lineno}: unknown config key "
                                 f"'{key}'")
            if key in values:
                raise ValueError(f"{path}: line {lineno}: duplicate config key "
                                 f"'{key}'")
            values[key] = cast_value(key, raw)
    return values


class Settings:
    """Resolved configuration: flags override file values override defaults.
    Tracks where each value came from for the run manifest."""

    def __init__(self, file_values: dict[str, Any] | None = None):
        self._file = file_values or {}
        self._flags: dict[str, Any] = {}

    def set_flag(self, key: str, value: Any) -> None:
        if key not in REGISTRY:
            raise KeyError(f"unknown config key '{key}'")
        if value is not None:
            self._flags[key] = value

    def get(self, key: str) -> Any:
        if key not in REGISTRY:
            raise KeyError(f"unknown config key '{key}'")
        if key in self._flags:
            return self._flags[key]
        if key in self._file:
            return self._file[key]
        return REGISTRY[key].default

    def source_of(self, key: str) -> str:
        if key in self._flags:
            return "flag"
        if key in self._file:
            return "file"
        return "default"

    def section(self, prefix: str) -> dict[str, Any]:
        """Resolved values of one section, keyed by the bare field name."""
        full = prefix + "."
        return {
            key[len(full):]: self.get(key)
            for key in REGISTRY
            if key.startswith(full)
        }

    def resolved(self) -> dict[str, Any]:
        out = {}
        for key in sorted(REGISTRY):
            value = self.get(key)
            if isinstance(value, tuple):
                value = list(value)
            out[key] = value
        return out
