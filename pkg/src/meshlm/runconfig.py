"""Flat `key = value` run-configuration files.

One file carries the model, scheme, and training settings for a run; the
effective (post-override) config is echoed into the output directory so a
run can be reproduced from its artifacts alone. Lines are UTF-8, `#` starts
a comment, blank lines are ignored.
"""

import os

from .errors import ConfigError, ParseError
from .model import ModelConfig
from .plan import parse_plan
from .recurrence import SchemeSpec
from .training import TrainConfig

_BOOLS = {"true": True, "yes": True, "1": True,
          "false": False, "no": False, "0": False}

# key -> (type tag, default)
SCHEMA = {
    "d_model": ("int", 64),
    "n_heads": ("int", 4),
    "d_ff": ("int", 128),
    "vocab": ("int", 0),          # 0 = take the data source's vocab
    "max_seq": ("int", 128),
    "plan": ("str", "1+2R3+1"),
    "dtype": ("str", "f32"),
    "seed": ("int", 0),
    "scheme": ("str", "base"),
    "mesh_slots": ("int", 0),     # 0 = default buffer rule
    "share_core": ("bool", True),
    "peak_lr": ("float", 3e-3),
    "steps": ("int", 100),
    "batch": ("int", 2),
    "seq_len": ("int", 48),
    "beta1": ("float", 0.9),
    "beta2": ("float", 0.95),
    "weight_decay": ("float", 0.01),
    "warmup_frac": ("float", 0.01),
    "final_lr_frac": ("float", 0.10),
    "eval_every": ("int", 0),
    "single_epoch": ("bool", False),
    "data": ("str", "char"),      # char | needle
    "needle_distance": ("int", 0),
    "theta": ("float", 1.0),
}


def parse_config_text(text):
    """Raw key -> value strings; ParseError carries the byte offset."""
    values = {}
    offset = 0
    for line in text.split("\n"):
        body = line.split("#", 1)[0]
        if body.strip():
            if "=" not in body:
                raise ParseError("expected 'key = value'",
                                 offset + len(body) - len(body.lstrip()))
            key, _, value = body.partition("=")
            key, value = key.strip(), value.strip()
            if not key or " " in key:
                raise ParseError("malformed key",
                                 offset + len(body) - len(body.lstrip()))
            if key in values:
                raise ParseError(f"duplicate key {key!r}",
                                 offset + body.index(key))
            if not value:
                raise ParseError(f"empty value for {key!r}",
                                 offset + body.index("=") + 1)
            values[key] = value
        offset += len(line) + 1
    return values


def _coerce(key, raw):
    kind, _ = SCHEMA[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            return _BOOLS[raw.lower()]
        return raw
    except (ValueError, KeyError):
        raise ConfigError(f"bad {kind} value {raw!r} for key {key!r}")


def resolve(raw_values, overrides=None):
    """Typed settings dict: defaults <- file values <- overrides."""
    settings = {key: default for key, (_, default) in SCHEMA.items()}
    for key, raw in raw_values.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        settings[key] = _coerce(key, raw)
    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown override key {key!r}")
        settings[key] = value
    if settings["seq_len"] + 1 > settings["max_seq"]:
        raise ConfigError(f"seq_len {settings['seq_len']} + 1 exceeds "
                          f"max_seq {settings['max_seq']}")
    if settings["data"] not in ("char", "needle"):
        raise ConfigError(f"data must be char or needle, "
                          f"got {settings['data']!r}")
    return settings


def load_config(path, overrides=None):
    with open(path, encoding="utf-8") as f:
        return resolve(parse_config_text(f.read()), overrides)


def model_config(settings, vocab):
    """ModelConfig from resolved settings plus the concrete vocab size."""
    return ModelConfig(
        d_model=settings["d_model"], n_heads=settings["n_heads"],
        d_ff=settings["d_ff"], vocab=vocab, max_seq=settings["max_seq"],
        plan=parse_plan(settings["plan"]),
        scheme=SchemeSpec(kind=settings["scheme"],
                          mesh_slots=settings["mesh_slots"],
                          share_core=settings["share_core"]),
        dtype=settings["dtype"], seed=settings["seed"])


def train_config(settings):
    return TrainConfig(
        peak_lr=settings["peak_lr"], steps=settings["steps"],
        batch=settings["batch"], seq_len=settings["seq_len"],
        betas=(settings["beta1"], settings["beta2"]),
        weight_decay=settings["weight_decay"],
        warmup_frac=settings["warmup_frac"],
        final_lr_frac=settings["final_lr_frac"], seed=settings["seed"],
        dtype=settings["dtype"], eval_every=settings["eval_every"],
        single_epoch=settings["single_epoch"])


def format_config(settings):
    """Canonical `key = value` text in schema order."""
    lines = []
    for key, (kind, _) in SCHEMA.items():
        value = settings[key]
        if kind == "bool":
            value = "true" if value else "false"
        elif kind == "float":
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def echo_config(out_dir, settings):
    """Write the effective config next to the run artifacts."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "config.txt")
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_config(settings))
    return path
