"""Prelude-Recurrent-Coda transformer: config, init, forward, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ModelConfig, config_hash, config_to_dict
from .network import (
    BlockStack, Model, StateTrace, apply_stack, embed, forward, init_model,
    stage_names,
)

__all__ = [
    "ModelConfig", "config_hash", "config_to_dict",
    "BlockStack", "Model", "StateTrace", "apply_stack", "embed", "forward",
    "init_model", "stage_names", "save_checkpoint", "load_checkpoint",
]
