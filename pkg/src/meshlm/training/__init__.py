"""Desk-scale optimization: AdamW, schedules, data sources, the train loop."""

from .data import (Batch, CharSource, CharVocab, NeedleSource, make_corpus,
                   needle_alphabet, needle_task, query_positions)
from .loop import batch_loss_and_grads, evaluate_needle, train
from .optim import (ADAM_EPS, CLIP_NORM, Moments, TrainConfig, adamw_step,
                    clip_gradients, decays, grad_global_norm, init_moments,
                    lr_at)

__all__ = [
    "Batch", "CharSource", "CharVocab", "NeedleSource", "make_corpus",
    "needle_alphabet", "needle_task", "query_positions", "batch_loss_and_grads",
    "evaluate_needle", "train", "ADAM_EPS", "CLIP_NORM", "Moments",
    "TrainConfig", "adamw_step", "clip_gradients", "decays",
    "grad_global_norm", "init_moments", "lr_at",
]
