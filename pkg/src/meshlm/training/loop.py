"""The optimization loop: batching, logging, evaluation, checkpointing.

Artifacts under out_dir: loss.csv (step, loss, lr, grad_norm),
needle_eval.csv (step, query_accuracy) when evaluation is on, periodic and
final checkpoints, and run.json with a small summary. All floats are logged
at 17 significant digits, so seed-identical runs produce bitwise-identical
files.
"""

import csv
import json
import os

import numpy as np

from ..kernels import active
from ..model import config_hash, forward, init_model, save_checkpoint
from ..numerics import autodiff as ad
from ..numerics.autodiff import zero_grads
from ..numerics.rng import Rng
from .data import CharSource, needle_task, query_positions
from .optim import (CLIP_NORM, adamw_step, clip_gradients, init_moments,
                    lr_at)

CHECKPOINT_FRAC = 0.10


def _g(value):
    return format(value, ".17g")


def batch_loss_and_grads(model, batch):
    """Mean cross-entropy over the batch; grads accumulate on the params."""
    scale = 1.0 / batch.tokens.shape[0]
    total = 0.0
    for tokens, targets in zip(batch.tokens, batch.targets):
        logits, _ = forward(model, tokens)
        ce = ad.cross_entropy(logits, targets)
        total += float(ce.data[0]) * scale
        ad.backward(ad.cmul(ce, scale))
    return total


def evaluate_needle(model, rng, seq_len, batch=16):
    """Fraction of sequences whose query position predicts the payload."""
    vocab = model.cfg.vocab
    distance = min(max(1, seq_len // 2), seq_len - 3)
    nb = needle_task(rng, seq_len, vocab, distance, batch=batch)
    positions = query_positions(nb.tokens, vocab)
    hits = 0
    for i, tokens in enumerate(nb.tokens):
        logits, _ = forward(model, tokens)
        q = positions[i]
        if int(np.argmax(logits.data[q])) == int(nb.targets[i, q]):
            hits += 1
    return hits / nb.tokens.shape[0]


def train(model_cfg, train_cfg, out_dir, source=None):
    """Run the full loop; returns a summary dict (also saved as run.json)."""
    os.makedirs(out_dir, exist_ok=True)
    if source is None:
        source = CharSource()
    model = init_model(model_cfg)
    moments = init_moments(model.params)
    batch_rng = Rng(train_cfg.seed, 0).split("batches")
    eval_rng = Rng(train_cfg.seed, 0).split("needle-eval")
    cadence = max(1, round(CHECKPOINT_FRAC * train_cfg.steps))

    clip_events = 0
    losses = []
    eval_path = os.path.join(out_dir, "needle_eval.csv")
    eval_file = None
    eval_writer = None
    if train_cfg.eval_every > 0 and model_cfg.vocab >= 8:
        eval_file = open(eval_path, "w", newline="")
        eval_writer = csv.writer(eval_file)
        eval_writer.writerow(["step", "query_accuracy"])

    with open(os.path.join(out_dir, "loss.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "loss", "lr", "grad_norm"])
        for step in range(train_cfg.steps):
            if train_cfg.single_epoch:
                batch = source.sequential(train_cfg.batch, train_cfg.seq_len)
            else:
                batch = source.sample(batch_rng, train_cfg.batch,
                                      train_cfg.seq_len)
            zero_grads(model.params)
            loss = batch_loss_and_grads(model, batch)
            grad_norm = clip_gradients(model.params)
            if grad_norm > CLIP_NORM:
                clip_events += 1
            lr = adamw_step(model.params, moments, step, train_cfg)
            writer.writerow([step, _g(loss), _g(lr), _g(grad_norm)])
            losses.append(loss)

            if eval_writer and (step + 1) % train_cfg.eval_every == 0:
                acc = evaluate_needle(model, eval_rng.split(f"step{step}"),
                                      train_cfg.seq_len)
                eval_writer.writerow([step, _g(acc)])
            if (step + 1) % cadence == 0 and step + 1 < train_cfg.steps:
                save_checkpoint(
                    os.path.join(out_dir, f"step_{step + 1:06d}.ckpt"), model)

    if eval_file:
        eval_file.close()
    save_checkpoint(os.path.join(out_dir, "final.ckpt"), model)

    summary = {
        "steps": train_cfg.steps,
        "first_loss": losses[0],
        "final_loss": losses[-1],
        "clip_events": clip_events,
        "backend": active(),
        "config": config_hash(model_cfg),
    }
    with open(os.path.join(out_dir, "run.json"), "w") as f:
        json.dump(summary, f, indent=1)
        f.write("\n")
    return summary
