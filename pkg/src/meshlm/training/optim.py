"""AdamW with decoupled decay, the warmup+cosine schedule, and norm clipping.

Weight decay is skipped only for layernorm gains/biases and router biases;
every other parameter (including attention/MLP biases) decays.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericalError
from ..kernels import impl as K

ADAM_EPS = 1e-8
CLIP_NORM = 1.0


@dataclass(frozen=True)
class TrainConfig:
    peak_lr: float
    steps: int
    batch: int
    seq_len: int
    betas: tuple = (0.9, 0.95)
    weight_decay: float = 0.01
    warmup_frac: float = 0.01
    final_lr_frac: float = 0.10
    seed: int = 0
    dtype: str = "f32"
    eval_every: int = 0
    single_epoch: bool = False

    def __post_init__(self):
        if self.steps < 1 or self.batch < 1 or self.seq_len < 2:
            raise ConfigError("steps/batch must be >= 1, seq_len >= 2")
        if self.peak_lr <= 0.0:
            raise ConfigError(f"peak_lr must be positive, got {self.peak_lr}")
        if not 0.0 < self.warmup_frac < 1.0:
            raise ConfigError(f"warmup_frac must be in (0,1), "
                              f"got {self.warmup_frac}")
        if not 0.0 <= self.final_lr_frac < 1.0:
            raise ConfigError(f"final_lr_frac must be in [0,1), "
                              f"got {self.final_lr_frac}")
        if not (0.0 <= self.betas[0] < 1.0 and 0.0 <= self.betas[1] < 1.0):
            raise ConfigError(f"betas must be in [0,1), got {self.betas}")

    @property
    def warmup_steps(self):
        return max(1, round(self.warmup_frac * self.steps))


def lr_at(step, cfg):
    """Linear ramp 0 -> peak over warmup, then cosine to final_lr_frac*peak.

    The junction is continuous (both pieces give peak at the warmup end) and
    the last step lands exactly on final_lr_frac * peak.
    """
    warmup = cfg.warmup_steps
    if step <= warmup:
        return cfg.peak_lr * step / warmup
    final = cfg.final_lr_frac * cfg.peak_lr
    span = max(1, cfg.steps - 1 - warmup)
    progress = min(1.0, (step - warmup) / span)
    return final + (cfg.peak_lr - final) * 0.5 * (1.0 + math.cos(
        math.pi * progress))


def decays(name):
    """Whether weight decay applies to the named parameter."""
    parts = name.split(".")
    if "ln1" in parts or "ln2" in parts or parts[0] == "final_ln":
        return False
    if parts[0] == "mesh" and parts[-1] == "b":
        return False
    return True


def grad_global_norm(params):
    """Global L2 norm over every gradient, f64."""
    total = 0.0
    for var in params.values():
        if var.grad is not None:
            total += K.sumsq(var.grad)
    return math.sqrt(total)


def clip_gradients(params, max_norm=CLIP_NORM):
    """Scale all gradients so the global norm is at most max_norm.

    Returns the pre-clip norm; clipping happened iff it exceeds max_norm.
    """
    norm = grad_global_norm(params)
    if norm > max_norm:
        scale = max_norm / norm
        for var in params.values():
            if var.grad is not None:
                var.grad *= scale
    return norm


class Moments:
    """First/second-moment f64 buffers plus the update count.

    Bias correction depends on how many updates these buffers have seen,
    which is independent of the schedule step (e.g. fresh moments on a
    resumed run restart their own correction).
    """

    def __init__(self, params):
        self.t = 0
        self.buffers = {
            name: (np.zeros(var.data.shape, dtype=np.float64),
                   np.zeros(var.data.shape, dtype=np.float64))
            for name, var in params.items()}


def init_moments(params):
    return Moments(params)


def adamw_step(params, moments, step, cfg):
    """One decoupled-weight-decay update over every parameter with a grad.

    `step` drives the lr schedule only. Raises NumericalError before
    touching any parameter if a gradient is non-finite, so an aborted step
    leaves the model unchanged.
    """
    for name, var in params.items():
        if var.grad is not None and not np.all(np.isfinite(var.grad)):
            raise NumericalError(f"non-finite gradient for {name!r} "
                                 f"at step {step}; step aborted")
    lr = lr_at(step, cfg)
    b1, b2 = cfg.betas
    moments.t += 1
    for name, var in params.items():
        if var.grad is None:
            continue
        m, v = moments.buffers[name]
        wd = cfg.weight_decay if decays(name) else 0.0
        K.adamw_update(var.data.reshape(-1), var.grad.reshape(-1),
                       m.reshape(-1), v.reshape(-1), moments.t,
                       lr, b1, b2, ADAM_EPS, wd)
    return lr
