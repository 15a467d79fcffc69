"""Finite-difference verification of reverse-mode gradients."""

import math

import numpy as np

from ..errors import ConfigError, NumericalError
from .autodiff import backward, zero_grads
from .rng import Rng


def grad_check(fn, params, eps=1e-4, samples_per_tensor=None, seed=0):
    """Max relative error between analytic grads and central differences.

    fn: zero-argument callable rebuilding the scalar loss graph from `params`.
    params: dict name -> Var (f64, requires_grad). The error for one entry is
    |analytic - fd| / max(1, |fd|) with fd the +-eps central difference.

    samples_per_tensor limits the check to a deterministic seeded subset of
    entries per tensor (None checks every entry); the analytic side is always
    the full backward pass.
    """
    for name, p in params.items():
        if p.data.dtype != np.float64:
            raise ConfigError(f"grad_check requires f64 params ({name} is not)")

    zero_grads(params.values())
    loss = fn()
    val = float(loss.data.reshape(-1)[0])
    if not math.isfinite(val):
        raise NumericalError("loss is not finite")
    backward(loss)
    analytic = {}
    for name, p in params.items():
        analytic[name] = (np.zeros_like(p.data) if p.grad is None
                          else p.grad.copy())

    rng = Rng(seed, 0)
    worst = 0.0
    for name in sorted(params):
        p = params[name]
        flat = p.data.reshape(-1)
        size = flat.shape[0]
        if samples_per_tensor is None or samples_per_tensor >= size:
            idxs = range(size)
        else:
            r = rng.split(name)
            idxs = np.unique(r.integers(0, size, size=samples_per_tensor))
        ga = analytic[name].reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(fn().data.reshape(-1)[0])
            flat[i] = orig - eps
            f_minus = float(fn().data.reshape(-1)[0])
            flat[i] = orig
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise NumericalError(f"non-finite loss while perturbing {name}")
            fd = (f_plus - f_minus) / (2.0 * eps)
            err = abs(ga[i] - fd) / max(1.0, abs(fd))
            if err > worst:
                worst = err
    return worst
