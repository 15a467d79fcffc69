"""MeSH: a B-slot state buffer with per-step write/read routers.

Instead of a fixed additive rule, each loop iteration runs a
compute-write-read cycle: the core output is softly written into buffer
slots, and the next state is synthesized by a soft read. Slot 0 starts as
the scaled embeddings; a transitional cycle (step t = -1, its own routers)
converts the prelude output into the first loop state h(0), and the last
loop read is h(K).

Routers are biased linear maps D -> B with a per-token softmax over slots,
unique parameters per step. The unrolling ops expose the algebra: every
read state is an elementwise-weighted combination of the embeddings and
all core outputs so far, with coefficients built from products of the
row-stochastic routing weights.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StateError
from .numerics import autodiff as ad
from .numerics.autodiff import Var

SATURATION = 1.0e6  # logit gap large enough that softmax is exactly one-hot


def default_buffer_len(n_loop):
    """Empirical buffer rule B = n_loop + 3 (one slot per major state + 2)."""
    if n_loop < 1:
        raise ConfigError(f"n_loop must be >= 1, got {n_loop}")
    return n_loop + 3


def router_param_count(plan, d_model, buffer_len, with_bias):
    """Extra parameters the routers add to a plan: 2 routers per step."""
    steps = plan.n_loop + 1  # transitional + one per loop iteration
    count = steps * d_model * buffer_len * 2
    if with_bias:
        count += steps * buffer_len * 2
    return count


# ------------------------------------------------------------------ types --

@dataclass(frozen=True)
class StepRouter:
    """Write/read router parameters for one step t in {-1, 0, ..., K-1}."""

    write_w: Var
    write_b: Var
    read_w: Var
    read_b: Var


@dataclass(frozen=True)
class RoutingWeights:
    """Row-stochastic (L, B) mixing weights emitted by one step's routers."""

    w_write: Var
    w_read: Var


@dataclass(frozen=True)
class MeshStep:
    """Numpy snapshot of one compute-write-read cycle (for the oracles)."""

    t: int
    h_m: np.ndarray
    w_write: np.ndarray
    w_read: np.ndarray
    buf_before: tuple
    buf_after: tuple


@dataclass(frozen=True)
class MeshRunRecord:
    """Everything a mesh_run did, as plain arrays: unrolling oracle input."""

    h_emb: np.ndarray
    steps: tuple          # MeshStep, length n_loop + 1 (index 0 is t = -1)
    states: tuple         # h(0) ... h(K)


@dataclass(frozen=True)
class ExpansionCoeffs:
    """Per-token expansion of each read state over {h_emb, all h_m so far}.

    coeffs[t] has shape (L, 2 + t_steps): column 0 weights h_emb, column
    1 + s weights the core output of cycle s (cycle 0 is transitional).
    """

    basis: tuple          # "h_emb", "h_m(-1)", "h_m(0)", ...
    coeffs: tuple         # one (L, n_basis) array per read state h(0)..h(K)


def router_names(n_loop):
    """Checkpoint parameter names, in serialization order."""
    names = []
    for t in range(-1, n_loop):
        for direction in ("write", "read"):
            for field in ("w", "b"):
                names.append(f"mesh.router.{t}.{direction}.{field}")
    return names


def routers_from_params(params, n_loop):
    """Assemble the per-step RouterSet out of a flat parameter dict."""
    routers = []
    for t in range(-1, n_loop):
        routers.append(StepRouter(
            write_w=params[f"mesh.router.{t}.write.w"],
            write_b=params[f"mesh.router.{t}.write.b"],
            read_w=params[f"mesh.router.{t}.read.w"],
            read_b=params[f"mesh.router.{t}.read.b"],
        ))
    return routers


# ------------------------------------------------------------- primitives --

def mesh_init(h_emb, buffer_len):
    """Fresh buffer: slot 0 holds h_emb, the rest are zero."""
    if buffer_len < 2:
        raise ConfigError(f"buffer needs at least 2 slots, got {buffer_len}")
    zero = np.zeros_like(h_emb.data)
    return [h_emb] + [Var(zero.copy()) for _ in range(buffer_len - 1)]


def route(router, h):
    """Both routing matrices for one step: softmax(h W + b) per router."""
    def weights(w, b):
        return ad.softmax_rows(ad.add(ad.matmul(h, w), b))
    return RoutingWeights(w_write=weights(router.write_w, router.write_b),
                          w_read=weights(router.read_w, router.read_b))


def mesh_write(buf, h_m, w_write):
    """Soft insertion: slot b gains h_m scaled by its per-token weight."""
    return [ad.add(m, ad.mul(h_m, ad.slice_col(w_write, b)))
            for b, m in enumerate(buf)]


def mesh_read(buf, w_read):
    """Soft retrieval: per-token convex combination of the slots."""
    out = ad.mul(buf[0], ad.slice_col(w_read, 0))
    for b in range(1, len(buf)):
        out = ad.add(out, ad.mul(buf[b], ad.slice_col(w_read, b)))
    return out


# ------------------------------------------------------------ full cycles --

def mesh_run(h_emb, f_pre, f_core, n_loop, routers, buffer_len):
    """Transitional cycle + n_loop compute-write-read cycles.

    f_pre and f_core are Var -> Var callables. The transitional routers
    route on the prelude output (there is no previous loop state yet); the
    in-loop routers route on h(t). Returns (h_K, states, record) where
    states = [h(0), ..., h(K)] and record holds numpy snapshots of every
    cycle for the unrolling oracles.
    """
    if len(routers) != n_loop + 1:
        raise ConfigError(f"expected {n_loop + 1} step routers "
                          f"for n_loop={n_loop}, got {len(routers)}")
    buf = mesh_init(h_emb, buffer_len)
    steps = []
    states = []

    def cycle(t, h_m, routed_on):
        nonlocal buf
        rw = route(routers[t + 1], routed_on)
        before = tuple(m.data for m in buf)
        buf = mesh_write(buf, h_m, rw.w_write)
        h_next = mesh_read(buf, rw.w_read)
        steps.append(MeshStep(t=t, h_m=h_m.data,
                              w_write=rw.w_write.data, w_read=rw.w_read.data,
                              buf_before=before,
                              buf_after=tuple(m.data for m in buf)))
        return h_next

    h_m = f_pre(h_emb)
    h = cycle(-1, h_m, routed_on=h_m)   # transitional: routes on f_pre output
    states.append(h)
    for t in range(n_loop):
        h_m = f_core(h)
        h = cycle(t, h_m, routed_on=states[-1])
        states.append(h)
    record = MeshRunRecord(h_emb=h_emb.data, steps=tuple(steps),
                           states=tuple(s.data for s in states))
    return h, states, record


# -------------------------------------------------------- unrolling oracle --

def unroll_step(buf_before, h_m, w_write, w_read):
    """One cycle in unrolled form: historical summary + gated current compute.

    Returns (historical, gating, reconstruction) as numpy arrays, where
    historical = sum_b m_b * w_read[:, b], gating = sum_b w_write[:, b] *
    w_read[:, b] (per-token, broadcast over D), and reconstruction =
    historical + gating * h_m, algebraically equal to reading right after
    the write.
    """
    historical = np.zeros_like(h_m)
    for b, m in enumerate(buf_before):
        historical += m * w_read[:, b:b + 1]
    gating = np.sum(w_write * w_read, axis=1, keepdims=True)
    return historical, gating, historical + gating * h_m


def full_unroll(record):
    """Expansion coefficients of every read state over emb + core outputs.

    Forward-propagates per-slot composition weights through the recorded
    cycles: a write adds the current basis direction to each slot at its
    write weight, a read mixes slot compositions at the read weights.
    """
    if not record.steps or len(record.states) != len(record.steps):
        raise StateError("mesh run record is incomplete")
    n_steps = len(record.steps)
    n_basis = 1 + n_steps
    seq_len = record.h_emb.shape[0]
    n_slots = len(record.steps[0].buf_before)
    basis = ("h_emb",) + tuple(f"h_m({s.t})" for s in record.steps)

    slot = np.zeros((n_slots, seq_len, n_basis))
    slot[0, :, 0] = 1.0  # slot 0 starts as h_emb
    out = []
    for s_idx, step in enumerate(record.steps):
        slot[:, :, 1 + s_idx] += step.w_write.T  # write h_m^(s) everywhere
        read = np.zeros((seq_len, n_basis))
        for b in range(n_slots):
            read += slot[b] * step.w_read[:, b:b + 1]
        out.append(read)
    return ExpansionCoeffs(basis=basis, coeffs=tuple(out))


def reconstruct_state(record, coeffs, t):
    """Rebuild h(t) from its expansion coefficients (oracle helper)."""
    c = coeffs.coeffs[t]
    out = c[:, 0:1] * record.h_emb
    for s_idx, step in enumerate(record.steps):
        out += c[:, 1 + s_idx:2 + s_idx] * step.h_m
    return out


# ---------------------------------------------------------- pinned routers --

def _one_hot_router(d_model, buffer_len, slot, dtype):
    w = Var(np.zeros((d_model, buffer_len), dtype=dtype))
    b = np.zeros(buffer_len, dtype=dtype)
    b[slot] = SATURATION
    return w, Var(b)


def pin_simulation(target, n_loop, d_model, buffer_len, dtype=np.float64):
    """Routers under which mesh_run reproduces an additive scheme.

    Input-independent saturated logits make every softmax exactly one-hot
    (the off-slot terms underflow to zero), so the simulation is a matter
    of slot bookkeeping:

    - base: each cycle writes to and reads from its own fresh scratch slot,
      so h(t+1) is exactly that cycle's core output. Needs n_loop + 2 slots.
    - residual: every cycle accumulates into one slot, whose content is
      exactly h_m(-1) + h_m(0) + ... = h(t); reading it is the residual
      recursion. Exact for any depth.
    - anchor: h(t+1) = h_m(t) + h(0) wants the slot holding h(0) to also
      hold the current core output but none of the earlier ones. Writes
      only accumulate, so this is exact for n_loop = 1 (cohabitation) and
      approximate beyond: the same accumulating pin as residual is
      returned, which matches anchor at t = 0 and drifts afterwards.
    """
    if target not in ("base", "residual", "anchor"):
        raise ConfigError(f"unknown pin target {target!r}")
    if target == "base" and buffer_len < n_loop + 2:
        raise ConfigError(f"base pin needs at least {n_loop + 2} slots "
                          f"for n_loop={n_loop}, got {buffer_len}")
    if target in ("residual", "anchor") and buffer_len < 3:
        raise ConfigError(f"{target} pin needs at least 3 slots")

    routers = []
    for step in range(n_loop + 1):
        slot = step + 1 if target == "base" else 1
        ww, wb = _one_hot_router(d_model, buffer_len, slot, dtype)
        rw, rb = _one_hot_router(d_model, buffer_len, slot, dtype)
        routers.append(StepRouter(write_w=ww, write_b=wb,
                                  read_w=rw, read_b=rb))
    return routers
