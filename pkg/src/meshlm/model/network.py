"""Prelude-Recurrent-Coda transformer over the autodiff layer.

A model is a config plus a flat name -> Var parameter dict; forward is a
pure function of (params, tokens). Blocks are sequential pre-LN: attention
with rotary positions on the full head dimension, then a GELU MLP, each
behind a residual. The output head is tied to the embedding table behind a
final layernorm.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, NumericalError, StateError
from ..mesh import mesh_run, router_names, routers_from_params
from ..numerics import autodiff as ad
from ..numerics.autodiff import Var
from ..numerics.rng import Rng
from ..numerics.tensor import np_dtype
from ..recurrence import run_loop

INIT_STD = 0.02
MASK_VALUE = -1.0e9  # large enough that exp() underflows to exact zero

_LAYER_MATS = (
    ("attn.wq", "dd"), ("attn.wk", "dd"), ("attn.wv", "dd"),
    ("attn.wo", "dd_out"), ("mlp.w1", "dff"), ("mlp.w2", "ffd_out"),
)
_LAYER_VECS = (
    ("attn.bq", "d"), ("attn.bk", "d"), ("attn.bv", "d"),
    ("attn.bo", "d"), ("mlp.b1", "ff"), ("mlp.b2", "d"),
    ("ln1.g", "ones"), ("ln1.b", "d"), ("ln2.g", "ones"), ("ln2.b", "d"),
)


@dataclass(frozen=True)
class BlockStack:
    """A named stack of pre-LN blocks, addressed by parameter prefixes."""

    role: str                 # "pre" | "core" | "coda"
    prefixes: tuple           # one per layer, e.g. ("core.0", "core.1")


class StateTrace:
    """Ordered stage -> array capture of one forward pass.

    Stages follow the fixed vocabulary h_emb, h(0) ... h(K), h_out; each may
    be recorded once. Block input/output pairs (per whole stack application)
    feed the effort metric.
    """

    def __init__(self):
        self.stages = {}
        self.blocks = []          # (label, input array, output array)
        self.mesh_record = None

    def record(self, name, var):
        if name in self.stages:
            raise StateError(f"stage {name!r} captured twice")
        self.stages[name] = var.data

    def add_block(self, label, x, y):
        self.blocks.append((label, x, y))


def stage_names(n_loop):
    """The full stage vocabulary for a K-loop model, in order."""
    return ["h_emb"] + [f"h({t})" for t in range(n_loop + 1)] + ["h_out"]


class Model:
    def __init__(self, cfg, params):
        self.cfg = cfg
        self.params = params

    def parameters(self):
        return self.params

    def stacks(self):
        """Prelude stack, per-loop core stacks, coda stack."""
        plan = self.cfg.plan
        pre = BlockStack("pre", tuple(f"pre.{i}" for i in range(plan.l_pre)))
        if self.cfg.scheme.share_core:
            shared = tuple(f"core.{i}" for i in range(plan.l_core))
            cores = [BlockStack("core", shared)] * plan.n_loop
        else:
            cores = [BlockStack("core", tuple(f"core{t}.{i}"
                                              for i in range(plan.l_core)))
                     for t in range(plan.n_loop)]
        coda = BlockStack("coda", tuple(f"coda.{i}"
                                        for i in range(plan.l_coda)))
        return pre, cores, coda


def _layer_param_specs(prefix, cfg):
    d, ff = cfg.d_model, cfg.d_ff
    shapes = {"dd": (d, d), "dd_out": (d, d), "dff": (d, ff),
              "ffd_out": (ff, d), "d": (d,), "ff": (ff,), "ones": (d,)}
    for name, kind in _LAYER_MATS + _LAYER_VECS:
        yield f"{prefix}.{name}", kind, shapes[kind]


def init_model(cfg):
    """Build a model with depth-aware initialization.

    Plain weight matrices and the embedding table are N(0, 0.02); the two
    per-block output projections (attention out-proj, MLP down-proj) are
    scaled down by 1/sqrt(2 * n_compute) so the residual stream's variance
    stays bounded over the unrolled depth; biases start at zero and
    layernorm gains at one.
    """
    dt = np_dtype(cfg.dtype)
    rng = Rng(cfg.seed)
    out_std = INIT_STD / math.sqrt(2.0 * cfg.plan.n_compute)

    params = {}

    def put(name, value):
        params[name] = Var(value, requires_grad=True)

    def gaussian(name, shape, std):
        put(name, rng.split(name).normal(shape, std=std, dtype=dt))

    gaussian("embed.w", (cfg.vocab, cfg.d_model), INIT_STD)

    model = Model(cfg, params)
    pre, cores, coda = model.stacks()
    prefixes = list(pre.prefixes) + list(coda.prefixes)
    if cfg.scheme.share_core:
        prefixes += list(cores[0].prefixes)
    else:
        for stack in cores:
            prefixes += list(stack.prefixes)
    for prefix in prefixes:
        for name, kind, shape in _layer_param_specs(prefix, cfg):
            if kind in ("dd", "dff"):
                gaussian(name, shape, INIT_STD)
            elif kind in ("dd_out", "ffd_out"):
                gaussian(name, shape, out_std)
            elif kind == "ones":
                put(name, np.ones(shape, dtype=dt))
            else:
                put(name, np.zeros(shape, dtype=dt))

    put("final_ln.g", np.ones(cfg.d_model, dtype=dt))
    put("final_ln.b", np.zeros(cfg.d_model, dtype=dt))

    kind = cfg.scheme.kind
    if kind == "static_comb":
        put("comb.alpha", np.array([1.0, 0.0, 0.0], dtype=dt))
    elif kind == "dynamic_comb":
        gaussian("comb.head.w", (cfg.d_model, 3), INIT_STD)
        put("comb.head.b", np.array([1.0, 0.0, 0.0], dtype=dt))
    elif kind == "mesh":
        for name in router_names(cfg.plan.n_loop):
            if name.endswith(".w"):
                gaussian(name, (cfg.d_model, cfg.buffer_len), INIT_STD)
            else:
                put(name, np.zeros(cfg.buffer_len, dtype=dt))
    return model


# ---------------------------------------------------------------- caching --

_mask_cache = {}
_rotary_cache = {}


def _causal_mask(seq_len, dt):
    key = (seq_len, np.dtype(dt).str)
    if key not in _mask_cache:
        mask = np.triu(np.full((seq_len, seq_len), MASK_VALUE, dtype=dt), k=1)
        _mask_cache[key] = mask
    return _mask_cache[key]


def _rotary_tables(seq_len, head_dim, dt):
    key = (seq_len, head_dim, np.dtype(dt).str)
    if key not in _rotary_cache:
        half = head_dim // 2
        inv = 10000.0 ** (-2.0 * np.arange(half, dtype=np.float64) / head_dim)
        ang = np.arange(seq_len, dtype=np.float64)[:, None] * inv[None, :]
        _rotary_cache[key] = (np.cos(ang).astype(dt), np.sin(ang).astype(dt))
    return _rotary_cache[key]


# ---------------------------------------------------------------- forward --

def embed(model, tokens):
    """h_emb: embedding rows scaled by sqrt(d_model)."""
    cfg = model.cfg
    tokens = np.asarray(tokens)
    if tokens.ndim != 1:
        raise DataError(f"tokens must be a 1-D id sequence, got rank "
                        f"{tokens.ndim}")
    if tokens.shape[0] < 1 or tokens.shape[0] > cfg.max_seq:
        raise DataError(f"sequence length {tokens.shape[0]} outside "
                        f"[1, {cfg.max_seq}]")
    if tokens.min() < 0 or tokens.max() >= cfg.vocab:
        raise DataError("token id out of range")
    rows = ad.embedding(model.params["embed.w"], tokens)
    return ad.cmul(rows, math.sqrt(cfg.d_model))


def _block(params, prefix, h, cfg):
    p = lambda suffix: params[f"{prefix}.{suffix}"]
    seq_len = h.data.shape[0]
    dt = h.data.dtype
    cos, sin = _rotary_tables(seq_len, cfg.head_dim, dt)

    x = ad.layernorm(h, p("ln1.g"), p("ln1.b"))
    q = ad.add(ad.matmul(x, p("attn.wq")), p("attn.bq"))
    k = ad.add(ad.matmul(x, p("attn.wk")), p("attn.bk"))
    v = ad.add(ad.matmul(x, p("attn.wv")), p("attn.bv"))
    qh = ad.rotary(ad.split_heads(q, cfg.n_heads), cos, sin)
    kh = ad.rotary(ad.split_heads(k, cfg.n_heads), cos, sin)
    vh = ad.split_heads(v, cfg.n_heads)
    scores = ad.cmul(ad.bmm_tb(qh, kh), 1.0 / math.sqrt(cfg.head_dim))
    scores = ad.cadd(scores, _causal_mask(seq_len, dt))
    ctx = ad.bmm(ad.softmax_rows(scores), vh)
    att = ad.add(ad.matmul(ad.merge_heads(ctx), p("attn.wo")), p("attn.bo"))
    h = ad.add(h, att)

    x = ad.layernorm(h, p("ln2.g"), p("ln2.b"))
    m = ad.gelu(ad.add(ad.matmul(x, p("mlp.w1")), p("mlp.b1")))
    m = ad.add(ad.matmul(m, p("mlp.w2")), p("mlp.b2"))
    return ad.add(h, m)


def apply_stack(model, stack, h, trace=None, label=None):
    """Run every block of a stack; optionally capture the (in, out) pair."""
    x_in = h
    for prefix in stack.prefixes:
        h = _block(model.params, prefix, h, model.cfg)
    if stack.prefixes and not np.all(np.isfinite(h.data)):
        raise NumericalError(f"non-finite activation leaving {stack.role}")
    if trace is not None and label is not None and stack.prefixes:
        trace.add_block(label, x_in.data, h.data)
    return h


def forward(model, tokens):
    """Full pass: embed, prelude, recurrence, coda, layernorm, tied head.

    Returns (logits Var of shape L x vocab, StateTrace). The recurrence is
    dispatched on the configured scheme; mesh runs keep their cycle record
    on the trace for the unrolling oracles.
    """
    cfg = model.cfg
    n_loop = cfg.plan.n_loop
    trace = StateTrace()
    pre, cores, coda = model.stacks()

    h_emb = embed(model, tokens)
    trace.record("h_emb", h_emb)

    loop_idx = [0]

    def core_fn(h):
        t = loop_idx[0]
        loop_idx[0] += 1
        return apply_stack(model, cores[t], h, trace, f"f_core_{t + 1}")

    if cfg.scheme.kind == "mesh":
        routers = routers_from_params(model.params, n_loop)

        def pre_fn(h):
            return apply_stack(model, pre, h, trace, "f_pre")

        h_k, states, record = mesh_run(h_emb, pre_fn, core_fn, n_loop,
                                       routers, cfg.buffer_len)
        for t, state in enumerate(states):
            trace.record(f"h({t})", state)
        trace.mesh_record = record
    else:
        h_0 = apply_stack(model, pre, h_emb, trace, "f_pre")
        trace.record("h(0)", h_0)
        h_k, states = run_loop(cfg.scheme, h_0, h_emb, core_fn, n_loop,
                               model.params)
        for t, state in enumerate(states, start=1):
            trace.record(f"h({t})", state)

    h_out = apply_stack(model, coda, h_k, trace, "f_coda")
    trace.record("h_out", h_out)

    x = ad.layernorm(h_out, model.params["final_ln.g"],
                     model.params["final_ln.b"])
    logits = ad.matmul_tb(x, model.params["embed.w"])
    return logits, trace
