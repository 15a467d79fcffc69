"""Model configuration and its integrity checks."""

import hashlib
import json
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..mesh import default_buffer_len
from ..plan import LayerPlan
from ..recurrence import SchemeSpec


@dataclass(frozen=True)
class ModelConfig:
    d_model: int
    n_heads: int
    d_ff: int
    vocab: int
    max_seq: int
    plan: LayerPlan
    scheme: SchemeSpec = field(default_factory=SchemeSpec)
    dtype: str = "f32"
    seed: int = 0

    def __post_init__(self):
        for name in ("d_model", "n_heads", "d_ff", "max_seq"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.vocab < 2:
            raise ConfigError("vocab must be >= 2")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by "
                              f"n_heads {self.n_heads}")
        if (self.d_model // self.n_heads) % 2 != 0:
            raise ConfigError("head dim must be even for rotate-half")
        if self.dtype not in ("f32", "f64"):
            raise ConfigError(f"dtype must be 'f32' or 'f64', got {self.dtype}")
        if not self.scheme.share_core:
            if self.scheme.kind != "mesh" and self.plan.recursive:
                raise ConfigError("share_core=False needs the mesh scheme "
                                  "or a non-recursive plan")
        if self.scheme.kind == "mesh":
            if self.scheme.mesh_slots and \
                    self.scheme.mesh_slots < self.plan.n_loop + 1:
                raise ConfigError(
                    f"mesh needs at least n_loop+1 = {self.plan.n_loop + 1} "
                    f"slots, got {self.scheme.mesh_slots}")

    @property
    def head_dim(self):
        return self.d_model // self.n_heads

    @property
    def buffer_len(self):
        """Configured slot count, or the default rule when left at 0."""
        if self.scheme.mesh_slots:
            return self.scheme.mesh_slots
        return default_buffer_len(self.plan.n_loop)


def config_to_dict(cfg):
    return {
        "d_model": cfg.d_model, "n_heads": cfg.n_heads, "d_ff": cfg.d_ff,
        "vocab": cfg.vocab, "max_seq": cfg.max_seq, "plan": str(cfg.plan),
        "scheme": {"kind": cfg.scheme.kind,
                   "mesh_slots": cfg.scheme.mesh_slots,
                   "share_core": cfg.scheme.share_core},
        "dtype": cfg.dtype, "seed": cfg.seed,
    }


def config_from_dict(d):
    from ..plan import parse_plan
    scheme = SchemeSpec(kind=d["scheme"]["kind"],
                        mesh_slots=d["scheme"]["mesh_slots"],
                        share_core=d["scheme"]["share_core"])
    return ModelConfig(d_model=d["d_model"], n_heads=d["n_heads"],
                       d_ff=d["d_ff"], vocab=d["vocab"], max_seq=d["max_seq"],
                       plan=parse_plan(d["plan"]), scheme=scheme,
                       dtype=d["dtype"], seed=d["seed"])


def config_hash(cfg):
    """Stable short digest identifying a model configuration."""
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
