"""Loop recurrence schemes for the recursive core.

Each iteration computes h_{t+1} = core(h_t) + h_sup, where the supplement
h_sup distinguishes the schemes: nothing (base), the previous state
(residual), the first loop state (anchor), or the scaled embeddings
(anchor*). The two combination schemes generalize this to a learnable
3-way mix of core output, h_0, and h_emb — static uses free scalar
coefficients, dynamic recomputes them each step from the mean-pooled
previous state through a small linear head.

The mesh scheme lives in its own module; run_loop only dispatches the
additive family.
"""

from dataclasses import dataclass

from .errors import ConfigError
from .numerics import autodiff as ad

KINDS = ("base", "residual", "anchor", "anchor_star",
         "static_comb", "dynamic_comb", "mesh")
ADDITIVE_KINDS = ("base", "residual", "anchor", "anchor_star")
COMB_KINDS = ("static_comb", "dynamic_comb")


@dataclass(frozen=True)
class SchemeSpec:
    """Which recurrence rule the loop runs (configuration only).

    Trainable scheme parameters (comb coefficients, routers) live in the
    model's parameter set, not here. mesh_slots 0 means "use the default
    buffer rule" and is resolved at model construction.
    """

    kind: str = "base"
    mesh_slots: int = 0
    share_core: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scheme kind {self.kind!r}; "
                              f"expected one of {', '.join(KINDS)}")


def loop_step(kind, h_t, h_0, h_emb, core):
    """One additive-scheme iteration: core(h_t) plus the kind's supplement."""
    out = core(h_t)
    if kind == "base":
        return out
    if kind == "residual":
        return ad.add(out, h_t)
    if kind == "anchor":
        return ad.add(out, h_0)
    if kind == "anchor_star":
        return ad.add(out, h_emb)
    raise ConfigError(f"loop_step cannot run scheme {kind!r}")


def comb_step(spec, h_t, h_0, h_emb, core, params):
    """One combination-scheme iteration: alpha1*core(h_t) + alpha2*h_0 + alpha3*h_emb."""
    if spec.kind == "static_comb":
        coefs = params["comb.alpha"]
    elif spec.kind == "dynamic_comb":
        pooled = ad.mean_rows(h_t)
        coefs = ad.add(ad.matmul(pooled, params["comb.head.w"]),
                       params["comb.head.b"])
    else:
        raise ConfigError(f"comb_step cannot run scheme {spec.kind!r}")
    return ad.lincomb3(coefs, core(h_t), h_0, h_emb)


def run_loop(spec, h_0, h_emb, core, n_loop, params=None):
    """Iterate the scheme's step op n_loop times.

    core is a callable Var -> Var; for unshared cores the caller passes a
    closure that advances its own stack index per application. Returns
    (h_K, [h(1), ..., h(K)]).
    """
    if n_loop < 1:
        raise ConfigError(f"n_loop must be >= 1, got {n_loop}")
    states = []
    h = h_0
    for _ in range(n_loop):
        if spec.kind in COMB_KINDS:
            h = comb_step(spec, h, h_0, h_emb, core, params)
        else:
            h = loop_step(spec.kind, h, h_0, h_emb, core)
        states.append(h)
    return h, states
