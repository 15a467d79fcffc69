"""Layer-plan notation: `{l_pre}+{l_core}R{n_loop}+{l_coda}`.

A plan fixes the Prelude-Recurrent-Coda topology. "4+8R2+4" means a 4-layer
prelude, an 8-layer core applied twice, and a 4-layer coda: 24 compute layers
built from 16 unique ones. A bare integer is the non-recursive escape hatch
for plain vanilla stacks.
"""

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .errors import ConfigError, ParseError, RangeError


@dataclass(frozen=True)
class LayerPlan:
    l_pre: int
    l_core: int
    n_loop: int
    l_coda: int
    recursive: bool = True

    @property
    def n_compute(self):
        """Depth of the unrolled computation graph."""
        return self.l_pre + self.l_core * self.n_loop + self.l_coda

    @property
    def n_unique(self):
        """Layers that actually hold parameters (core counted once)."""
        return self.l_pre + self.l_core + self.l_coda

    def __str__(self):
        return format_plan(self)


def format_plan(plan):
    """Canonical string form; inverse of parse_plan."""
    if not plan.recursive:
        return str(plan.l_core)
    return f"{plan.l_pre}+{plan.l_core}R{plan.n_loop}+{plan.l_coda}"


def _take_int(s, i):
    j = i
    while j < len(s) and "0" <= s[j] <= "9":
        j += 1
    if j == i:
        raise ParseError("expected a digit", offset=i)
    return int(s[i:j]), j


def _expect(s, i, ch):
    if i >= len(s) or s[i] != ch:
        raise ParseError(f"expected {ch!r}", offset=i)
    return i + 1


def parse_plan(s):
    """Parse `INT+INTRINT+INT` (or a bare INT) into a LayerPlan.

    No whitespace anywhere; every field must be >= 1. Malformed text raises
    ParseError carrying the byte offset of the first bad character; a
    syntactically valid zero field raises RangeError.
    """
    first, i = _take_int(s, 0)
    if i == len(s):
        if first < 1:
            raise RangeError("vanilla layer count must be >= 1")
        return LayerPlan(0, first, 1, 0, recursive=False)
    i = _expect(s, i, "+")
    l_core, i = _take_int(s, i)
    i = _expect(s, i, "R")
    n_loop, i = _take_int(s, i)
    i = _expect(s, i, "+")
    l_coda, i = _take_int(s, i)
    if i != len(s):
        raise ParseError("unexpected trailing text", offset=i)
    fields = {"l_pre": first, "l_core": l_core,
              "n_loop": n_loop, "l_coda": l_coda}
    for name, val in fields.items():
        if val < 1:
            raise RangeError(f"{name} must be >= 1, got {val}")
    return LayerPlan(first, l_core, n_loop, l_coda)


def param_reduction(plan):
    """Percentage of non-embedding parameters saved by sharing the core.

    Uniform per-layer cost model: 100 * (1 - n_unique / n_compute).
    """
    if not plan.recursive:
        raise ConfigError("param_reduction needs a recursive plan")
    return 100.0 * (1.0 - plan.n_unique / plan.n_compute)


def format_percent(value, decimals=1):
    """Fixed-point percentage with half-up rounding (31.25 -> '31.3')."""
    q = Decimal(1).scaleb(-decimals)
    return str(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))
