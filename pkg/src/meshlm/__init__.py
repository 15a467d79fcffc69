"""meshlm: a desk-scale recursive transformer engine.

The package implements a Prelude-Recurrent-Coda transformer whose looped core
can run under several recurrence schemes (plain cascade, residual/anchor style
additive supplements, learned linear combinations) or under MeSH: an external
B-slot state buffer with per-iteration softmax write/read routers. It also
ships the representation diagnostics used to compare the schemes (per-block
effort, RBF-kernel CKA, singular spectra), a small deterministic tensor/autodiff
layer, and an AdamW training loop.

Everything runs on CPU in numpy; hot kernels are JIT-compiled with numba when
available (see meshlm.backend).
"""

__version__ = "0.1.0"
