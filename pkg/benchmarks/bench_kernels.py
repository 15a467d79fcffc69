#!/usr/bin/env python3
"""Benchmark the numba kernels against the numpy fallback.

Imports both implementations directly (bypassing the MESHLM_BACKEND
dispatch), times each kernel best-of-N on identical inputs, and reports the
speedup plus the largest output difference observed. The matmul family is
expected to agree bitwise (max |diff| exactly 0); transcendental kernels
agree to ~1 ulp.

Usage: python3 benchmarks/bench_kernels.py [--seq 256] [--dim 256]
       [--repeats 20]
"""

import argparse
import time

import numpy as np

from meshlm.kernels import numba_impl, numpy_impl


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def max_diff(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.abs(a.astype(np.float64) - b.astype(np.float64)).max())


def build_cases(seq, dim, rng):
    """(name, shape label, args factory) for every shared kernel."""
    heads, head_dim, ff, vocab = 4, dim // 4, 4 * dim, 64

    def f32(*shape):
        return rng.standard_normal(shape).astype(np.float32)

    x = f32(seq, dim)
    w = f32(dim, ff)
    wt = f32(ff, dim)
    heads_q = f32(heads, seq, head_dim)
    heads_k = f32(heads, seq, head_dim)
    att = f32(heads, seq, seq)
    g, b = f32(dim), f32(dim)
    _, mean, rstd = numpy_impl.layernorm_fwd(x, g, b, 1e-5)
    att_probs = numpy_impl.softmax_rows(att[0])
    probs = numpy_impl.softmax_rows(f32(seq, vocab))
    targets = rng.integers(0, vocab, seq)
    cos = f32(seq, head_dim // 2)
    sin = f32(seq, head_dim // 2)
    sym = rng.standard_normal((64, 64))
    sym = sym + sym.T

    cases = [
        ("matmul", f"({seq},{dim})@({dim},{ff})", lambda K: K.matmul(x, w)),
        ("matmul_tb", f"({seq},{dim})@({ff},{dim})T",
         lambda K: K.matmul_tb(x, wt)),
        ("matmul_ta", f"({seq},{dim})T@({seq},{dim})",
         lambda K: K.matmul_ta(x, x)),
        ("bmm", f"({heads},{seq},{head_dim})x2",
         lambda K: K.bmm(att, heads_k)),
        ("bmm_tb", f"({heads},{seq},{head_dim})x2",
         lambda K: K.bmm_tb(heads_q, heads_k)),
        ("bmm_ta", f"({heads},{seq},*)",
         lambda K: K.bmm_ta(att, heads_q)),
        ("softmax_rows", f"({seq},{seq})", lambda K: K.softmax_rows(att[0])),
        ("softmax_bwd", f"({seq},{seq})",
         lambda K: K.softmax_bwd(att_probs, att[0])),
        ("layernorm_fwd", f"({seq},{dim})",
         lambda K: K.layernorm_fwd(x, g, b, 1e-5)),
        ("layernorm_bwd", f"({seq},{dim})",
         lambda K: K.layernorm_bwd(x, g, mean, rstd, x)),
        ("gelu_fwd", f"({dim},{ff})", lambda K: K.gelu_fwd(w)),
        ("gelu_bwd", f"({dim},{ff})", lambda K: K.gelu_bwd(w, w)),
        ("rotary", f"({heads},{seq},{head_dim})",
         lambda K: K.rotary(heads_q, cos, sin)),
        ("ce_fwd", f"({seq},{vocab})",
         lambda K: K.ce_fwd(probs, targets)),
        ("ce_bwd", f"({seq},{vocab})",
         lambda K: K.ce_bwd(probs, targets, 1.0)),
        ("sumsq", f"({dim},{ff})", lambda K: K.sumsq(w)),
        ("jacobi_eigvals", "(64,64)",
         lambda K: K.jacobi_eigvals(sym, 1e-10, 50)),
    ]

    # adamw mutates its buffers in place; give each backend its own copies
    # so both update the same values on every repeat.
    flat = f32(dim * ff).astype(np.float32)
    grad = f32(dim * ff).astype(np.float32)
    state = {K: (flat.copy(), np.zeros(flat.size), np.zeros(flat.size))
             for K in (numpy_impl, numba_impl)}

    def adamw(K):
        p, m, v = state[K]
        K.adamw_update(p, grad, m, v, 1, 1e-3, 0.9, 0.95, 1e-8, 0.01)
        return p

    cases.append(("adamw_update", f"({dim * ff},)", adamw))
    return cases


def flatten(result):
    if isinstance(result, tuple):
        return np.concatenate([np.asarray(r, dtype=np.float64).ravel()
                               for r in result])
    if isinstance(result, float):
        return np.asarray([result])
    return np.asarray(result)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seq", type=int, default=256)
    ap.add_argument("--dim", type=int, default=256)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = build_cases(args.seq, args.dim, rng)

    print(f"{'kernel':<16} {'shape':<24} {'numpy':>10} {'numba':>10} "
          f"{'speedup':>8} {'max|diff|':>10}")
    for name, shape, call in cases:
        ref = flatten(call(numpy_impl))
        got = flatten(call(numba_impl))   # also triggers JIT compilation
        diff = max_diff(ref, got)
        t_np = best_of(lambda: call(numpy_impl), args.repeats)
        t_nb = best_of(lambda: call(numba_impl), args.repeats)
        print(f"{name:<16} {shape:<24} {t_np * 1e3:>8.3f}ms "
              f"{t_nb * 1e3:>8.3f}ms {t_np / t_nb:>7.1f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
