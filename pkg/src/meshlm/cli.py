"""Command-line surface: train, probe, report, params, ablate-buffer, selftest.

Exit codes: 0 success, 1 runtime failure, 2 usage error. All file artifacts
land under the --out directory; MESH_SEED overrides the config seed.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import runconfig
from .diagnostics import METRICS, aggregate, dump_trace, write_rows
from .errors import ConfigError, MeshlmError
from .mesh import router_param_count
from .model import config_hash, forward, init_model, load_checkpoint
from .numerics.rng import Rng
from .plan import format_percent, param_reduction, parse_plan
from .recurrence import SchemeSpec
from .training import CharSource, NeedleSource, train
from .training.data import make_corpus


def _seed_env():
    env = os.environ.get("MESH_SEED")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"MESH_SEED must be an integer, got {env!r}")


def _seed_override(settings):
    seed = _seed_env()
    if seed is not None:
        settings["seed"] = seed
    return settings


def _make_source(settings, corpus_path=None):
    if settings["data"] == "needle":
        if settings["vocab"] < 8:
            raise ConfigError("needle data needs an explicit vocab >= 8")
        return NeedleSource(settings["vocab"], settings["needle_distance"])
    if corpus_path:
        with open(corpus_path, encoding="utf-8") as f:
            return CharSource(f.read())
    return CharSource()


def _resolve_vocab(settings, source):
    if settings["vocab"]:
        if hasattr(source, "vocab") and source.vocab.size != settings["vocab"]:
            raise ConfigError(
                f"config vocab {settings['vocab']} != corpus vocab "
                f"{source.vocab.size}; use vocab = 0 to take the corpus size")
        return settings["vocab"]
    if hasattr(source, "vocab"):
        return source.vocab.size
    raise ConfigError("vocab = 0 needs a corpus-backed data source")


def cmd_train(args):
    settings = _seed_override(runconfig.load_config(args.config))
    source = _make_source(settings, args.corpus)
    vocab = _resolve_vocab(settings, source)
    settings["vocab"] = vocab
    runconfig.echo_config(args.out, settings)
    summary = train(runconfig.model_config(settings, vocab),
                    runconfig.train_config(settings), args.out, source=source)
    print(f"trained {summary['steps']} steps: "
          f"loss {summary['first_loss']:.4f} -> {summary['final_loss']:.4f} "
          f"({summary['clip_events']} clipped)")
    return 0


def cmd_probe(args):
    model = load_checkpoint(args.ckpt)
    cfg = model.cfg
    seed = cfg.seed
    env_seed = _seed_env()
    if env_seed is not None:
        seed = env_seed
    rng = Rng(seed, 0).split("probe")
    seq_len = min(args.seq_len, cfg.max_seq - 1)

    if args.data == "char":
        source = CharSource(open(args.corpus).read() if args.corpus
                            else make_corpus())
        if source.vocab.size != cfg.vocab:
            raise ConfigError(
                f"checkpoint vocab {cfg.vocab} != corpus vocab "
                f"{source.vocab.size}; probe with --data random instead")
    samples = []
    for i in range(args.samples):
        if args.data == "char":
            batch = source.sample(rng.split(f"s{i}"), 1, seq_len)
            tokens = batch.tokens[0]
        else:
            tokens = rng.split(f"s{i}").integers(0, cfg.vocab, (seq_len,))
        _, trace = forward(model, tokens)
        sample_id = f"{i:04d}"
        dump_trace(args.out, sample_id, trace, config_hash(cfg))
        samples.append(sample_id)
    print(f"dumped {len(samples)} samples to {args.out}")
    return 0


def cmd_report(args):
    metrics = list(METRICS) if args.metric == "all" else [args.metric]
    for metric in metrics:
        rows = aggregate(args.dump, metric, theta=args.theta)
        write_rows(args.out, metric, rows)
        print(f"# {metric}")
        fields = list(rows[0]) if rows else []
        print(" ".join(fields))
        for row in rows:
            print(" ".join(f"{row[k]:.6g}" if isinstance(row[k], float)
                           else str(row[k]) for k in fields))
    return 0


def cmd_params(args):
    plan = parse_plan(args.plan)
    scheme = SchemeSpec(kind=args.scheme) if args.scheme != "mesh" else \
        SchemeSpec(kind="mesh", mesh_slots=args.buffer)
    print(f"plan {args.plan}: n_compute {plan.n_compute}, "
          f"unique layers {plan.n_unique}")
    if plan.recursive:
        print(f"parameter reduction: {format_percent(param_reduction(plan))}%")
    if scheme.kind == "mesh":
        buffer_len = args.buffer or plan.n_loop + 3
        biased = router_param_count(plan, args.hidden, buffer_len, True)
        plain = router_param_count(plan, args.hidden, buffer_len, False)
        print(f"router parameters (buffer {buffer_len}, biased): {biased:,}")
        print(f"router parameters (unbiased): {plain:,}")
    return 0


def cmd_ablate_buffer(args):
    settings = _seed_override(runconfig.load_config(args.config))
    if settings["scheme"] != "mesh":
        raise ConfigError("ablate-buffer needs scheme = mesh")
    source = _make_source(settings, args.corpus)
    vocab = _resolve_vocab(settings, source)
    settings["vocab"] = vocab
    n_loop = parse_plan(settings["plan"]).n_loop
    rows = []
    for k in range(4):
        run = dict(settings, mesh_slots=n_loop + 1 + k)
        out_k = os.path.join(args.out, f"k{k}")
        runconfig.echo_config(out_k, run)
        summary = train(runconfig.model_config(run, vocab),
                        runconfig.train_config(run), out_k, source=source)
        rows.append((k, n_loop + 1 + k, summary["final_loss"]))
        print(f"k={k} buffer={n_loop + 1 + k} "
              f"final_loss={summary['final_loss']:.6f}")
    with open(os.path.join(args.out, "ablate.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["k", "buffer_len", "final_loss"])
        for k, buf, loss in rows:
            writer.writerow([k, buf, format(loss, ".17g")])
    return 0


# ------------------------------------------------------------- selftest ----

def _selftest_checks():
    from .mesh import (StepRouter, default_buffer_len, full_unroll, mesh_run,
                       pin_simulation, reconstruct_state, route, unroll_step)
    from .numerics import autodiff as ad
    from .numerics.autodiff import Var
    from .numerics.gradcheck import grad_check
    from .recurrence import run_loop

    rng = np.random.default_rng(99)
    checks = []

    def routers_for(n_loop, d, buf):
        return [StepRouter(Var(rng.standard_normal((d, buf)) * 0.5),
                           Var(rng.standard_normal(buf) * 0.5),
                           Var(rng.standard_normal((d, buf)) * 0.5),
                           Var(rng.standard_normal(buf) * 0.5))
                for _ in range(n_loop + 1)]

    # routing rows: stochasticity and write conservation
    worst_sum, worst_cons = 0.0, 0.0
    rows = 0
    while rows < 10_000:
        L, d, buf = 50, 8, int(rng.integers(2, 7))
        router = routers_for(0, d, buf)[0]
        h = Var(rng.standard_normal((L, d)))
        rw = route(router, h)
        for w in (rw.w_write.data, rw.w_read.data):
            worst_sum = max(worst_sum, float(np.max(np.abs(
                w.sum(axis=1) - 1.0))))
        h_m = rng.standard_normal((L, d))
        slots = [rng.standard_normal((L, d)) for _ in range(buf)]
        delta = sum(slots[b] + h_m * rw.w_write.data[:, b:b + 1] - slots[b]
                    for b in range(buf))
        worst_cons = max(worst_cons, float(
            np.max(np.abs(delta - h_m)) / np.max(np.abs(h_m))))
        rows += 2 * L
    checks.append(("routing row sums", worst_sum <= 1e-12,
                   f"max |1 - sum| = {worst_sum:.2e}"))
    checks.append(("write conservation", worst_cons <= 1e-12,
                   f"max rel = {worst_cons:.2e}"))

    # single-step unrolling identity
    worst = 0.0
    for _ in range(1000):
        L, d, buf = 6, 5, int(rng.integers(2, 7))
        slots = [rng.standard_normal((L, d)) for _ in range(buf)]
        h_m = rng.standard_normal((L, d))
        def stoch():
            w = np.abs(rng.standard_normal((L, buf))) + 0.01
            return w / w.sum(axis=1, keepdims=True)
        ww, wr = stoch(), stoch()
        _, _, recon = unroll_step(slots, h_m, ww, wr)
        direct = sum((slots[b] + h_m * ww[:, b:b + 1]) * wr[:, b:b + 1]
                     for b in range(buf))
        worst = max(worst, float(np.max(np.abs(recon - direct))))
    checks.append(("unroll step identity", worst <= 1e-14,
                   f"max abs = {worst:.2e}"))

    # full-run unrolling identity
    worst = 0.0
    for _ in range(20):
        n_loop = int(rng.integers(1, 5))
        buf = int(rng.integers(2, 7))
        d = 6
        h_emb = Var(rng.standard_normal((4, d)))
        w_core = Var(rng.standard_normal((d, d)) * 0.4)
        core = lambda h: ad.matmul(h, w_core)
        _, _, record = mesh_run(h_emb, lambda h: h, core, n_loop,
                                routers_for(n_loop, d, buf), buf)
        coeffs = full_unroll(record)
        for t in range(n_loop + 1):
            err = (np.max(np.abs(reconstruct_state(record, coeffs, t)
                                 - record.states[t]))
                   / np.max(np.abs(record.states[t])))
            worst = max(worst, float(err))
    checks.append(("full unroll identity", worst <= 1e-10,
                   f"max rel = {worst:.2e}"))

    # pinned simulations against the recurrence module
    d, L = 16, 8
    h_emb = Var(rng.standard_normal((L, d)))
    w_pre = Var(rng.standard_normal((d, d)) * 0.3)
    w_core = Var(rng.standard_normal((d, d)) * 0.3)
    pre = lambda h: ad.matmul(h, w_pre)
    core = lambda h: ad.matmul(h, w_core)

    def pin_error(kind, n_loop):
        buf = default_buffer_len(n_loop)
        routers = pin_simulation(kind, n_loop, d, buf)
        h_k, _, _ = mesh_run(h_emb, pre, core, n_loop, routers, buf)
        want, _ = run_loop(SchemeSpec(kind), pre(h_emb), h_emb, core, n_loop)
        return float(np.max(np.abs(h_k.data - want.data))
                     / np.max(np.abs(want.data)))

    base_err = pin_error("base", 2)
    res_err = pin_error("residual", 2)
    anchor1_err = pin_error("anchor", 1)
    checks.append(("pin base K=2", base_err <= 1e-12,
                   f"rel = {base_err:.2e}"))
    checks.append(("pin residual K=2", res_err <= 1e-4,
                   f"rel = {res_err:.2e}"))
    checks.append(("pin anchor K=1", anchor1_err <= 1e-10,
                   f"rel = {anchor1_err:.2e}"))
    anchor2_err = pin_error("anchor", 2)
    checks.append(("pin anchor K=2 (informational)", None,
                   f"rel = {anchor2_err:.2e}; exact anchor simulation needs "
                   f"h(0) and the step-0 write both isolated and co-located, "
                   f"which one convex read cannot provide"))

    # gradient fidelity on a small mesh model
    from .model import ModelConfig
    cfg = ModelConfig(d_model=8, n_heads=2, d_ff=12, vocab=11, max_seq=8,
                      plan=parse_plan("1+1R2+1"),
                      scheme=SchemeSpec(kind="mesh"), dtype="f64", seed=2)
    model = init_model(cfg)
    tokens = np.random.default_rng(5).integers(0, 11, 6)
    targets = np.random.default_rng(6).integers(0, 11, 6)

    def loss():
        from .numerics import autodiff as ad2
        logits, _ = forward(model, tokens)
        return ad2.cross_entropy(logits, targets)

    err = grad_check(loss, model.params, samples_per_tensor=2)
    checks.append(("grad check (mesh model)", err <= 1e-4,
                   f"max rel = {err:.2e}"))
    return checks


def cmd_selftest(args):
    failed = 0
    for name, passed, detail in _selftest_checks():
        if passed is None:
            print(f"note {name}: {detail}")
        elif passed:
            print(f"ok   {name}: {detail}")
        else:
            failed += 1
            print(f"FAIL {name}: {detail}")
    if failed:
        print(f"{failed} check(s) failed")
        return 1
    print("all oracle checks passed")
    return 0


# ------------------------------------------------------------- dispatch ----

def build_parser():
    parser = argparse.ArgumentParser(
        prog="meshlm",
        description="Recursive transformer with a routed memory buffer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--corpus", help="path to a UTF-8 text corpus")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("probe", help="capture states from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--seq-len", type=int, default=48)
    p.add_argument("--data", choices=("char", "random"), default="char")
    p.add_argument("--corpus", help="path to a UTF-8 text corpus")
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("report", help="aggregate a dump into CSV/JSON")
    p.add_argument("--dump", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metric", choices=METRICS + ("all",), default="all")
    p.add_argument("--theta", type=float, default=1.0)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("params", help="router/parameter accounting for a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--hidden", type=int, default=2048)
    p.add_argument("--scheme", default="mesh")
    p.add_argument("--buffer", type=int, default=0)
    p.set_defaults(fn=cmd_params)

    p = sub.add_parser("ablate-buffer",
                       help="train across scratchpad sizes k = 0..3")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--corpus", help="path to a UTF-8 text corpus")
    p.set_defaults(fn=cmd_ablate_buffer)

    p = sub.add_parser("selftest", help="run the oracle suite")
    p.set_defaults(fn=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return args.fn(args)
    except MeshlmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
