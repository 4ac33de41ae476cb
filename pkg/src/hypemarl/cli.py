"""Command-line entry points: train, eval, export, and self-checks.

``train`` runs one seeded training job per configured seed, writing a
metric log and checkpoints under ``<out>/<variant>/seed-<k>/``. ``eval``
replays a saved checkpoint on the fixed evaluation tasks and writes
per-episode traces plus final field snapshots. ``export`` aggregates
seed logs into quartile bands. ``grad-check`` and ``env-check`` run the
numerical self-tests (finite-difference gradients, discrete PDE
identities) without touching any training state.

Relative output paths resolve against $HYPEMARL_OUTPUT_ROOT when set.
"""

import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import (build_config, build_env, config_dict, config_from_dict,
                     config_hash, effective_lrs, parse_config)
from .encoding import EncodingConfig, encode_layout, layout_positions
from .envs.fokker_planck import (FLUID_PARAMS, VACUUM_PARAMS, fp_fluid_step,
                                 fp_vacuum_step, initial_density,
                                 velocity_field)
from .envs.grid import Grid2D
from .envs.io import write_field_snapshot
from .envs.toy import toy_optimal_action, toy_step
from .errors import HypemarlError
from .hypernet import HyperSpec, critic_spec, hyper_input
from .marl import eval_tasks, evaluate, train, uncontrolled
from .metrics import MetricWriter, export_aggregate
from .nn import MlpSpec, Tape, glorot_init, grad_check, tape_grouped_mlp, tape_mlp
from .stacks import variant_select
from .surrogate import make_surrogate, surrogate_predict

OUTPUT_ROOT_VAR = "HYPEMARL_OUTPUT_ROOT"


def _resolve_out(path):
    root = os.environ.get(OUTPUT_ROOT_VAR)
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return str(path)


def _fmt(x):
    return repr(float(x))


# ------------------------------------------------------------------ train


def _run_seed(cfg, env, seed, out_root, resume=None):
    run_dir = os.path.join(out_root, cfg.variant, f"seed-{seed}")
    os.makedirs(run_dir, exist_ok=True)
    ck_dir = os.path.join(run_dir, "checkpoint")
    cdict, chash = config_dict(cfg), config_hash(cfg)

    def save_cb(snapshot):
        save_checkpoint(ck_dir, snapshot, cdict, chash)

    t0 = time.monotonic()
    with MetricWriter(os.path.join(run_dir, "metrics.csv")) as writer:
        _, artifacts = train(
            env, cfg.variant, seed, cfg.schedule,
            hyper=cfg.hyper, lrs=effective_lrs(cfg), encoding=cfg.encoding,
            writer=writer, checkpoint_cb=save_cb, resume=resume,
            probe_count=cfg.probe_count, main_hidden=cfg.main_hidden,
            hyper_hidden=cfg.hyper_hidden, plain_hidden=cfg.plain_hidden)
    wall = time.monotonic() - t0
    returns = artifacts["history"]["eval_return"]
    final = returns[-1] if len(returns) else float("nan")
    print(f"[train] {cfg.variant} seed {seed}: "
          f"final eval return {_fmt(final)}, "
          f"real episodes {artifacts['real_episodes']}/{artifacts['episodes']}, "
          f"{wall:.1f}s -> {run_dir}")
    return run_dir


def cmd_train(args):
    resume_manifest = None
    if args.resume:
        resume_manifest = load_checkpoint(args.resume)
    if args.config:
        cfg = parse_config(args.config)
    elif resume_manifest is not None:
        cfg = config_from_dict(resume_manifest["config"])
    else:
        cfg = build_config({})
    if args.variant:
        cfg = replace(cfg, variant=args.variant, lrs=None)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if args.out:
        cfg = replace(cfg, out_dir=args.out)

    resume_snap = None
    seeds = cfg.seeds
    if resume_manifest is not None:
        # guard against resuming under a different configuration
        load_checkpoint(args.resume, expect_hash=config_hash(cfg),
                        force=args.force)
        resume_snap = resume_manifest["snapshot"]
        seeds = (resume_snap["seed"],)
        if resume_snap["variant"] != cfg.variant:
            raise HypemarlError(
                f"checkpoint holds variant {resume_snap['variant']!r}, "
                f"configured variant is {cfg.variant!r}")

    env = build_env(cfg)
    out_root = _resolve_out(cfg.out_dir)
    for seed in seeds:
        _run_seed(cfg, env, seed, out_root, resume=resume_snap)
    return 0


# ------------------------------------------------------------------- eval


def _trace_rollout(env, stack, task):
    """Noise-free rollout returning per-step rows and the final field."""
    mu0, mu = task
    y = env.reset(mu0)
    stack.begin_episode(mu)
    target = env.target(mu)
    rows = []
    total = 0.0
    for t in range(1, env.t_max + 1):
        if stack.scope == "global":
            u = stack.eval_act(y[None, :])[0]
        else:
            u = stack.eval_act(y[:, None])[:, 0]
        y = env.step(y, u, mu)
        r = env.rewards(y, mu)
        total += float(r.mean())
        rows.append((t, float(r.mean()), float(np.mean((y - target) ** 2))))
    return rows, total, y


def cmd_eval(args):
    manifest = load_checkpoint(args.checkpoint)
    cfg = config_from_dict(manifest["config"])
    env = build_env(cfg)
    snap = manifest["snapshot"]
    rng = np.random.default_rng(snap["seed"])
    stack = variant_select(cfg.variant, env, rng, hyper=cfg.hyper,
                           lrs=effective_lrs(cfg), encoding=cfg.encoding,
                           probe_count=cfg.probe_count,
                           main_hidden=cfg.main_hidden,
                           hyper_hidden=cfg.hyper_hidden,
                           plain_hidden=cfg.plain_hidden)
    stack.load_state_dict(snap["stack"])

    count = args.episodes or cfg.schedule.eval_episodes
    tasks = eval_tasks(env, cfg.schedule.eval_seed, count)
    out_dir = _resolve_out(args.out) if args.out else os.path.join(
        args.checkpoint, "eval")
    os.makedirs(out_dir, exist_ok=True)

    returns, finals = [], []
    for k, task in enumerate(tasks):
        rows, total, y = _trace_rollout(env, stack, task)
        returns.append(total)
        finals.append(rows[-1][2])
        with open(os.path.join(out_dir, f"trace-{k:03d}.csv"), "w") as fh:
            fh.write("t,reward_mean,state_mse\n")
            for t, r, mse in rows:
                fh.write(f"{t},{_fmt(r)},{_fmt(mse)}\n")
        if env.grid is not None:
            write_field_snapshot(os.path.join(out_dir, f"field-{k:03d}.csv"),
                                 env.grid, y, env.t_max, task[1])

    base = uncontrolled(env, tasks)
    with open(os.path.join(out_dir, "eval_summary.csv"), "w") as fh:
        fh.write("episode,return,final_mse,uncontrolled_final_mse\n")
        for k in range(count):
            fh.write(f"{k},{_fmt(returns[k])},{_fmt(finals[k])},"
                     f"{_fmt(base['final_mses'][k])}\n")
    mean_return = float(np.mean(returns))
    print(f"[eval] checkpoint episode {manifest['episode']}: "
          f"{count} episodes, mean return {_fmt(mean_return)}, "
          f"median return {_fmt(np.median(returns))}, "
          f"final mse {_fmt(np.mean(finals))} "
          f"(uncontrolled {_fmt(base['final_mse'])}) -> {out_dir}")
    return 0


# ----------------------------------------------------------------- export


def cmd_export(args):
    out = export_aggregate(_resolve_out(args.run_dir))
    print(f"[export] wrote {out}")
    return 0


# ------------------------------------------------------------- grad-check


def _plain_mlp_error():
    spec = MlpSpec(3, (8, 8), 2, "tanh", "identity")
    rng = np.random.default_rng(11)
    theta = glorot_init(spec, rng)
    x = rng.normal(size=(5, 3))

    def f(th):
        tape = Tape()
        leaf = tape.leaf(th)
        out = tape_mlp(tape, spec, leaf, x)
        loss = tape.mean_all(tape.square(out))
        tape.backward(loss)
        return float(loss.value), leaf.grad

    return grad_check(f, theta, probes=60, rng=np.random.default_rng(12))


def _hypernet_composite_error():
    enc = EncodingConfig(dim=16, base=100.0)
    pe = encode_layout(layout_positions(2, 2), enc)
    main = critic_spec(1, 1, hidden=(6,))
    hspec = HyperSpec(main, encoding_dim=enc.dim, mu_dim=2, hidden_dims=(12,))
    rng = np.random.default_rng(13)
    theta_h = glorot_init(hspec.as_mlp(), rng)
    x = hyper_input(pe, np.array([0.3, -0.2]))
    qin = rng.normal(size=(pe.shape[0], 2))

    def f(th):
        tape = Tape()
        leaf = tape.leaf(th)
        emitted = tape_mlp(tape, hspec.as_mlp(), leaf, x)
        q = tape_grouped_mlp(tape, main, emitted, qin)
        loss = tape.mean_all(tape.square(q))
        tape.backward(loss)
        return float(loss.value), leaf.grad

    return grad_check(f, theta_h, probes=60, rng=np.random.default_rng(14))


def _surrogate_error():
    rng = np.random.default_rng(15)
    model = make_surrogate(mu_dim=2, rng=rng, hidden=(8,))
    x = rng.normal(size=(6, 4))
    y2 = rng.normal(size=(6, 1))

    def f(th):
        tape = Tape()
        leaf = tape.leaf(th)
        pred = tape_mlp(tape, model.net.spec, leaf, x)
        loss = tape.mean_all(tape.square(tape.sub(pred, y2)))
        tape.backward(loss)
        return float(loss.value), leaf.grad

    return grad_check(f, model.net.theta.copy(), probes=60,
                      rng=np.random.default_rng(16))


def cmd_grad_check(args):
    checks = [
        ("plain mlp loss", _plain_mlp_error()),
        ("hypernet-emitted critic", _hypernet_composite_error()),
        ("surrogate mse", _surrogate_error()),
    ]
    tol = 1e-5
    failed = False
    for name, err in checks:
        ok = err < tol
        failed |= not ok
        print(f"[grad-check] {name}: {'PASS' if ok else 'FAIL'} "
              f"(max rel err {err:.3e}, tol {tol:.0e})")
    return 1 if failed else 0


# -------------------------------------------------------------- env-check


def _check_vacuum_mass():
    grid = Grid2D(9, 9)
    rng = np.random.default_rng(21)
    worst = 0.0
    for _ in range(5):
        y = rng.uniform(0.1, 2.0, size=grid.n)
        u = rng.uniform(VACUUM_PARAMS.u_min, VACUUM_PARAMS.u_max, size=grid.n)
        y2 = fp_vacuum_step(y, u, VACUUM_PARAMS, grid)
        drift = grid.mass(y2) - grid.mass(y) - VACUUM_PARAMS.dt * grid.mass(u)
        worst = max(worst, abs(drift))
    return worst, 1e-10


def _check_constant_fixed_point():
    grid = Grid2D(9, 9)
    y = np.full(grid.n, 0.7)
    y2 = fp_vacuum_step(y, np.zeros(grid.n), VACUUM_PARAMS, grid)
    return float(np.abs(y2 - y).max()), 1e-10


def _check_divergence_free():
    grid = Grid2D(33, 33)
    th = 2.0 * grid.h
    worst = 0.0
    for alpha in (-1.0, -0.3, 0.0, 0.5, 1.0):
        v = velocity_field(alpha, grid)
        v1 = grid.to_2d(v[:, 0])
        v2 = grid.to_2d(v[:, 1])
        div = ((v1[1:-1, 2:] - v1[1:-1, :-2]) / th
               + (v2[2:, 1:-1] - v2[:-2, 1:-1]) / th)
        worst = max(worst, float(np.abs(div).max()))
    return worst, 1e-10


def _check_fluid_mass():
    grid = Grid2D(17, 17)
    y = initial_density([-0.4, 0.2], grid)
    worst = 0.0
    for alpha in (-1.0, 0.0, 0.8):
        y2 = fp_fluid_step(y, np.zeros(grid.n), alpha, FLUID_PARAMS, grid)
        worst = max(worst, abs(grid.mass(y2) - grid.mass(y)))
    return worst, 1e-8


def _check_toy_dynamics():
    y = np.linspace(-2.0, 2.0, 9)
    err = np.abs(toy_step(y, 0.5) - (y + 0.5)).max()
    err = max(err, np.abs(toy_optimal_action(y, 0.3)
                          - np.clip(0.3 - y, -1, 1)).max())
    return float(err), 1e-14


def cmd_env_check(args):
    checks = [
        ("vacuum mass identity", _check_vacuum_mass),
        ("constant-field fixed point", _check_constant_fixed_point),
        ("velocity divergence-free", _check_divergence_free),
        ("fluid mass conservation", _check_fluid_mass),
        ("toy dynamics", _check_toy_dynamics),
    ]
    failed = False
    for name, fn in checks:
        err, tol = fn()
        ok = err <= tol
        failed |= not ok
        print(f"[env-check] {name}: {'PASS' if ok else 'FAIL'} "
              f"(max err {err:.3e}, tol {tol:.0e})")
    return 1 if failed else 0


# ------------------------------------------------------------------ parser


def build_parser():
    p = argparse.ArgumentParser(
        prog="hypemarl",
        description="Decentralized hypernetwork-based control of "
                    "parametric PDE environments.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run seeded training jobs")
    t.add_argument("--config", help="TOML run configuration")
    t.add_argument("--variant", help="override the configured variant")
    t.add_argument("--seed", type=int, help="train this single seed only")
    t.add_argument("--out", help="override the configured output directory")
    t.add_argument("--resume", help="checkpoint directory to continue from")
    t.add_argument("--force", action="store_true",
                   help="resume even if the config hash disagrees")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="replay a checkpoint on eval tasks")
    e.add_argument("--checkpoint", required=True,
                   help="checkpoint directory to load")
    e.add_argument("--episodes", type=int,
                   help="number of eval tasks (default: the schedule's)")
    e.add_argument("--out", help="output directory (default: <ckpt>/eval)")
    e.set_defaults(fn=cmd_eval)

    x = sub.add_parser("export", help="aggregate seed logs into quartiles")
    x.add_argument("--run-dir", required=True,
                   help="directory holding seed-*/metrics.csv")
    x.set_defaults(fn=cmd_export)

    g = sub.add_parser("grad-check",
                       help="finite-difference gradient self-test")
    g.set_defaults(fn=cmd_grad_check)

    v = sub.add_parser("env-check", help="discrete PDE identity self-test")
    v.set_defaults(fn=cmd_env_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except HypemarlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
