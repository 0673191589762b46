"""Command-line surface: train / eval / diversity / fewshot / mi-oracle /
gradcheck / sweep.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.  Human
output uses 4 decimal places; CSV artifacts keep full precision.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import harness, metrics
from .agent import CheckpointError
from .gradcheck import run_all
from .harness import (ConfigError, FewShotConfig, RunConfig, build_agent,
                      fewshot_adapt, load_config_file, sweep, train_run)
from .numerics import NumericError


def _config_keys_help() -> str:
    lines = ["config keys (key=value) and defaults:"]
    for f in dataclasses.fields(RunConfig):
        default = f.default
        if f.name == "hidden_sizes":
            default = ",".join(str(x) for x in default)
        lines.append(f"  {f.name}={default}")
    return "\n".join(lines)


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must be key=value, got {pair!r}")
        k, v = pair.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _load(args) -> RunConfig:
    overrides = _parse_overrides(args.set or [])
    if args.config:
        return load_config_file(args.config, overrides)
    return RunConfig.from_items(overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentrl",
        description="Latent-conditioned actor-critic training and analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p, checkpoint=False):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        if checkpoint:
            p.add_argument("--checkpoint", required=True)
            p.add_argument("--force", action="store_true",
                           help="load despite a config-hash mismatch")

    p = sub.add_parser("train", help="run a full training run",
                       epilog=_config_keys_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    add_config_args(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("eval", help="per-latent deterministic returns of a checkpoint",
                       epilog=_config_keys_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    add_config_args(p, checkpoint=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--grid", type=int, default=8, help="number of latent draws")
    p.add_argument("--eval-seed", type=int, default=0)

    p = sub.add_parser("diversity", help="diversity score of a checkpoint",
                       epilog=_config_keys_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    add_config_args(p, checkpoint=True)
    p.add_argument("--policies", type=int, default=8)
    p.add_argument("--h", type=float, default=None,
                   help="kernel length scale (default: config diversity_h)")
    p.add_argument("--eval-seed", type=int, default=0)

    p = sub.add_parser("fewshot", help="few-shot adaptation of a checkpoint",
                       epilog=_config_keys_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    add_config_args(p, checkpoint=True)
    p.add_argument("--budget", type=int, default=8)
    p.add_argument("--final-episodes", type=int, default=5)
    p.add_argument("--test-variant", default="blocked")
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--out", help="optional JSON report path")

    p = sub.add_parser("mi-oracle",
                       help="exact MI oracle on the ring construction")
    p.add_argument("--env", default="ring", choices=["ring"])
    p.add_argument("--n-states", type=int, default=4)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of all loss gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("sweep", help="run a one-axis config sweep",
                       epilog=_config_keys_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    add_config_args(p)
    p.add_argument("--axis", metavar="KEY=V1,V2,...",
                   help="swept key and its values")
    p.add_argument("--seeds", default="0", help="comma-separated seeds")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_train(args) -> int:
    config = _load(args)
    result = train_run(config, args.out)
    print(f"run complete: {result.metrics_path}")
    if result.final_eval:
        fe = result.final_eval
        print(f"final eval: ret_mean={fe['ret_mean']:.4f} "
              f"mi_bound={fe['mi_bound']:.4f} diversity={fe['diversity']:.4f}")
    return 0


def _cmd_eval(args) -> int:
    config = _load(args)
    agent = build_agent(config)
    from .agent import load_checkpoint
    load_checkpoint(args.checkpoint, agent, config.hash(), force=args.force)
    env = config.make_env()
    rng = np.random.default_rng(args.eval_seed)
    with open(args.out, "w") as f:
        cols = [f"z_cont{i}" for i in range(config.cont_dim)]
        if config.disc_k:
            cols.append("z_disc")
        f.write("index," + ",".join(cols) + ",ret\n")
        for i in range(args.grid):
            z_cont, z_disc = agent.spec.sample(rng)
            ret = harness._rollout(agent, env, z_cont, z_disc, rng)
            vals = [repr(float(v)) for v in z_cont]
            if config.disc_k:
                vals.append(str(z_disc))
            f.write(f"{i}," + ",".join(vals) + f",{ret!r}\n")
            print(f"z[{i}] ret={ret:.4f}")
    return 0


def _cmd_diversity(args) -> int:
    config = _load(args)
    agent = build_agent(config)
    from .agent import load_checkpoint
    load_checkpoint(args.checkpoint, agent, config.hash(), force=args.force)
    env = config.make_env()
    rng = np.random.default_rng(args.eval_seed)
    embeddings = []
    for _ in range(args.policies):
        z_cont, z_disc = agent.spec.sample(rng)
        emb = metrics.behavior_embedding(
            lambda s: agent.policy_action(s, z_cont, z_disc),
            env, config.diversity_episodes, rng)
        embeddings.append(emb.vector)
    h = args.h if args.h is not None else config.diversity_h
    score = metrics.diversity_score(embeddings, h)
    print(f"diversity={score:.4f} (M={args.policies}, h={h:.4f})")
    return 0


def _cmd_fewshot(args) -> int:
    config = _load(args)
    fs = FewShotConfig(budget_k=args.budget,
                       final_eval_episodes=args.final_episodes,
                       test_variant=args.test_variant)
    rng = np.random.default_rng(args.eval_seed)
    res = fewshot_adapt(args.checkpoint, config, fs, rng,
                        force_hash=args.force)
    print(f"best_z_cont={np.array2string(res.best_z_cont, precision=4)} "
          f"best_z_disc={res.best_z_disc}")
    print(f"adapted return: {res.adapted_mean:.4f} +- {res.adapted_std:.4f} "
          f"(budget episodes={res.candidate_episodes}, "
          f"final episodes={res.final_episodes})")
    if args.out:
        with open(args.out, "w") as f:
            json.dump({
                "best_z_cont": list(res.best_z_cont),
                "best_z_disc": res.best_z_disc,
                "adapted_mean": res.adapted_mean,
                "adapted_std": res.adapted_std,
                "candidate_returns": res.candidate_returns,
                "candidate_episodes": res.candidate_episodes,
                "final_episodes": res.final_episodes,
            }, f, indent=2, sort_keys=True)
            f.write("\n")
    return 0


def _cmd_mi_oracle(args) -> int:
    from .envs import RingMdpConfig
    joint = metrics.ring_stationary_joint(RingMdpConfig(n_states=args.n_states))
    i_sz = metrics.mi_oracle(joint, metrics.MiMode.S_Z)
    i_saz = metrics.mi_oracle(joint, metrics.MiMode.SA_Z)
    print(f"I(s;z)={i_sz:.4f}  I(s,a;z)={i_saz:.4f}")
    return 0


def _cmd_gradcheck(args) -> int:
    reports = run_all(args.seed, tol=args.tol)
    ok = True
    for name, report in reports.items():
        status = "ok" if report.passed else "FAIL"
        print(f"{name}: max_rel_err={report.worst:.3e} [{status}]")
        ok = ok and report.passed
    if not ok:
        print("gradient check failed", file=sys.stderr)
        return 3
    return 0


def _cmd_sweep(args) -> int:
    base = _load(args)
    seeds = [int(s) for s in args.seeds.split(",") if s]
    configs = []
    if args.axis:
        key, _, values = args.axis.partition("=")
        if not values:
            raise ConfigError("--axis requires KEY=V1,V2,...")
        base_items = {}
        for val in values.split(","):
            for seed in seeds:
                items = dict(base_items)
                items[key.strip()] = val.strip()
                items["seed"] = str(seed)
                cfg = dataclasses.replace(
                    base, **{k: getattr(RunConfig.from_items(items), k)
                             for k in (key.strip(), "seed")})
                configs.append(cfg)
    else:
        for seed in seeds:
            configs.append(dataclasses.replace(base, seed=seed))
    agg = sweep(configs, args.out)
    print(f"sweep complete: {agg} ({len(configs)} runs)")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "diversity": _cmd_diversity,
    "fewshot": _cmd_fewshot,
    "mi-oracle": _cmd_mi_oracle,
    "gradcheck": _cmd_gradcheck,
    "sweep": _cmd_sweep,
}


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
