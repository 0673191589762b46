#!/usr/bin/env python3
"""Train the latent-conditioned learner against its baselines on the
point-mass task and print a return/diversity comparison table.

Each (mode, seed) pair is a full training run; results aggregate the final
evaluation row of every run.  Expect a few minutes per run at the default
desk-scale settings.
"""

import argparse
import os

import numpy as np

from latentrl.harness import RunConfig, train_run

DESK = dict(env="pointvel", total_steps=60_000, hidden_sizes=(32, 32),
            latent_embed_dim=8, batch=64, d_info=1, alpha_info=1.0,
            cont_dim=0, disc_k=8, eval_interval=60_000, diversity_h=0.05)

MODES = ("latent_td3", "td3", "diayn_s", "diayn_sa", "smerl_gate")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/compare")
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--steps", type=int, default=DESK["total_steps"])
    parser.add_argument("--modes", default=",".join(MODES))
    args = parser.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]
    rows = []
    for mode in args.modes.split(","):
        rets, divs = [], []
        for seed in seeds:
            cfg = RunConfig(**DESK, baseline_mode=mode, seed=seed)
            cfg.total_steps = args.steps
            cfg.eval_interval = args.steps
            out_dir = os.path.join(args.out, f"{mode}_seed{seed}")
            res = train_run(cfg, out_dir)
            rets.append(res.final_eval["ret_mean"])
            divs.append(res.final_eval["diversity"])
        rows.append((mode, np.mean(rets), np.std(rets), np.mean(divs),
                     np.std(divs)))
        print(f"done: {mode}")
    print(f"\n{'mode':<12} {'ret_mean':>10} {'ret_std':>9} "
          f"{'div_mean':>10} {'div_std':>10}")
    for mode, rm, rs, dm, ds in rows:
        print(f"{mode:<12} {rm:>10.4f} {rs:>9.4f} {dm:>10.4g} {ds:>10.4g}")


if __name__ == "__main__":
    main()
