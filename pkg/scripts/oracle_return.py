#!/usr/bin/env python3
"""Print the scripted-controller oracle return R* for the point-mass task.

R* is the return of a full-throttle ramp to the velocity cap followed by
steady-state cruising; it serves as the reference optimum for the return bar
and for the near-optimality gate of the gated baseline.
"""

import argparse

from latentrl.envs import PointVelConfig, scripted_pointvel_return


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--v-max", type=float, default=1.0)
    parser.add_argument("--dt", type=float, default=0.05)
    parser.add_argument("--ctrl-cost", type=float, default=0.01)
    parser.add_argument("--horizon", type=int, default=200)
    args = parser.parse_args()
    cfg = PointVelConfig(v_max=args.v_max, dt=args.dt,
                         ctrl_cost=args.ctrl_cost, horizon=args.horizon)
    r_star = scripted_pointvel_return(cfg)
    ceiling = args.v_max * args.horizon
    print(f"R* = {r_star:.4f} (ceiling {ceiling:.1f}, "
          f"ratio {r_star / ceiling:.4f})")


if __name__ == "__main__":
    main()
