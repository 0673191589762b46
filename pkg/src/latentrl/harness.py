"""Run orchestration: seeded training runs with periodic evaluation, metric
logging, checkpointing, the few-shot adaptation protocol, and config sweeps.

A run is a pure function of its RunConfig: RNG streams are split per concern
from the master seed, logs store full-precision floats, and checkpoints are
byte-stable.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .agent import (Agent, BaselineMode, LatentSpec, Ltd3Config, config_hash_of,
                    fit_posterior, load_checkpoint, save_checkpoint)
from .envs import (PointVelConfig, PointVelVariant, RingMdpConfig, make_env,
                   scripted_pointvel_return)
from .metrics import behavior_embedding, diversity_score, mi_lower_bound
from .replay import ReplayBuffer

CSV_HEADER = "step,ret_mean,ret_std,mi_bound,diversity,critic_loss,j_q,j_info,gate_frac"

# RNG stream names, in spawn order.  Toggling one concern never reseeds another.
_STREAMS = ("init", "env", "latent", "explore", "critic_batch", "info_batch",
            "target_noise", "eval")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Flat, serializable description of one training run."""

    env: str = "pointvel"
    variant: str = "train"
    seed: int = 0
    # latent
    cont_dim: int = 2
    disc_k: int = 0
    # point-mass environment
    v_max: float = 1.0
    dt: float = 0.05
    ctrl_cost: float = 0.01
    accel_gain: float = 4.0
    speed_limit: float = 2.0
    horizon: int = 200
    block_y_low: float = -5.0
    block_y_high: float = 1.0
    block_penalty: float = 1.0
    drift_force: float = 0.5
    # ring environment
    ring_n_states: int = 4
    ring_horizon: int = 16
    # learner
    gamma: float = 0.99
    lr: float = 3e-4
    batch: int = 256
    tau: float = 0.005
    c_clip: float = 0.3
    d_atr: int = 2
    d_info: int = 4
    explore_sigma: float = 0.1
    target_sigma: float = 0.2
    target_noise_clip: float = 0.5
    alpha_info: float = 1.0
    warmup_steps: int = 1000
    total_steps: int = 200_000
    baseline_mode: str = "latent_td3"
    beta_intrinsic: float = 0.5
    eps_smerl: float = 0.1
    r_star: float = 0.0
    buffer_capacity: int = 1_000_000
    hidden_sizes: tuple[int, ...] = (256, 256)
    latent_embed_dim: int = 32
    # evaluation / logging
    eval_interval: int = 5000
    eval_episodes: int = 10
    diversity_policies: int = 8
    diversity_episodes: int = 1
    diversity_h: float = 1.0
    mi_eval_samples: int = 2048
    checkpoint_interval: int = 0  # 0 = final checkpoint only

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "hidden_sizes":
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return config_hash_of(self.to_text())

    @classmethod
    def from_items(cls, items: dict[str, str]) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(items) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, raw in items.items():
            kwargs[key] = _parse_value(known[key].type, raw, key)
        return cls(**kwargs)

    # -- derived objects ----------------------------------------------------

    def latent_spec(self) -> LatentSpec:
        return LatentSpec(self.cont_dim, self.disc_k)

    def ltd3_config(self) -> Ltd3Config:
        try:
            mode = BaselineMode(self.baseline_mode)
        except ValueError:
            raise ConfigError(f"unknown baseline_mode: {self.baseline_mode}")
        r_star = self.r_star
        if (mode is BaselineMode.SMERL_GATE and r_star == 0.0
                and self.env == "pointvel"):
            r_star = scripted_pointvel_return(self.point_config())
        return Ltd3Config(
            gamma=self.gamma, lr=self.lr, batch=self.batch, tau=self.tau,
            c_clip=self.c_clip, d_atr=self.d_atr, d_info=self.d_info,
            explore_sigma=self.explore_sigma, target_sigma=self.target_sigma,
            target_noise_clip=self.target_noise_clip,
            alpha_info=0.0 if mode is BaselineMode.TD3 else self.alpha_info,
            warmup_steps=self.warmup_steps, total_steps=self.total_steps,
            baseline_mode=mode, beta_intrinsic=self.beta_intrinsic,
            eps_smerl=self.eps_smerl, r_star=r_star,
            buffer_capacity=self.buffer_capacity,
            hidden_sizes=tuple(self.hidden_sizes),
            latent_embed_dim=self.latent_embed_dim,
        )

    def point_config(self) -> PointVelConfig:
        return PointVelConfig(
            v_max=self.v_max, dt=self.dt, ctrl_cost=self.ctrl_cost,
            accel_gain=self.accel_gain, speed_limit=self.speed_limit,
            horizon=self.horizon, variant=PointVelVariant(self.variant),
            block_y_low=self.block_y_low, block_y_high=self.block_y_high,
            block_penalty=self.block_penalty, drift_force=self.drift_force,
        )

    def ring_config(self) -> RingMdpConfig:
        return RingMdpConfig(n_states=self.ring_n_states,
                             horizon=self.ring_horizon)

    def make_env(self):
        return make_env(self.env, self.variant,
                        ring_config=self.ring_config(),
                        point_config=self.point_config())


def _parse_value(ftype, raw: str, key: str):
    raw = raw.strip()
    try:
        if ftype in ("int", int):
            return int(raw)
        if ftype in ("float", float):
            return float(raw)
        if ftype in ("str", str):
            return raw
        # hidden_sizes tuple
        return tuple(int(x) for x in raw.split(",") if x)
    except ValueError:
        raise ConfigError(f"cannot parse value for {key}: {raw!r}")


def load_config_file(path: str, overrides: dict[str, str] | None = None) -> RunConfig:
    """Flat key=value config file; CLI overrides win over file values."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    items: dict[str, str] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            items[key.strip()] = val.strip()
    if overrides:
        items.update(overrides)
    return RunConfig.from_items(items)


def spawn_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.Generator(np.random.PCG64(ss))
            for name, ss in zip(_STREAMS, children)}


def build_agent(config: RunConfig,
                rngs: dict[str, np.random.Generator] | None = None) -> Agent:
    env = config.make_env()
    spec = env.spec
    if spec.discrete_actions is not None:
        raise ConfigError(
            f"training requires a continuous-action environment, not {config.env}")
    rngs = rngs or spawn_streams(config.seed)
    return Agent(spec.state_dim, spec.action_dim, spec.action_low,
                 spec.action_high, config.latent_spec(), config.ltd3_config(),
                 rngs)


def _fmt(x: float) -> str:
    return repr(float(x))


def _posterior_inputs(agent: Agent, batch) -> np.ndarray:
    if agent.nets.posterior_input == "s":
        return batch.s
    return np.concatenate([batch.s, batch.a], axis=1)


def skill_latents(spec: LatentSpec, m: int,
                  rng: np.random.Generator) -> list[tuple[np.ndarray, int | None]]:
    """m latents covering the prior: discrete classes are enumerated in order
    (cycling past disc_k) while continuous dimensions are sampled uniformly.

    Enumeration avoids duplicate-class draws when the latent is discrete, so a
    skill evaluation scores each learned skill once; for purely continuous
    latents this reduces to prior sampling."""
    out = []
    for i in range(m):
        z_cont = rng.uniform(-1.0, 1.0, size=spec.cont_dim)
        z_disc = i % spec.disc_k if spec.disc_k > 0 else None
        out.append((z_cont, z_disc))
    return out


def evaluate_agent(agent: Agent, config: RunConfig, eval_env,
                   rng: np.random.Generator) -> tuple[float, float, float]:
    """Deterministic-policy returns over freshly sampled latents, plus the
    diversity score of diversity_policies latent draws."""
    returns = []
    for _ in range(config.eval_episodes):
        z_cont, z_disc = agent.spec.sample(rng)
        state = eval_env.reset(rng)
        total = 0.0
        while not state.terminated:
            a = agent.policy_action(state.observation, z_cont, z_disc)
            state, r = eval_env.step(a)
            total += r
        returns.append(total)
    embeddings = []
    for z_cont, z_disc in skill_latents(agent.spec, config.diversity_policies,
                                        rng):
        emb = behavior_embedding(
            lambda s: agent.policy_action(s, z_cont, z_disc),
            eval_env, config.diversity_episodes, rng)
        embeddings.append(emb.vector)
    div = diversity_score(embeddings, config.diversity_h)
    return float(np.mean(returns)), float(np.std(returns)), div


@dataclass
class RunResult:
    config: RunConfig
    out_dir: str
    metrics_path: str
    checkpoint_path: str
    manifest_path: str
    final_eval: dict[str, float] = field(default_factory=dict)


def train_run(config: RunConfig, out_dir: str) -> RunResult:
    """Execute total_steps of training with periodic evaluation and logging."""
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, "metrics.csv")
    manifest_path = os.path.join(out_dir, "manifest.json")
    checkpoint_path = os.path.join(out_dir, "checkpoint.bin")
    chash = config.hash()
    with open(manifest_path, "w") as f:
        json.dump({"config": dataclasses.asdict(config), "hash": chash},
                  f, indent=2, sort_keys=True, default=list)
        f.write("\n")

    rngs = spawn_streams(config.seed)
    agent = build_agent(config, rngs)
    env = config.make_env()
    eval_env = config.make_env()
    buffer = ReplayBuffer(config.buffer_capacity, agent.state_dim,
                          agent.action_dim, config.cont_dim)

    acc: dict[str, list[float]] = {k: [] for k in
                                   ("critic_loss", "j_q", "j_info")}
    gate_frac = float("nan")
    result = RunResult(config, out_dir, metrics_path, checkpoint_path,
                       manifest_path)
    with open(metrics_path, "w") as log:
        log.write(CSV_HEADER + "\n")
        for t in range(config.total_steps):
            diag = agent.train_step(env, buffer, t)
            for k in acc:
                if np.isfinite(diag[k]):
                    acc[k].append(diag[k])
            gate_frac = diag["gate_frac"]
            step = t + 1
            if config.eval_interval and step % config.eval_interval == 0:
                ret_mean, ret_std, div = evaluate_agent(agent, config,
                                                        eval_env, rngs["eval"])
                recent = buffer.recent(min(config.mi_eval_samples, buffer.size))
                bound = mi_lower_bound(
                    _posterior_inputs(agent, recent), recent.z_cont,
                    recent.z_disc, agent.nets.posterior, agent.spec)
                row = [step, ret_mean, ret_std, bound, div]
                row += [float(np.mean(acc[k])) if acc[k] else float("nan")
                        for k in ("critic_loss", "j_q", "j_info")]
                row.append(gate_frac)
                log.write(",".join([str(step)] + [_fmt(v) for v in row[1:]]) + "\n")
                result.final_eval = {
                    "step": step, "ret_mean": ret_mean, "ret_std": ret_std,
                    "mi_bound": bound, "diversity": div,
                }
                acc = {k: [] for k in acc}
                if (config.checkpoint_interval
                        and step % config.checkpoint_interval == 0):
                    save_checkpoint(os.path.join(out_dir, f"ckpt_{step}.bin"),
                                    agent, step, chash)
    save_checkpoint(checkpoint_path, agent, config.total_steps, chash)
    return result


# ---------------------------------------------------------------------------
# Few-shot adaptation

@dataclass
class FewShotConfig:
    budget_k: int = 8
    final_eval_episodes: int = 5
    test_variant: str = "blocked"

    def __post_init__(self) -> None:
        if self.budget_k < 1:
            raise ConfigError("budget must be >= 1")


@dataclass
class FewShotResult:
    best_z_cont: np.ndarray
    best_z_disc: int | None
    adapted_mean: float
    adapted_std: float
    candidate_returns: list[float]
    candidate_episodes: int
    final_episodes: int


def _rollout(agent: Agent, env, z_cont, z_disc, rng) -> float:
    state = env.reset(rng)
    total = 0.0
    while not state.terminated:
        a = agent.policy_action(state.observation, z_cont, z_disc)
        state, r = env.step(a)
        total += r
    return total


def fewshot_adapt(checkpoint_path: str, config: RunConfig, fs: FewShotConfig,
                  rng: np.random.Generator,
                  force_hash: bool = False) -> FewShotResult:
    """Budget-limited skill selection on a test variant of the training MDP.

    Spends exactly budget_k episodes scoring candidate latents (one episode
    each), picks the first-best, then reports over final_eval_episodes more.
    """
    spec = LatentSpec(config.cont_dim, config.disc_k)
    if config.disc_k > 0 and fs.budget_k < config.disc_k:
        raise ConfigError(
            f"budget {fs.budget_k} cannot cover {config.disc_k} discrete skills")
    agent = build_agent(config)
    load_checkpoint(checkpoint_path, agent, config.hash(), force=force_hash)
    test_env = make_env(config.env, fs.test_variant,
                        ring_config=config.ring_config(),
                        point_config=config.point_config())
    candidates = skill_latents(spec, fs.budget_k, rng)
    returns = [_rollout(agent, test_env, zc, zd, rng) for zc, zd in candidates]
    best = int(np.argmax(returns))  # argmax takes the first maximum
    best_zc, best_zd = candidates[best]
    finals = [_rollout(agent, test_env, best_zc, best_zd, rng)
              for _ in range(fs.final_eval_episodes)]
    return FewShotResult(
        best_z_cont=best_zc, best_z_disc=best_zd,
        adapted_mean=float(np.mean(finals)), adapted_std=float(np.std(finals)),
        candidate_returns=[float(r) for r in returns],
        candidate_episodes=len(returns), final_episodes=len(finals),
    )


# ---------------------------------------------------------------------------
# Sweeps

def sweep(configs: list[RunConfig], out_dir: str) -> str:
    """Run each config sequentially; aggregate final evaluations into one CSV."""
    os.makedirs(out_dir, exist_ok=True)
    agg_path = os.path.join(out_dir, "sweep.csv")
    rows = []
    for i, cfg in enumerate(configs):
        run_dir = os.path.join(out_dir, f"run_{i:03d}")
        try:
            res = train_run(cfg, run_dir)
            fe = res.final_eval
            rows.append((i, cfg.seed, "ok", fe.get("ret_mean", float("nan")),
                         fe.get("ret_std", float("nan")),
                         fe.get("mi_bound", float("nan")),
                         fe.get("diversity", float("nan"))))
        except Exception as exc:  # isolate per-config failures
            rows.append((i, cfg.seed, f"error:{type(exc).__name__}",
                         float("nan"), float("nan"), float("nan"), float("nan")))
    with open(agg_path, "w") as f:
        f.write("config_index,seed,status,ret_mean,ret_std,mi_bound,diversity\n")
        for i, seed, status, rm, rs, mb, dv in rows:
            f.write(f"{i},{seed},{status},{_fmt(rm)},{_fmt(rs)},{_fmt(mb)},"
                    f"{_fmt(dv)}\n")
    return agg_path


# ---------------------------------------------------------------------------
# Ring posterior-only studies (bound tightness)

def ring_dataset(n: int, rng: np.random.Generator,
                 config: RingMdpConfig | None = None):
    """(s, a, z) samples from the stationary joint of the two constant-action
    ring policies; s is one-hot, a is +-1 (CW=+1), z is the policy index."""
    config = config or RingMdpConfig()
    ns = config.n_states
    z = rng.integers(2, size=n)
    s_idx = rng.integers(ns, size=n)
    s = np.zeros((n, ns))
    s[np.arange(n), s_idx] = 1.0
    a = np.where(z == 0, 1.0, -1.0)[:, None]
    return s, a, z


def ring_posterior_bound(input_mode: str, steps: int, seed: int,
                         n_samples: int = 4096, hidden: tuple[int, ...] = (64, 64),
                         batch: int = 128, lr: float = 3e-4) -> float:
    """Fit q(z|s,a) or q(z|s) by maximum likelihood on ring-labeled data and
    report the variational MI bound on a held-out sample."""
    rng = np.random.default_rng(seed)
    spec = LatentSpec(cont_dim=0, disc_k=2)
    s, a, z = ring_dataset(n_samples, rng)
    x = s if input_mode == "s" else np.concatenate([s, a], axis=1)
    net = fit_posterior(x, np.zeros((n_samples, 0)), z, spec, hidden,
                        steps, batch, lr, rng)
    s2, a2, z2 = ring_dataset(n_samples, rng)
    x2 = s2 if input_mode == "s" else np.concatenate([s2, a2], axis=1)
    return mi_lower_bound(x2, np.zeros((n_samples, 0)), z2, net, spec)
