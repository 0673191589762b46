"""Latent-conditioned twin-delayed actor-critic learner.

The actor and both critics consume the latent through a learned linear
embedding concatenated with their other inputs.  A posterior network predicts
the latent from (s, a); its log-likelihood, weighted by truncated
batch-normalized Boltzmann importance weights, is ascended jointly through the
posterior and the actor.  Baseline modes replace that direct maximization with
intrinsic-reward shaping (state-only or state-action posteriors, optionally
gated by near-optimal episode returns).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import numerics as nm
from .numerics import AdamState, MlpParams, MlpTape, adam_step, mlp_backward, mlp_forward, mlp_init
from .replay import Batch, ReplayBuffer, Transition


class BaselineMode(Enum):
    LATENT_TD3 = "latent_td3"
    TD3 = "td3"
    DIAYN_S = "diayn_s"
    DIAYN_SA = "diayn_sa"
    SMERL_GATE = "smerl_gate"


# Modes whose posterior conditions on the state only.
_STATE_ONLY_POSTERIOR = {BaselineMode.DIAYN_S, BaselineMode.SMERL_GATE}


@dataclass
class LatentSpec:
    """Continuous dimensions and discrete cardinality of the episode latent.

    The prior is uniform on [-1, 1]^cont_dim x {0..disc_k-1}.
    """

    cont_dim: int = 2
    disc_k: int = 0

    def __post_init__(self) -> None:
        if self.cont_dim + (1 if self.disc_k > 0 else 0) < 1:
            raise ValueError("latent must have at least one dimension")

    @property
    def vec_dim(self) -> int:
        return self.cont_dim + self.disc_k

    def entropy(self) -> float:
        h = self.cont_dim * np.log(2.0)
        if self.disc_k > 0:
            h += np.log(self.disc_k)
        return float(h)

    def sample(self, rng: np.random.Generator) -> tuple[np.ndarray, int | None]:
        z_cont = rng.uniform(-1.0, 1.0, size=self.cont_dim)
        z_disc = int(rng.integers(self.disc_k)) if self.disc_k > 0 else None
        return z_cont, z_disc

    def to_vec(self, z_cont: np.ndarray, z_disc) -> np.ndarray:
        """Network input encoding: continuous part followed by a one-hot."""
        z_cont = np.atleast_2d(np.asarray(z_cont, dtype=np.float64))
        b = z_cont.shape[0]
        if self.disc_k == 0:
            return z_cont
        onehot = np.zeros((b, self.disc_k))
        idx = np.atleast_1d(np.asarray(z_disc, dtype=np.int64))
        onehot[np.arange(b), idx] = 1.0
        return np.concatenate([z_cont, onehot], axis=1)


def sample_latent(spec: LatentSpec, rng: np.random.Generator):
    return spec.sample(rng)


@dataclass
class Ltd3Config:
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
    baseline_mode: BaselineMode = BaselineMode.LATENT_TD3
    beta_intrinsic: float = 0.5
    eps_smerl: float = 0.1
    r_star: float = 0.0
    buffer_capacity: int = 1_000_000
    hidden_sizes: tuple[int, ...] = (256, 256)
    latent_embed_dim: int = 32

    def __post_init__(self) -> None:
        if self.c_clip <= 0:
            raise ValueError("c_clip must be > 0")
        if self.d_atr < 1 or self.d_info < 1:
            raise ValueError("update intervals must be >= 1")


# ---------------------------------------------------------------------------
# Latent-conditioned networks

@dataclass
class LatentNet:
    """MLP whose input is concat(leading features, linear latent embedding)."""

    embed_w: np.ndarray
    embed_b: np.ndarray
    mlp: MlpParams
    lead_dim: int

    def param_list(self) -> list[np.ndarray]:
        return [self.embed_w, self.embed_b] + self.mlp.param_list()

    def forward(self, lead: np.ndarray, z_vec: np.ndarray):
        e = z_vec @ self.embed_w.T + self.embed_b
        h = np.concatenate([lead, e], axis=1)
        out, tape = mlp_forward(self.mlp, h)
        return out, (tape, z_vec)

    def backward(self, tape_z, output_grad: np.ndarray):
        """Returns (param_grads matching param_list(), grad wrt lead input)."""
        tape, z_vec = tape_z
        mg, dh = mlp_backward(self.mlp, tape, output_grad)
        dlead = dh[:, :self.lead_dim]
        de = dh[:, self.lead_dim:]
        dwe = de.T @ z_vec
        dbe = de.sum(axis=0)
        return [dwe, dbe] + mg, dlead


def _latent_net_init(lead_dim: int, z_dim: int, embed_dim: int,
                     hidden: tuple[int, ...], out_dim: int, head: str,
                     rng: np.random.Generator) -> LatentNet:
    bound = 1.0 / np.sqrt(max(z_dim, 1))
    embed_w = rng.uniform(-bound, bound, size=(embed_dim, z_dim))
    embed_b = rng.uniform(-bound, bound, size=(embed_dim,))
    mlp = mlp_init([lead_dim + embed_dim, *hidden, out_dim], rng, head=head)
    return LatentNet(embed_w, embed_b, mlp, lead_dim)


def _copy_latent_net(net: LatentNet) -> LatentNet:
    return LatentNet(net.embed_w.copy(), net.embed_b.copy(), net.mlp.copy(),
                     net.lead_dim)


@dataclass
class AgentNets:
    actor: LatentNet
    critic1: LatentNet
    critic2: LatentNet
    actor_target: LatentNet
    critic1_target: LatentNet
    critic2_target: LatentNet
    posterior: MlpParams
    posterior_input: str  # "sa" or "s"


def build_nets(state_dim: int, action_dim: int, spec: LatentSpec,
               cfg: Ltd3Config, rng: np.random.Generator) -> AgentNets:
    z_dim = spec.vec_dim
    actor = _latent_net_init(state_dim, z_dim, cfg.latent_embed_dim,
                             cfg.hidden_sizes, action_dim, "tanh", rng)
    critic1 = _latent_net_init(state_dim + action_dim, z_dim,
                               cfg.latent_embed_dim, cfg.hidden_sizes, 1,
                               "linear", rng)
    critic2 = _latent_net_init(state_dim + action_dim, z_dim,
                               cfg.latent_embed_dim, cfg.hidden_sizes, 1,
                               "linear", rng)
    post_in = state_dim + (0 if cfg.baseline_mode in _STATE_ONLY_POSTERIOR
                           else action_dim)
    post_out = 2 * spec.cont_dim + spec.disc_k
    posterior = mlp_init([post_in, *cfg.hidden_sizes, post_out], rng, "linear")
    return AgentNets(
        actor=actor, critic1=critic1, critic2=critic2,
        actor_target=_copy_latent_net(actor),
        critic1_target=_copy_latent_net(critic1),
        critic2_target=_copy_latent_net(critic2),
        posterior=posterior,
        posterior_input="s" if cfg.baseline_mode in _STATE_ONLY_POSTERIOR else "sa",
    )


# ---------------------------------------------------------------------------
# Posterior density heads

def posterior_log_prob(out: np.ndarray, z_cont: np.ndarray, z_disc: np.ndarray,
                       spec: LatentSpec,
                       with_grad: bool = False):
    """Log q(z | inputs) from raw posterior outputs, summed over cont+disc parts.

    out columns: [mean (cont_dim), raw log_std (cont_dim), logits (disc_k)].
    log_std is clamped to [LOG_STD_MIN, LOG_STD_MAX]; clamped entries get zero
    gradient.  With with_grad=True also returns d log q / d out per sample.
    """
    c, k = spec.cont_dim, spec.disc_k
    b = out.shape[0]
    logq = np.zeros(b)
    dout = np.zeros_like(out) if with_grad else None
    if c > 0:
        mean = out[:, :c]
        raw = out[:, c:2 * c]
        log_std = np.clip(raw, nm.LOG_STD_MIN, nm.LOG_STD_MAX)
        logq += nm.gaussian_log_prob(z_cont, mean, log_std)
        if with_grad:
            var = np.exp(2.0 * log_std)
            diff = z_cont - mean
            dout[:, :c] = diff / var
            inside = (raw > nm.LOG_STD_MIN) & (raw < nm.LOG_STD_MAX)
            dout[:, c:2 * c] = (-1.0 + diff ** 2 / var) * inside
    if k > 0:
        logits = out[:, 2 * c:]
        logq += nm.categorical_log_prob(logits, z_disc)
        if with_grad:
            onehot = np.zeros((b, k))
            onehot[np.arange(b), np.asarray(z_disc, dtype=np.int64)] = 1.0
            dout[:, 2 * c:] = onehot - nm.softmax(logits)
    if with_grad:
        return logq, dout
    return logq


# ---------------------------------------------------------------------------
# Importance weights

def normalized_importance_weights(q_values: np.ndarray) -> np.ndarray:
    """Batch-size-scaled softmax of Q: mean is exactly 1, Z cancels."""
    q = np.asarray(q_values, dtype=np.float64)
    b = q.shape[0]
    w = nm.softmax(q) * b
    return w


def clip_weight(w_hat: np.ndarray, c_clip: float) -> np.ndarray:
    """Truncate to [1 - c_clip, 1 + c_clip]."""
    if c_clip <= 0:
        raise ValueError("c_clip must be > 0")
    return np.clip(w_hat, 1.0 - c_clip, 1.0 + c_clip)


def smerl_gate(episode_return: float, r_star: float, eps: float) -> int:
    """1 iff the episode return is within eps of the reference optimum."""
    return 1 if episode_return > r_star - eps else 0


def unsupervised_reward(mode: BaselineMode, posterior: MlpParams,
                        posterior_input: str, s: np.ndarray, a: np.ndarray,
                        z_cont: np.ndarray, z_disc, spec: LatentSpec,
                        beta: float) -> float:
    """beta * log q(z | s[, a]) for one transition."""
    if posterior_input == "s":
        x = np.atleast_2d(s)
    else:
        x = np.concatenate([np.atleast_2d(s), np.atleast_2d(a)], axis=1)
    out, _ = mlp_forward(posterior, x)
    zc = np.atleast_2d(z_cont) if spec.cont_dim else np.zeros((1, 0))
    zd = np.array([z_disc if z_disc is not None else 0])
    return float(beta * posterior_log_prob(out, zc, zd, spec)[0])


# ---------------------------------------------------------------------------
# Agent

class Agent:
    """Single-threaded learner owning networks, optimizer states and the
    in-episode bookkeeping of the training loop."""

    def __init__(self, state_dim: int, action_dim: int,
                 action_low: np.ndarray, action_high: np.ndarray,
                 spec: LatentSpec, cfg: Ltd3Config,
                 rngs: dict[str, np.random.Generator]):
        self.spec = spec
        self.cfg = cfg
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.low = np.asarray(action_low, dtype=np.float64)
        self.high = np.asarray(action_high, dtype=np.float64)
        self.center = (self.low + self.high) / 2.0
        self.scale = (self.high - self.low) / 2.0
        self.rngs = rngs
        self.nets = build_nets(state_dim, action_dim, spec, cfg, rngs["init"])
        lr = cfg.lr
        self.adam_c1 = AdamState.for_params(self.nets.critic1.param_list(), lr)
        self.adam_c2 = AdamState.for_params(self.nets.critic2.param_list(), lr)
        self.adam_actor_q = AdamState.for_params(self.nets.actor.param_list(), lr)
        # Separate moment buffers for the information objective so that a
        # zero-weight info update leaves the return path bit-identical.
        self.adam_actor_info = AdamState.for_params(self.nets.actor.param_list(), lr)
        self.adam_posterior = AdamState.for_params(self.nets.posterior.param_list(), lr)
        # Episode bookkeeping
        self._obs: np.ndarray | None = None
        self._z_cont: np.ndarray | None = None
        self._z_disc: int | None = None
        self._episode_return = 0.0
        self._episode_stash: list[tuple[Transition, float]] = []
        self._episodes = 0
        self._gated_in = 0

    # -- policy ------------------------------------------------------------

    def policy_action(self, s: np.ndarray, z_cont: np.ndarray, z_disc) -> np.ndarray:
        """Deterministic evaluation action for one state."""
        zv = self.spec.to_vec(z_cont, z_disc)
        out, _ = self.nets.actor.forward(np.atleast_2d(s), zv)
        return self.center + self.scale * out[0]

    def act(self, s: np.ndarray, z_cont: np.ndarray, z_disc,
            explore_sigma: float, rng: np.random.Generator) -> np.ndarray:
        a = self.policy_action(s, z_cont, z_disc)
        if explore_sigma > 0:
            a = a + rng.normal(0.0, explore_sigma, size=self.action_dim)
        return np.clip(a, self.low, self.high)

    def _batch_zvec(self, batch: Batch) -> np.ndarray:
        return self.spec.to_vec(batch.z_cont, np.maximum(batch.z_disc, 0))

    # -- updates -----------------------------------------------------------

    def compute_target(self, batch: Batch, rng: np.random.Generator) -> np.ndarray:
        cfg = self.cfg
        zv = self._batch_zvec(batch)
        out, _ = self.nets.actor_target.forward(batch.s_next, zv)
        a_next = self.center + self.scale * out
        if cfg.target_sigma > 0:
            eps = rng.normal(0.0, cfg.target_sigma, size=a_next.shape)
            eps = np.clip(eps, -cfg.target_noise_clip, cfg.target_noise_clip)
            a_next = a_next + eps
        a_next = np.clip(a_next, self.low, self.high)
        sa = np.concatenate([batch.s_next, a_next], axis=1)
        q1, _ = self.nets.critic1_target.forward(sa, zv)
        q2, _ = self.nets.critic2_target.forward(sa, zv)
        q_min = np.minimum(q1[:, 0], q2[:, 0])
        return batch.r + (1.0 - batch.done) * cfg.gamma * q_min

    def critic_update(self, batch: Batch, targets: np.ndarray) -> tuple[float, float]:
        zv = self._batch_zvec(batch)
        sa = np.concatenate([batch.s, batch.a], axis=1)
        losses = []
        for net, adam in ((self.nets.critic1, self.adam_c1),
                          (self.nets.critic2, self.adam_c2)):
            pred, tape = net.forward(sa, zv)
            diff = pred[:, 0] - targets
            loss = float(np.mean(diff ** 2))
            if not np.isfinite(loss):
                raise nm.NumericError("non-finite critic loss")
            gout = (2.0 / len(diff)) * diff[:, None]
            grads, _ = net.backward(tape, gout)
            adam_step(adam, net.param_list(), grads)
            losses.append(loss)
        return losses[0], losses[1]

    def actor_q_update(self, batch: Batch) -> float:
        zv = self._batch_zvec(batch)
        out, atape = self.nets.actor.forward(batch.s, zv)
        a = self.center + self.scale * out
        sa = np.concatenate([batch.s, a], axis=1)
        q1, ctape = self.nets.critic1.forward(sa, zv)
        j_q = float(np.mean(q1[:, 0]))
        gout = np.full_like(q1, 1.0 / q1.shape[0])
        _, dlead = self.nets.critic1.backward(ctape, gout)
        da = dlead[:, self.state_dim:]
        agrads, _ = self.nets.actor.backward(atape, da * self.scale)
        adam_step(self.adam_actor_q, self.nets.actor.param_list(), agrads,
                  maximize=True)
        self._polyak()
        return j_q

    def _polyak(self) -> None:
        tau = self.cfg.tau
        for online, target in ((self.nets.actor, self.nets.actor_target),
                               (self.nets.critic1, self.nets.critic1_target),
                               (self.nets.critic2, self.nets.critic2_target)):
            for p, pt in zip(online.param_list(), target.param_list()):
                pt *= 1.0 - tau
                pt += tau * p

    def info_update(self, batch: Batch) -> float:
        """Joint ascent of actor and posterior on the truncated
        importance-weighted posterior log-likelihood."""
        cfg = self.cfg
        zv = self._batch_zvec(batch)
        # Boltzmann weights from Q on the *stored* actions; no gradient flows
        # through the critic here.
        sa_stored = np.concatenate([batch.s, batch.a], axis=1)
        q, _ = self.nets.critic1.forward(sa_stored, zv)
        w_tilde = clip_weight(normalized_importance_weights(q[:, 0]), cfg.c_clip)
        out, atape = self.nets.actor.forward(batch.s, zv)
        a_pol = self.center + self.scale * out
        x = np.concatenate([batch.s, a_pol], axis=1)
        pout, ptape = mlp_forward(self.nets.posterior, x)
        zd = np.maximum(batch.z_disc, 0)
        logq, dout = posterior_log_prob(pout, batch.z_cont, zd, self.spec,
                                        with_grad=True)
        if not np.all(np.isfinite(logq)):
            raise nm.NumericError("non-finite posterior log-probability")
        b = len(logq)
        j_info = float(cfg.alpha_info * np.mean(w_tilde * logq))
        weight = (cfg.alpha_info / b) * w_tilde
        pgrads, dpin = mlp_backward(self.nets.posterior, ptape,
                                    dout * weight[:, None])
        da = dpin[:, self.state_dim:]
        agrads, _ = self.nets.actor.backward(atape, da * self.scale)
        adam_step(self.adam_posterior, self.nets.posterior.param_list(),
                  pgrads, maximize=True)
        adam_step(self.adam_actor_info, self.nets.actor.param_list(),
                  agrads, maximize=True)
        return j_info

    def posterior_ml_update(self, batch: Batch) -> float:
        """Maximum-likelihood step on stored data (intrinsic-reward baselines)."""
        if self.nets.posterior_input == "s":
            x = batch.s
        else:
            x = np.concatenate([batch.s, batch.a], axis=1)
        pout, ptape = mlp_forward(self.nets.posterior, x)
        zd = np.maximum(batch.z_disc, 0)
        logq, dout = posterior_log_prob(pout, batch.z_cont, zd, self.spec,
                                        with_grad=True)
        b = len(logq)
        pgrads, _ = mlp_backward(self.nets.posterior, ptape, dout / b)
        adam_step(self.adam_posterior, self.nets.posterior.param_list(),
                  pgrads, maximize=True)
        return float(np.mean(logq))

    # -- training loop -----------------------------------------------------

    def begin_episode(self, env, rng_env: np.random.Generator,
                      rng_latent: np.random.Generator) -> None:
        state = env.reset(rng_env)
        self._obs = state.observation
        self._z_cont, self._z_disc = self.spec.sample(rng_latent)
        self._episode_return = 0.0
        self._episode_stash = []

    @property
    def current_latent(self):
        return self._z_cont, self._z_disc

    def _intrinsic(self, s: np.ndarray, a: np.ndarray) -> float:
        return unsupervised_reward(
            self.cfg.baseline_mode, self.nets.posterior,
            self.nets.posterior_input, s, a, self._z_cont, self._z_disc,
            self.spec, self.cfg.beta_intrinsic)

    def train_step(self, env, buffer: ReplayBuffer, t: int) -> dict[str, float]:
        """One environment step plus the update schedule at global step t."""
        cfg = self.cfg
        mode = cfg.baseline_mode
        if self._obs is None:
            self.begin_episode(env, self.rngs["env"], self.rngs["latent"])
        s = self._obs
        if t < cfg.warmup_steps:
            a = self.rngs["explore"].uniform(self.low, self.high)
        else:
            a = self.act(s, self._z_cont, self._z_disc, cfg.explore_sigma,
                         self.rngs["explore"])
        state, r = env.step(a)
        self._episode_return += r
        done_flag = False  # both environments terminate only at the horizon
        tr = Transition(s=s.copy(), a=a.copy(), s_next=state.observation.copy(),
                        r=r, done=done_flag, z_cont=self._z_cont.copy(),
                        z_disc=self._z_disc)
        if mode is BaselineMode.SMERL_GATE:
            self._episode_stash.append((tr, r))
        else:
            if mode in (BaselineMode.DIAYN_S, BaselineMode.DIAYN_SA):
                tr.r = r + self._intrinsic(s, a)
            buffer.push(tr)
        self._obs = state.observation
        diag = {"critic_loss": np.nan, "j_q": np.nan, "j_info": np.nan,
                "episode_return": np.nan}
        if t >= cfg.warmup_steps and buffer.size >= cfg.batch:
            batch = buffer.sample_uniform(cfg.batch, self.rngs["critic_batch"])
            y = self.compute_target(batch, self.rngs["target_noise"])
            l1, l2 = self.critic_update(batch, y)
            diag["critic_loss"] = 0.5 * (l1 + l2)
            if t % cfg.d_atr == 0:
                diag["j_q"] = self.actor_q_update(batch)
            if mode in (BaselineMode.LATENT_TD3, BaselineMode.TD3):
                if mode is BaselineMode.LATENT_TD3 and t % cfg.d_info == 0:
                    info_batch = buffer.sample_uniform(cfg.batch,
                                                       self.rngs["info_batch"])
                    diag["j_info"] = self.info_update(info_batch)
            else:
                ml_batch = buffer.sample_uniform(cfg.batch,
                                                 self.rngs["info_batch"])
                self.posterior_ml_update(ml_batch)
        if state.terminated:
            if mode is BaselineMode.SMERL_GATE:
                gate = smerl_gate(self._episode_return, cfg.r_star, cfg.eps_smerl)
                self._gated_in += gate
                for tr_i, r_task in self._episode_stash:
                    if gate:
                        tr_i.r = r_task + self._intrinsic(tr_i.s, tr_i.a)
                    buffer.push(tr_i)
            self._episodes += 1
            diag["episode_return"] = self._episode_return
            self.begin_episode(env, self.rngs["env"], self.rngs["latent"])
        diag["gate_frac"] = (self._gated_in / self._episodes
                             if self._episodes else np.nan)
        return diag


# ---------------------------------------------------------------------------
# Posterior fitting on labeled data (bound-tightness studies, oracles)

def fit_posterior(x: np.ndarray, z_cont: np.ndarray, z_disc: np.ndarray,
                  spec: LatentSpec, hidden: tuple[int, ...], steps: int,
                  batch: int, lr: float, rng: np.random.Generator) -> MlpParams:
    """Train a posterior q(z|x) by maximum likelihood with Adam; returns the net.

    x is the conditioning input ((s) or (s, a) columns); z_disc uses -1 for
    absent discrete latents.
    """
    net = mlp_init([x.shape[1], *hidden, 2 * spec.cont_dim + spec.disc_k],
                   rng, "linear")
    adam = AdamState.for_params(net.param_list(), lr)
    n = x.shape[0]
    zd = np.maximum(z_disc, 0)
    for _ in range(steps):
        idx = rng.integers(n, size=batch)
        out, tape = mlp_forward(net, x[idx])
        _, dout = posterior_log_prob(out, z_cont[idx], zd[idx], spec,
                                     with_grad=True)
        grads, _ = mlp_backward(net, tape, dout / batch)
        adam_step(adam, net.param_list(), grads, maximize=True)
    return net


# ---------------------------------------------------------------------------
# Checkpoints

_MAGIC = b"LRL1"
_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _named_arrays(agent: Agent) -> list[tuple[str, np.ndarray]]:
    items: list[tuple[str, np.ndarray]] = []
    nets = agent.nets
    for name, net in (("actor", nets.actor), ("critic1", nets.critic1),
                      ("critic2", nets.critic2),
                      ("actor_target", nets.actor_target),
                      ("critic1_target", nets.critic1_target),
                      ("critic2_target", nets.critic2_target)):
        for i, p in enumerate(net.param_list()):
            items.append((f"{name}/{i}", p))
    for i, p in enumerate(nets.posterior.param_list()):
        items.append((f"posterior/{i}", p))
    for name, adam in (("adam_c1", agent.adam_c1), ("adam_c2", agent.adam_c2),
                       ("adam_actor_q", agent.adam_actor_q),
                       ("adam_actor_info", agent.adam_actor_info),
                       ("adam_posterior", agent.adam_posterior)):
        for i, p in enumerate(adam.m):
            items.append((f"{name}/m{i}", p))
        for i, p in enumerate(adam.v):
            items.append((f"{name}/v{i}", p))
        items.append((f"{name}/t", np.array(float(adam.t))))
    return items


def save_checkpoint(path, agent: Agent, step: int, config_hash: str) -> None:
    """Binary checkpoint: versioned header, then named little-endian float64
    arrays for every network and optimizer state."""
    items = _named_arrays(agent)
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        f.write(bytes.fromhex(config_hash))
        f.write(struct.pack("<Q", step))
        f.write(struct.pack("<I", len(items)))
        for name, arr in items:
            nb = name.encode()
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<I", d))
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path, agent: Agent, config_hash: str,
                    force: bool = False) -> int:
    """Restore agent parameters in place; returns the stored step count.

    Rejects checkpoints whose config hash differs unless force is set.
    """
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", f.read(4))
        if version != _VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        stored_hash = f.read(32).hex()
        if stored_hash != config_hash and not force:
            raise CheckpointError(
                f"{path}: config hash mismatch ({stored_hash[:12]}... vs "
                f"{config_hash[:12]}...); pass force to load anyway")
        (step,) = struct.unpack("<Q", f.read(8))
        (count,) = struct.unpack("<I", f.read(4))
        loaded: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", f.read(2))
            name = f.read(nlen).decode()
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = tuple(struct.unpack("<I", f.read(4))[0] for _ in range(ndim))
            n = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(f.read(8 * n), dtype="<f8").reshape(shape)
            loaded[name] = arr
    for name, target in _named_arrays(agent):
        if name not in loaded:
            raise CheckpointError(f"{path}: missing array {name}")
        src = loaded[name]
        if name.endswith("/t"):
            adam = getattr(agent, name.split("/")[0])
            adam.t = int(src)
            continue
        if src.shape != target.shape:
            raise CheckpointError(
                f"{path}: shape mismatch for {name}: {src.shape} vs {target.shape}")
        target[...] = src
    return step


def config_hash_of(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()
