"""Measurement layer: exact mutual-information oracles on finite joints, the
variational MI lower bound, behavior embeddings, and the determinant diversity
score over a squared-exponential Gram matrix."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .agent import LatentSpec, posterior_log_prob
from .envs import RingMdp, RingMdpConfig, CW, CCW
from .numerics import MlpParams, mlp_forward


class MiMode(Enum):
    S_Z = "s_z"
    SA_Z = "sa_z"


@dataclass
class JointDistribution:
    """Finite table p(s, a, z) with axes (state, action, latent)."""

    table: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.table, dtype=np.float64)
        if t.ndim != 3:
            raise ValueError("joint table must have axes (s, a, z)")
        if np.any(t < 0) or abs(t.sum() - 1.0) > 1e-12:
            raise ValueError("joint table must be nonnegative and sum to 1")
        self.table = t

    def marginal(self, axes: tuple[int, ...]) -> np.ndarray:
        keep = sorted(axes)
        drop = tuple(i for i in range(3) if i not in keep)
        return self.table.sum(axis=drop)


def _plogp(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    mask = p > 0
    out[mask] = p[mask] * np.log(p[mask])
    return out


def mi_oracle(joint: JointDistribution, mode: MiMode) -> float:
    """Exact I(s;z) or I(s,a;z) in nats by direct summation (0 log 0 := 0)."""
    if mode is MiMode.S_Z:
        p_xz = joint.marginal((0, 2))
    else:
        p_xz = joint.marginal((0, 1, 2)).reshape(-1, joint.table.shape[2])
    p_x = p_xz.sum(axis=1)
    p_z = p_xz.sum(axis=0)
    h_x = -_plogp(p_x).sum()
    h_z = -_plogp(p_z).sum()
    h_xz = -_plogp(p_xz).sum()
    return float(h_x + h_z - h_xz)


def mi_lower_bound(x: np.ndarray, z_cont: np.ndarray, z_disc: np.ndarray,
                   posterior: MlpParams, spec: LatentSpec) -> float:
    """mean log q(z|x) over the dataset plus the prior entropy H(z) in nats.

    The continuous part of H(z) is the differential entropy of the uniform
    prior on [-1, 1]^cont_dim.
    """
    if x.shape[0] == 0:
        raise ValueError("dataset must be nonempty")
    out, _ = mlp_forward(posterior, x)
    zd = np.maximum(np.asarray(z_disc, dtype=np.int64), 0)
    logq = posterior_log_prob(out, z_cont, zd, spec)
    return float(np.mean(logq) + spec.entropy())


def mi_lower_bound_table(joint: JointDistribution,
                         q_table: np.ndarray) -> float:
    """Table form of the bound for finite synthetic joints.

    q_table[s, a, z] is any conditional q(z|s,a) normalized over z; the bound
    is sum_{s,a,z} p(s,a,z) log q(z|s,a) + H(z).
    """
    p = joint.table
    p_z = joint.marginal((2,))
    h_z = -_plogp(p_z).sum()
    mask = p > 0
    val = (p[mask] * np.log(q_table[mask])).sum()
    return float(val + h_z)


def ring_stationary_joint(config: RingMdpConfig | None = None) -> JointDistribution:
    """Stationary joint p(s, a, z) under z uniform over {all-CW, all-CCW}.

    From a uniform start, both constant-action policies keep the state
    distribution uniform, so the stationary state marginal is 1/n per state.
    """
    config = config or RingMdpConfig()
    n = config.n_states
    table = np.zeros((n, 2, 2))
    for z, action in enumerate((CW, CCW)):
        for s in range(n):
            table[s, action, z] = 0.5 / n
    return JointDistribution(table)


def ring_stationary_distribution(config: RingMdpConfig, policy_action: int,
                                 iters: int = 512) -> np.ndarray:
    """Power-iterate the induced transition matrix from a uniform start."""
    env = RingMdp(config)
    p = env.transition_matrix(policy_action)
    # Average over the cycle: period-n chains do not converge pointwise.
    dist = np.full(config.n_states, 1.0 / config.n_states)
    acc = np.zeros_like(dist)
    for _ in range(iters):
        dist = dist @ p
        acc += dist
    return acc / iters


@dataclass
class BehaviorEmbedding:
    vector: np.ndarray
    episodes: int
    label: str = ""


def behavior_embedding(policy_fn, env, n_episodes: int,
                       rng: np.random.Generator, label: str = "",
                       action_embed=None) -> BehaviorEmbedding:
    """Mean action over all steps of n_episodes deterministic rollouts.

    policy_fn maps an observation vector to an action vector.  action_embed
    optionally maps each action to the vector that is averaged, for
    environments whose native action encoding is not already a vector
    (e.g. discrete actions re-encoded as +-1).
    """
    total = None
    count = 0
    for _ in range(n_episodes):
        state = env.reset(rng)
        while not state.terminated:
            a = policy_fn(state.observation)
            state, _ = env.step(a)
            e = np.atleast_1d(np.asarray(
                a if action_embed is None else action_embed(a), dtype=np.float64))
            total = e if total is None else total + e
            count += 1
    vec = np.asarray(total, dtype=np.float64) / count
    if not np.all(np.isfinite(vec)):
        raise FloatingPointError("non-finite behavior embedding")
    return BehaviorEmbedding(vec, n_episodes, label)


def diversity_score(embeddings: list[np.ndarray], h: float) -> float:
    """det of the squared-exponential Gram matrix over behavior embeddings.

    Computed via Cholesky so singular inputs report 0 rather than negative
    round-off noise.
    """
    if h <= 0:
        raise ValueError("length scale must be > 0")
    if len(embeddings) < 1:
        raise ValueError("need at least one embedding")
    pts = np.stack([np.asarray(e, dtype=np.float64) for e in embeddings])
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    gram = np.exp(-d2 / (2.0 * h * h))
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        return 0.0
    det = float(np.prod(np.diag(chol)) ** 2)
    return min(det, 1.0)
