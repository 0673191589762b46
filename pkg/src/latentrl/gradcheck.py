"""Finite-difference validation of every loss gradient the learner uses."""

from __future__ import annotations

import numpy as np

from .agent import (Agent, LatentSpec, Ltd3Config, clip_weight,
                    normalized_importance_weights, posterior_log_prob)
from .harness import spawn_streams
from .numerics import GradCheckReport, check_gradients, mlp_backward, mlp_forward
from .replay import Batch


def _small_agent(seed: int, state_dim: int = 3, action_dim: int = 2,
                 cont_dim: int = 2, disc_k: int = 2,
                 hidden: tuple[int, ...] = (8, 8)) -> tuple[Agent, Batch]:
    cfg = Ltd3Config(hidden_sizes=hidden, latent_embed_dim=4, batch=8)
    rngs = spawn_streams(seed)
    agent = Agent(state_dim, action_dim,
                  np.full(action_dim, -1.0), np.full(action_dim, 1.0),
                  LatentSpec(cont_dim, disc_k), cfg, rngs)
    rng = np.random.default_rng(seed + 1)
    b = cfg.batch
    batch = Batch(
        s=rng.normal(size=(b, state_dim)),
        a=rng.uniform(-1, 1, size=(b, action_dim)),
        s_next=rng.normal(size=(b, state_dim)),
        r=rng.normal(size=b),
        done=np.zeros(b),
        z_cont=rng.uniform(-1, 1, size=(b, cont_dim)),
        z_disc=rng.integers(disc_k, size=b) if disc_k else np.full(b, -1),
    )
    return agent, batch


def check_critic_loss(seed: int, step: float = 1e-5,
                      tol: float = 1e-4) -> GradCheckReport:
    """L_critic gradient wrt the first critic's parameters."""
    agent, batch = _small_agent(seed)
    zv = agent._batch_zvec(batch)
    y = agent.compute_target(batch, np.random.default_rng(seed + 2))
    net = agent.nets.critic1
    sa = np.concatenate([batch.s, batch.a], axis=1)

    def loss_fn(_params):
        pred, _ = net.forward(sa, zv)
        return float(np.mean((pred[:, 0] - y) ** 2))

    pred, tape = net.forward(sa, zv)
    gout = (2.0 / len(y)) * (pred[:, 0] - y)[:, None]
    grads, _ = net.backward(tape, gout)
    return check_gradients(loss_fn, net.param_list(), grads, step, tol)


def check_actor_q(seed: int, step: float = 1e-5,
                  tol: float = 1e-4) -> GradCheckReport:
    """J_Q gradient wrt actor parameters, flowing through the critic input."""
    agent, batch = _small_agent(seed)
    zv = agent._batch_zvec(batch)
    actor, critic = agent.nets.actor, agent.nets.critic1

    def loss_fn(_params):
        out, _ = actor.forward(batch.s, zv)
        a = agent.center + agent.scale * out
        q, _ = critic.forward(np.concatenate([batch.s, a], axis=1), zv)
        return float(np.mean(q[:, 0]))

    out, atape = actor.forward(batch.s, zv)
    a = agent.center + agent.scale * out
    q, ctape = critic.forward(np.concatenate([batch.s, a], axis=1), zv)
    gout = np.full_like(q, 1.0 / q.shape[0])
    _, dlead = critic.backward(ctape, gout)
    da = dlead[:, agent.state_dim:]
    agrads, _ = actor.backward(atape, da * agent.scale)
    return check_gradients(loss_fn, actor.param_list(), agrads, step, tol)


def check_info_objective(seed: int, step: float = 1e-5,
                         tol: float = 1e-4) -> GradCheckReport:
    """J_info gradient wrt actor and posterior parameters jointly.

    The truncated importance weights are computed once from the stored actions
    and held constant, matching the update rule.
    """
    agent, batch = _small_agent(seed)
    cfg = agent.cfg
    zv = agent._batch_zvec(batch)
    actor, posterior = agent.nets.actor, agent.nets.posterior
    sa_stored = np.concatenate([batch.s, batch.a], axis=1)
    q, _ = agent.nets.critic1.forward(sa_stored, zv)
    w_tilde = clip_weight(normalized_importance_weights(q[:, 0]), cfg.c_clip)
    zd = np.maximum(batch.z_disc, 0)

    def loss_fn(_params):
        out, _ = actor.forward(batch.s, zv)
        a = agent.center + agent.scale * out
        pout, _ = mlp_forward(posterior, np.concatenate([batch.s, a], axis=1))
        logq = posterior_log_prob(pout, batch.z_cont, zd, agent.spec)
        return float(cfg.alpha_info * np.mean(w_tilde * logq))

    out, atape = actor.forward(batch.s, zv)
    a = agent.center + agent.scale * out
    pout, ptape = mlp_forward(posterior, np.concatenate([batch.s, a], axis=1))
    logq, dout = posterior_log_prob(pout, batch.z_cont, zd, agent.spec,
                                    with_grad=True)
    b = len(logq)
    weight = (cfg.alpha_info / b) * w_tilde
    pgrads, dpin = mlp_backward(posterior, ptape, dout * weight[:, None])
    da = dpin[:, agent.state_dim:]
    agrads, _ = actor.backward(atape, da * agent.scale)
    params = actor.param_list() + posterior.param_list()
    grads = agrads + pgrads
    return check_gradients(loss_fn, params, grads, step, tol)


def run_all(seed: int, step: float = 1e-5,
            tol: float = 1e-4) -> dict[str, GradCheckReport]:
    return {
        "critic_loss": check_critic_loss(seed, step, tol),
        "actor_q": check_actor_q(seed, step, tol),
        "info_objective": check_info_objective(seed, step, tol),
    }
