"""Implicit Q-learning: expectile value regression, twin Q, advantage-weighted regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import (
    AdamState,
    GaussianPolicy,
    MLPParams,
    adam_init,
    adam_step,
    make_policy,
    mlp_forward,
    mlp_grad,
    mlp_init,
)


@dataclass
class IQLConfig:
    expectile_tau: float = 0.6
    awr_beta: float = 3.0
    gamma: float = 0.99
    polyak: float = 0.995
    lr: float = 3e-4
    adv_clip: float = 100.0

    def validate(self) -> None:
        if not 0.0 < self.expectile_tau < 1.0:
            raise ValueError("expectile_tau must be in (0, 1)")
        if self.awr_beta <= 0:
            raise ValueError("awr_beta must be > 0")


def expectile_loss(u, tau: float):
    """Asymmetric squared loss |tau - 1{u<0}| * u^2."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must be in (0, 1)")
    u = np.asarray(u, dtype=np.float64)
    weight = np.abs(tau - (u < 0.0))
    out = weight * u * u
    return float(out) if out.ndim == 0 else out


@dataclass
class TwinQ:
    q1: MLPParams
    q2: MLPParams
    q1_target: MLPParams
    q2_target: MLPParams
    opt1: AdamState
    opt2: AdamState


@dataclass
class ValueFn:
    net: MLPParams
    opt: AdamState


@dataclass
class PolicyLearner:
    policy: GaussianPolicy
    opt: AdamState


def _clone(net: MLPParams) -> MLPParams:
    return net.with_params([p.copy() for p in net.param_list()])


def _polyak(target: MLPParams, online: MLPParams, rho: float) -> MLPParams:
    mixed = [rho * t + (1.0 - rho) * o
             for t, o in zip(target.param_list(), online.param_list())]
    return target.with_params(mixed)


def iql_init(obs_dim: int, act_dim: int, hidden: tuple[int, ...], config: IQLConfig,
             rng: np.random.Generator) -> tuple[TwinQ, ValueFn, PolicyLearner]:
    q1 = mlp_init([obs_dim + act_dim, *hidden, 1], rng)
    q2 = mlp_init([obs_dim + act_dim, *hidden, 1], rng)
    v = mlp_init([obs_dim, *hidden, 1], rng)
    policy = make_policy(obs_dim, act_dim, hidden, rng)
    q_nets = TwinQ(q1, q2, _clone(q1), _clone(q2),
                   adam_init(q1.param_list(), lr=config.lr),
                   adam_init(q2.param_list(), lr=config.lr))
    v_net = ValueFn(v, adam_init(v.param_list(), lr=config.lr))
    pi = PolicyLearner(policy, adam_init(policy.param_list(), lr=config.lr))
    return q_nets, v_net, pi


def iql_update(
    q_nets: TwinQ,
    v_net: ValueFn,
    policy: PolicyLearner,
    batch: dict,
    config: IQLConfig,
) -> tuple[TwinQ, ValueFn, PolicyLearner, dict]:
    """One offline IQL step.

    V regresses onto target-Q by expectile loss; twin Q regress onto
    r + gamma*(1-done)*V(s'); the policy takes an advantage-weighted regression
    step with weights min(exp(beta*(Q-V)), adv_clip); target Q polyak-updated.
    """
    obs = np.asarray(batch["obs"], dtype=np.float64)
    actions = np.asarray(batch["actions"], dtype=np.float64)
    rewards = np.asarray(batch["rewards"], dtype=np.float64)
    next_obs = np.asarray(batch["next_obs"], dtype=np.float64)
    dones = np.asarray(batch["dones"], dtype=np.float64)
    n = obs.shape[0]
    tau = config.expectile_tau

    sa = np.concatenate([obs, actions], axis=1)
    q_t = np.minimum(
        mlp_forward(q_nets.q1_target, sa)[:, 0],
        mlp_forward(q_nets.q2_target, sa)[:, 0],
    )

    # Value step: expectile regression of V(s) toward target Q.
    v = mlp_forward(v_net.net, obs)[:, 0]
    u = q_t - v
    weight = np.abs(tau - (u < 0.0))
    v_loss = float((weight * u * u).mean())
    up_v = (-2.0 * weight * u / n)[:, None]
    v_grads, _ = mlp_grad(v_net.net, obs, up_v)
    v_opt, new_v = adam_step(v_net.opt, v_net.net.param_list(), v_grads)
    v_net = ValueFn(v_net.net.with_params(new_v), v_opt)

    # Q step: MSE toward r + gamma*(1-done)*V(s') with the updated V.
    v_next = mlp_forward(v_net.net, next_obs)[:, 0]
    q_target = rewards + config.gamma * (1.0 - dones) * v_next
    new_qs = []
    q_losses = []
    for net, opt in ((q_nets.q1, q_nets.opt1), (q_nets.q2, q_nets.opt2)):
        q = mlp_forward(net, sa)[:, 0]
        err = q - q_target
        q_losses.append(float((err * err).mean()))
        grads, _ = mlp_grad(net, sa, (2.0 / n) * err[:, None])
        opt2, params = adam_step(opt, net.param_list(), grads)
        new_qs.append((net.with_params(params), opt2))
    (q1, opt1), (q2, opt2) = new_qs

    # Policy step: advantage-weighted regression onto dataset actions.
    adv = q_t - v
    w = np.minimum(np.exp(config.awr_beta * adv), config.adv_clip)
    if not np.all(np.isfinite(w)):
        raise ValueError("non-finite AWR weight")
    out = mlp_forward(policy.policy.mean_net, obs)
    k = policy.policy.action_dim
    err = out[:, :k] - actions
    pi_loss = float((w * (err * err).sum(axis=1)).mean())
    upstream = np.zeros_like(out)
    upstream[:, :k] = (2.0 / n) * w[:, None] * err
    pi_grads, _ = mlp_grad(policy.policy.mean_net, obs, upstream)
    if policy.policy.log_std is not None:
        pi_grads = pi_grads + [np.zeros_like(policy.policy.log_std)]
    pi_opt, pi_params = adam_step(policy.opt, policy.policy.param_list(), pi_grads)
    policy = PolicyLearner(policy.policy.with_params(pi_params), pi_opt)

    rho = config.polyak
    q_nets = TwinQ(
        q1, q2,
        _polyak(q_nets.q1_target, q1, rho),
        _polyak(q_nets.q2_target, q2, rho),
        opt1, opt2,
    )
    metrics = {
        "v_loss": v_loss,
        "q1_loss": q_losses[0],
        "q2_loss": q_losses[1],
        "pi_loss": pi_loss,
        "awr_weight_mean": float(w.mean()),
        "q_target": q_target,
    }
    return q_nets, v_net, policy, metrics
