"""Soft actor-critic with a squashed Gaussian head and learnable temperature."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..nn import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    AdamState,
    GaussianPolicy,
    adam_init,
    adam_step,
    make_policy,
    mlp_forward,
    mlp_grad,
    mlp_init,
)
from .iql import PolicyLearner, TwinQ, _clone, _polyak


@dataclass
class SACConfig:
    gamma: float = 0.99
    polyak: float = 0.995
    lr: float = 3e-4
    target_entropy: float | None = None  # None: -act_dim when learning alpha
    init_alpha: float = 0.1
    learn_alpha: bool = True

    def validate(self) -> None:
        if not 0.0 < self.polyak < 1.0:
            raise ValueError("polyak must be in (0, 1)")


@dataclass
class AlphaState:
    log_alpha: float
    opt: AdamState | None

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)


def sac_init(obs_dim: int, act_dim: int, hidden: tuple[int, ...], config: SACConfig,
             rng: np.random.Generator) -> tuple[TwinQ, PolicyLearner, AlphaState]:
    q1 = mlp_init([obs_dim + act_dim, *hidden, 1], rng)
    q2 = mlp_init([obs_dim + act_dim, *hidden, 1], rng)
    q_nets = TwinQ(q1, q2, _clone(q1), _clone(q2),
                   adam_init(q1.param_list(), lr=config.lr),
                   adam_init(q2.param_list(), lr=config.lr))
    policy = make_policy(obs_dim, act_dim, hidden, rng, squash=True, std_head=True)
    pi = PolicyLearner(policy, adam_init(policy.param_list(), lr=config.lr))
    if config.init_alpha > 0.0:
        log_alpha = math.log(config.init_alpha)
        alpha_opt = adam_init([np.zeros(1)], lr=config.lr) if config.learn_alpha else None
    else:
        log_alpha = -math.inf  # alpha fixed at exactly zero (greedy limit)
        alpha_opt = None
    return q_nets, pi, AlphaState(log_alpha, alpha_opt)


def _sample_squashed(policy: GaussianPolicy, obs: np.ndarray, rng: np.random.Generator):
    """Reparameterized squashed sample with everything gradients need."""
    out = mlp_forward(policy.mean_net, obs)
    k = policy.action_dim
    mean = out[:, :k]
    raw_log_std = out[:, k:]
    log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(log_std)
    noise = rng.standard_normal(mean.shape)
    u = mean + std * noise
    a = np.tanh(u)
    # log pi(a|s) = sum(-0.5*xi^2 - log_std - 0.5*log(2pi)) - sum log(1 - tanh(u)^2)
    log_det = 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))
    logp = (-0.5 * noise * noise - log_std - 0.5 * math.log(2 * math.pi)).sum(axis=1) - log_det.sum(axis=1)
    clip_mask = ((raw_log_std > LOG_STD_MIN) & (raw_log_std < LOG_STD_MAX)).astype(np.float64)
    return out, mean, log_std, std, noise, u, a, logp, clip_mask


def sac_update(
    q_nets: TwinQ,
    policy: PolicyLearner,
    alpha_state: AlphaState,
    batch: dict,
    config: SACConfig,
    rng: np.random.Generator,
) -> tuple[TwinQ, PolicyLearner, AlphaState, dict]:
    """One SAC step over a replay batch.

    Twin-Q TD update toward r + gamma*(1-done)*(min Q_target(s',a') - alpha*logpi),
    a' ~ pi(s'); the policy maximizes min Q - alpha*logpi via the reparameterized
    sample; alpha is adjusted toward target_entropy; targets polyak-updated.
    """
    obs = np.asarray(batch["obs"], dtype=np.float64)
    actions = np.asarray(batch["actions"], dtype=np.float64)
    rewards = np.asarray(batch["rewards"], dtype=np.float64)
    next_obs = np.asarray(batch["next_obs"], dtype=np.float64)
    dones = np.asarray(batch["dones"], dtype=np.float64)
    n = obs.shape[0]
    alpha = alpha_state.alpha

    # TD target from the target nets and a fresh next action.
    _, _, _, _, _, _, a_next, logp_next, _ = _sample_squashed(policy.policy, next_obs, rng)
    sa_next = np.concatenate([next_obs, a_next], axis=1)
    q_next = np.minimum(
        mlp_forward(q_nets.q1_target, sa_next)[:, 0],
        mlp_forward(q_nets.q2_target, sa_next)[:, 0],
    )
    q_target = rewards + config.gamma * (1.0 - dones) * (q_next - alpha * logp_next)
    if not np.all(np.isfinite(q_target)):
        raise ValueError("non-finite TD target")

    sa = np.concatenate([obs, actions], axis=1)
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

    # Policy step: minimize alpha*logpi(a~|s) - min Q(s, a~), reparameterized.
    out, mean, log_std, std, noise, u, a_pi, logp_pi, clip_mask = _sample_squashed(
        policy.policy, obs, rng
    )
    sa_pi = np.concatenate([obs, a_pi], axis=1)
    q1_pi = mlp_forward(q1, sa_pi)[:, 0]
    q2_pi = mlp_forward(q2, sa_pi)[:, 0]
    use_q1 = q1_pi <= q2_pi
    # dQmin/da through the elementwise-min branch, per sample
    _, in_grad1 = mlp_grad(q1, sa_pi, np.where(use_q1, 1.0, 0.0)[:, None])
    _, in_grad2 = mlp_grad(q2, sa_pi, np.where(use_q1, 0.0, 1.0)[:, None])
    k = policy.policy.action_dim
    dq_da = (in_grad1 + in_grad2)[:, obs.shape[1]:]

    tanh_u = np.tanh(u)
    dadu = 1.0 - tanh_u * tanh_u
    dlogp_du = 2.0 * tanh_u                      # from the -log(1-tanh^2) term
    du_dlogstd = std * noise
    # d(loss)/d(mean) and d(loss)/d(log_std), loss averaged over the batch
    dl_du = (alpha * dlogp_du - dq_da * dadu) / n
    up_out = np.zeros_like(out)
    up_out[:, :k] = dl_du
    up_out[:, k:] = (dl_du * du_dlogstd + (alpha * -1.0 / n)) * clip_mask
    pi_loss = float((alpha * logp_pi - np.minimum(q1_pi, q2_pi)).mean())
    pi_grads, _ = mlp_grad(policy.policy.mean_net, obs, up_out)
    pi_opt, pi_params = adam_step(policy.opt, policy.policy.param_list(), pi_grads)
    policy = PolicyLearner(policy.policy.with_params(pi_params), pi_opt)

    # Temperature: descend alpha * (entropy_estimate - target_entropy).
    if config.learn_alpha and alpha_state.opt is not None and config.target_entropy is not None:
        grad = float(-(logp_pi + config.target_entropy).mean())
        opt, vals = adam_step(alpha_state.opt, [np.array([alpha_state.log_alpha])],
                              [np.array([grad])])
        alpha_state = AlphaState(float(vals[0][0]), opt)

    rho = config.polyak
    q_nets = TwinQ(
        q1, q2,
        _polyak(q_nets.q1_target, q1, rho),
        _polyak(q_nets.q2_target, q2, rho),
        opt1, opt2,
    )
    metrics = {
        "q1_loss": q_losses[0],
        "q2_loss": q_losses[1],
        "pi_loss": pi_loss,
        "alpha": alpha_state.alpha,
        "entropy_estimate": float(-logp_pi.mean()),
        "q_target": q_target,
    }
    return q_nets, policy, alpha_state, metrics
