"""Proximal policy optimization with a clipped surrogate over shuffled minibatches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    AdamState,
    GaussianPolicy,
    MLPParams,
    adam_init,
    adam_step,
    mlp_forward,
    mlp_grad,
    mlp_init,
)


@dataclass
class PPOConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 4
    minibatch: int = 256
    rollout_len: int = 2048
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    lr: float = 3e-4
    max_kl: float = 0.03   # early stop when the KL estimate exceeds this

    def validate(self) -> None:
        if not (0.0 <= self.gamma < 1.0 and 0.0 <= self.lam <= 1.0):
            raise ValueError("gamma in [0,1), lam in [0,1] required")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be > 0")


@dataclass
class PPOLearner:
    policy: GaussianPolicy
    value_net: MLPParams
    policy_opt: AdamState
    value_opt: AdamState


def ppo_init(obs_dim: int, hidden: tuple[int, ...], policy: GaussianPolicy,
             config: PPOConfig, rng: np.random.Generator) -> PPOLearner:
    value_net = mlp_init([obs_dim, *hidden, 1], rng)
    return PPOLearner(
        policy=policy,
        value_net=value_net,
        policy_opt=adam_init(policy.param_list(), lr=config.lr),
        value_opt=adam_init(value_net.param_list(), lr=config.lr),
    )


def _gauss_logprob_terms(mean, log_std, actions):
    inv_var = np.exp(-2.0 * log_std)
    diff = actions - mean
    logp = (-0.5 * diff * diff * inv_var - log_std - 0.5 * np.log(2.0 * np.pi)).sum(axis=1)
    return logp, diff, inv_var


def ppo_update(
    learner: PPOLearner,
    batch: dict,
    config: PPOConfig,
    rng: np.random.Generator,
) -> tuple[PPOLearner, dict]:
    """Clipped-surrogate update over `epochs` passes of shuffled minibatches.

    batch: obs, actions, logprobs (behavior), advantages (already normalized),
    returns. Maximizes min(ratio*A, clip(ratio)*A) - value_coef*(V-R)^2
    + entropy_coef*H; stops early when the KL estimate exceeds config.max_kl.
    """
    if learner.policy.log_std is None or learner.policy.squash:
        raise ValueError("ppo_update requires an unsquashed policy with state-independent log_std")
    obs = np.asarray(batch["obs"], dtype=np.float64)
    actions = np.asarray(batch["actions"], dtype=np.float64)
    old_logp = np.asarray(batch["logprobs"], dtype=np.float64)
    adv = np.asarray(batch["advantages"], dtype=np.float64)
    returns = np.asarray(batch["returns"], dtype=np.float64)
    n = obs.shape[0]
    policy = learner.policy
    value_net = learner.value_net
    policy_opt, value_opt = learner.policy_opt, learner.value_opt
    eps = config.clip_eps

    # Pre-update surrogate on the full batch (ratio == 1 when the policy is fresh).
    mean0 = mlp_forward(policy.mean_net, obs)
    log_std0 = np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX)
    logp0, _, _ = _gauss_logprob_terms(mean0, log_std0, actions)
    ratio0 = np.exp(logp0 - old_logp)
    surrogate_pre = float(np.minimum(ratio0 * adv, np.clip(ratio0, 1 - eps, 1 + eps) * adv).mean())

    metrics = {
        "surrogate_pre": surrogate_pre,
        "policy_loss": 0.0,
        "value_loss": 0.0,
        "entropy": 0.0,
        "kl": 0.0,
        "clip_fraction": 0.0,
        "minibatches": 0,
    }

    stop = False
    for _ in range(config.epochs):
        if stop:
            break
        order = rng.permutation(n)
        for start in range(0, n, config.minibatch):
            idx = order[start:start + config.minibatch]
            mb_obs, mb_act = obs[idx], actions[idx]
            mb_adv, mb_ret, mb_old = adv[idx], returns[idx], old_logp[idx]
            m = len(idx)

            mean = mlp_forward(policy.mean_net, mb_obs)
            log_std = np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX)
            logp, diff, inv_var = _gauss_logprob_terms(mean, log_std, mb_act)
            ratio = np.exp(logp - mb_old)
            unclipped = ratio * mb_adv
            clipped = np.clip(ratio, 1 - eps, 1 + eps) * mb_adv
            surrogate = np.minimum(unclipped, clipped)
            entropy = float((log_std + 0.5 * (1 + np.log(2 * np.pi))).sum())
            value = mlp_forward(value_net, mb_obs)[:, 0]
            v_err = value - mb_ret
            policy_loss = -float(surrogate.mean()) - config.entropy_coef * entropy
            value_loss = float((v_err * v_err).mean())
            if not (np.isfinite(policy_loss) and np.isfinite(value_loss)):
                raise ValueError(f"divergence in minibatch {metrics['minibatches']}")

            # Surrogate subgradient: flows through the unclipped branch only.
            use = (unclipped <= clipped).astype(np.float64)
            coeff = -(use * ratio * mb_adv) / m          # d(policy_loss)/d(logp)
            up_mean = coeff[:, None] * (diff * inv_var)  # d logp/d mean = (a-mu)/sigma^2
            net_grads, _ = mlp_grad(policy.mean_net, mb_obs, up_mean)
            g_log_std = (coeff[:, None] * (diff * diff * inv_var - 1.0)).sum(axis=0)
            g_log_std += -config.entropy_coef  # dH/d log_std = 1 per dim
            grads = net_grads + [g_log_std]
            policy_opt, new_params = adam_step(policy_opt, policy.param_list(), grads)
            policy = policy.with_params(new_params)
            policy.log_std = np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX)

            v_grads, _ = mlp_grad(value_net, mb_obs, (2.0 * config.value_coef / m) * v_err[:, None])
            value_opt, new_v = adam_step(value_opt, value_net.param_list(), v_grads)
            value_net = value_net.with_params(new_v)

            kl = float((mb_old - logp).mean())
            metrics["policy_loss"] = policy_loss
            metrics["value_loss"] = value_loss
            metrics["entropy"] = entropy
            metrics["kl"] = kl
            metrics["clip_fraction"] = float((np.abs(ratio - 1.0) > eps).mean())
            metrics["minibatches"] += 1
            if abs(kl) > config.max_kl:
                stop = True
                break

    return PPOLearner(policy, value_net, policy_opt, value_opt), metrics
