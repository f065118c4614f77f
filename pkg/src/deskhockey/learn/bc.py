"""Behavior cloning: mean-squared-error regression of the policy mean onto dataset actions."""

from __future__ import annotations

import numpy as np

from ..nn import AdamState, GaussianPolicy, adam_init, adam_step, mlp_forward, mlp_grad


def bc_update(
    policy: GaussianPolicy,
    batch: dict,
    lr: float,
    opt_state: AdamState | None = None,
) -> tuple[GaussianPolicy, float, AdamState]:
    """One Adam step on mean ||pi(s) - a||^2; the reported loss is pre-step."""
    obs = np.asarray(batch["obs"], dtype=np.float64)
    actions = np.asarray(batch["actions"], dtype=np.float64)
    if obs.ndim != 2 or actions.ndim != 2 or obs.shape[0] != actions.shape[0]:
        raise ValueError(f"batch shape mismatch: obs {obs.shape}, actions {actions.shape}")

    out = mlp_forward(policy.mean_net, obs)
    k = policy.action_dim
    mean = out[:, :k]
    if actions.shape[1] != k:
        raise ValueError(f"action dim mismatch: expected {k}, got {actions.shape[1]}")
    err = mean - actions
    loss = float((err * err).sum(axis=1).mean())

    upstream = np.zeros_like(out)
    upstream[:, :k] = 2.0 * err / obs.shape[0]
    net_grads, _ = mlp_grad(policy.mean_net, obs, upstream)

    params = policy.param_list()
    grads = list(net_grads)
    if policy.log_std is not None:
        grads.append(np.zeros_like(policy.log_std))
    if opt_state is None:
        opt_state = adam_init(params, lr=lr)
    opt_state, new_params = adam_step(opt_state, params, grads)
    return policy.with_params(new_params), loss, opt_state
