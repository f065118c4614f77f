"""Generalized advantage estimation."""

from __future__ import annotations

import numpy as np


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Exponentially weighted TD-residual advantages and value targets.

    values must carry one extra bootstrap entry for the truncated tail:
    len(values) == len(rewards) + 1. delta_t = r_t + gamma*(1-done_t)*V_{t+1} - V_t,
    A_t = delta_t + gamma*lam*(1-done_t)*A_{t+1}, returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    n = len(rewards)
    if len(values) != n + 1 or len(dones) != n:
        raise ValueError(
            f"length mismatch: rewards {n}, values {len(values)} (need {n + 1}), dones {len(dones)}"
        )
    advantages = np.zeros(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * nonterminal * values[t + 1] - values[t]
        last = delta + gamma * lam * nonterminal * last
        advantages[t] = last
    return advantages, advantages + values[:-1]
