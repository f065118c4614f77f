"""Hindsight experience relabeling for the goal-conditioned tasks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..physics import DEFAULT_BOUNDS
from ..tasks import (
    TERMINATE_ON_ENTRY,
    TERMINATE_ON_SUCCESS,
    V_SCALE,
    VELOCITY_GOAL_TASKS,
    TaskSpec,
    goal_entry_components,
    goal_slice,
)


@dataclass
class HERConfig:
    strategy: str = "future"
    k: int = 4

    def validate(self) -> None:
        if self.strategy not in ("final", "future"):
            raise ValueError(f"unknown strategy {self.strategy!r}; use final or future")
        if self.strategy == "future" and self.k < 1:
            raise ValueError("k must be >= 1 for the future strategy")


def goal_reward_series(spec: TaskSpec, achieved: list, goal: list) -> tuple[list, list]:
    """Recompute the goal-dependent reward components of a whole episode.

    achieved[t] is the post-step achieved goal; returns (components_per_step,
    success_so_far_per_step). Mirrors the live env's once-only bonus/entry logic
    exactly, so relabeled rewards match an env replayed with the new goal.
    """
    task = spec.task_id
    w = spec.reward_weights
    comps_out, success_out = [], []
    met = False
    g_pos = (goal[0], goal[1])
    g_vel = (goal[2], goal[3]) if len(goal) == 4 else None
    speed_ok = cos_ok = False
    for ag in achieved:
        comps = {}
        d = math.hypot(ag[0] - g_pos[0], ag[1] - g_pos[1])
        if task in ("Reach", "ReachVelocity"):
            comps["goal_dist"] = w["w_dist"] * (-d)
            hit = d <= spec.eps_position
            if task == "ReachVelocity":
                dv = math.hypot(ag[2] - g_vel[0], ag[3] - g_vel[1])
                comps["goal_vel"] = w["w_vel"] * (-dv)
                hit = hit and dv <= spec.eps_velocity
            if hit and not met:
                met = True
                comps["bonus"] = w["bonus"]
            success_out.append(met)
        else:  # HitGoal, HitGoalVelocity
            if not met and d <= spec.goal_radius:
                met = True
                entry, speed_ok, cos_ok = goal_entry_components(spec, tuple(ag), g_pos, g_vel)
                comps.update(entry)
            if task == "HitGoal":
                success_out.append(met)
            else:
                success_out.append(met and speed_ok and cos_ok)
        comps_out.append(comps)
    return comps_out, success_out


def _relabeled_episode(spec: TaskSpec, steps: list, new_goal: list, hw: float, hl: float):
    achieved = [s["achieved_goal"] for s in steps]
    old_goal = steps[0]["desired_goal"]
    old_comps, _ = goal_reward_series(spec, achieved, old_goal)
    new_comps, new_success = goal_reward_series(spec, achieved, new_goal)

    gs = goal_slice(spec)
    norm_goal = [new_goal[0] / hw, new_goal[1] / hl]
    if spec.task_id in VELOCITY_GOAL_TASKS:
        norm_goal += [new_goal[2] / V_SCALE, new_goal[3] / V_SCALE]

    out = []
    terminates = spec.task_id in TERMINATE_ON_SUCCESS or spec.task_id in TERMINATE_ON_ENTRY
    for t, s in enumerate(steps):
        obs = np.array(s["obs"], dtype=np.float64)
        next_obs = np.array(s["next_obs"], dtype=np.float64)
        obs[gs] = norm_goal
        next_obs[gs] = norm_goal
        reward = s["reward"] - sum(old_comps[t].values()) + sum(new_comps[t].values())
        done = bool(s["done"]) or (terminates and new_success[t])
        out.append({
            "obs": obs,
            "action": np.array(s["action"], dtype=np.float64),
            "reward": float(reward),
            "next_obs": next_obs,
            "done": done,
            "success": bool(new_success[t]),
            "achieved_goal": list(achieved[t]),
            "desired_goal": list(new_goal),
        })
        if terminates and new_success[t]:
            break  # the env would have reset here under the new goal
    return out


def her_relabel(
    trajectory: list,
    her_config: HERConfig,
    task_spec: TaskSpec,
    rng: np.random.Generator,
) -> list:
    """Original transitions plus hindsight-relabeled copies.

    final: one full-episode copy with the goal replaced by the last achieved goal.
    future: per step, up to k copies with goals drawn from strictly later steps.
    Rewards, success flags, and obs goal blocks are recomputed under each new goal.
    """
    her_config.validate()
    if not task_spec.goal_conditioned:
        raise ValueError(f"{task_spec.task_id} is not goal-conditioned; nothing to relabel")
    steps = list(trajectory)
    if not steps:
        return []
    if steps[0].get("achieved_goal") is None or steps[0].get("desired_goal") is None:
        raise ValueError("trajectory lacks achieved/desired goals; cannot relabel")
    hw, hl = DEFAULT_BOUNDS.half_width, DEFAULT_BOUNDS.half_length

    out = [dict(s) for s in steps]
    if her_config.strategy == "final":
        out.extend(_relabeled_episode(task_spec, steps, steps[-1]["achieved_goal"], hw, hl))
        return out

    n = len(steps)
    achieved = [s["achieved_goal"] for s in steps]
    for t in range(n - 1):
        future_idx = rng.integers(t + 1, n, size=her_config.k)
        for j in sorted(set(int(i) for i in future_idx)):
            relabeled = _relabeled_episode(task_spec, steps[t:t + 1], achieved[j], hw, hl)
            out.extend(relabeled)
    return out
