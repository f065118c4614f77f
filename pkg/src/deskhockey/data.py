"""Trajectory persistence, loading, and bit-exact replay verification.

File format (JSON lines): line 1 header, line 2 initial WorldState, then one
step record per line. Floats keep full round-trip precision so a trajectory
produced by this build replays bit-exactly on the same build. Policy-generated
and teleoperated data share the format.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .physics import PhysicsParams, WorldState
from .tasks import AirHockeyEnv, TaskSpec, config_hash, default_physics, default_task_spec

FORMAT_VERSION = 1
SOURCES = ("teleop_mouse", "policy", "scripted")


def make_header(
    env: AirHockeyEnv,
    seed: int,
    source: str,
    participant_id: str | None = None,
    truncated: bool = False,
) -> dict:
    """Self-describing header; the embedded config lets replay rebuild the env."""
    if source not in SOURCES:
        raise ValueError(f"unknown source {source!r}; valid: {', '.join(SOURCES)}")
    header = {
        "format_version": FORMAT_VERSION,
        "task_id": env.spec.task_id,
        "config_hash": env.config_hash(),
        "seed": seed,
        "obs_dim": env.observation_dim,
        "act_dim": env.action_dim,
        "source": source,
        "truncated": truncated,
        "config": {"task": env.spec.to_dict(), "physics": env.physics.to_dict()},
    }
    if participant_id is not None:
        header["participant_id"] = participant_id
    return header


def _listify(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def _step_to_dict(step: dict) -> dict:
    out = {
        "obs": _listify(step["obs"]),
        "action": _listify(step["action"]),
        "reward": float(step["reward"]),
        "next_obs": _listify(step["next_obs"]),
        "done": bool(step["done"]),
        "success": bool(step.get("success", False)),
    }
    if step.get("achieved_goal") is not None:
        out["achieved_goal"] = _listify(step["achieved_goal"])
        out["desired_goal"] = _listify(step["desired_goal"])
    return out


def write_trajectory(file_path: str, header: dict, initial_world: WorldState, steps: list) -> None:
    """Atomic JSON-lines write: header, initial world, one step per line."""
    obs_dim = header["obs_dim"]
    act_dim = header["act_dim"]
    records = []
    for i, step in enumerate(steps):
        rec = _step_to_dict(step)
        if len(rec["obs"]) != obs_dim or len(rec["next_obs"]) != obs_dim:
            raise ValueError(f"step {i}: obs dim != header obs_dim {obs_dim}")
        if len(rec["action"]) != act_dim:
            raise ValueError(f"step {i}: action dim != header act_dim {act_dim}")
        records.append(rec)
    dones = [r["done"] for r in records]
    if not header.get("truncated", False):
        if records and (any(dones[:-1]) or not dones[-1]):
            raise ValueError("exactly one terminal step required at the end (or flag truncated)")

    tmp = f"{file_path}.tmp"
    with open(tmp, "w") as f:
        f.write(json.dumps(header) + "\n")
        f.write(initial_world.to_json() + "\n")
        for rec in records:
            f.write(json.dumps(rec) + "\n")
    os.replace(tmp, file_path)


def read_trajectory(path: str) -> tuple[dict, WorldState, list]:
    with open(path) as f:
        lines = f.read().splitlines()
    if len(lines) < 2:
        raise ValueError(f"{path}: needs at least header and initial world lines")

    def parse(line_no: int) -> dict:
        try:
            return json.loads(lines[line_no])
        except json.JSONDecodeError as e:
            raise ValueError(f"{path} line {line_no + 1}: {e}") from e

    header = parse(0)
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"{path}: incompatible format_version {header.get('format_version')!r}"
        )
    world = WorldState.from_dict(parse(1))
    steps = [parse(i) for i in range(2, len(lines))]
    return header, world, steps


@dataclass
class FileSummary:
    path: str
    task_id: str
    episode_length: int
    success: bool
    source: str
    truncated: bool


@dataclass
class DatasetIndex:
    directory: str
    files: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    filtered_out: int = 0

    @property
    def total_episodes(self) -> int:
        return len(self.files)

    @property
    def total_transitions(self) -> int:
        return sum(f.episode_length for f in self.files)

    def iter_transitions(self):
        """Transitions in deterministic (filename, step) order."""
        for summary in self.files:
            _, _, steps = read_trajectory(summary.path)
            for step in steps:
                yield step


def read_dataset(directory: str, task_id: str | None = None) -> DatasetIndex:
    """Index every trajectory file in a directory (lexicographic order).

    Files with an incompatible format_version are skipped with a warning; files
    for other tasks are counted in filtered_out when task_id is given. Malformed
    lines raise with the file and line number.
    """
    if not os.path.isdir(directory):
        raise ValueError(f"dataset directory not found: {directory}")
    index = DatasetIndex(directory=directory)
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".jsonl"):
            continue
        path = os.path.join(directory, name)
        try:
            header, _, steps = read_trajectory(path)
        except ValueError as e:
            if "incompatible format_version" in str(e):
                index.warnings.append(str(e))
                continue
            raise
        if task_id is not None and header["task_id"] != task_id:
            index.filtered_out += 1
            continue
        index.files.append(FileSummary(
            path=path,
            task_id=header["task_id"],
            episode_length=len(steps),
            success=any(s.get("success", False) for s in steps),
            source=header["source"],
            truncated=bool(header.get("truncated", False)),
        ))
    return index


def load_transitions(index: DatasetIndex) -> dict:
    """Stack a dataset index into flat arrays for offline learning."""
    obs, actions, rewards, next_obs, dones = [], [], [], [], []
    for step in index.iter_transitions():
        obs.append(step["obs"])
        actions.append(step["action"])
        rewards.append(step["reward"])
        next_obs.append(step["next_obs"])
        dones.append(float(step["done"]))
    if not obs:
        raise ValueError(f"empty dataset in {index.directory}")
    return {
        "obs": np.array(obs, dtype=np.float64),
        "actions": np.array(actions, dtype=np.float64),
        "rewards": np.array(rewards, dtype=np.float64),
        "next_obs": np.array(next_obs, dtype=np.float64),
        "dones": np.array(dones, dtype=np.float64),
    }


def load_episodes(index: DatasetIndex) -> list:
    """Episodes as lists of step dicts (for hindsight relabeling)."""
    return [read_trajectory(f.path)[2] for f in index.files]


@dataclass
class ReplayReport:
    passed: bool
    steps_checked: int
    max_obs_deviation: float
    max_reward_deviation: float
    first_divergence: int | None
    message: str


def env_from_header(header: dict, config: dict | None = None) -> AirHockeyEnv:
    """Rebuild the recorded environment, refusing a silently-mismatched config."""
    if config is not None:
        spec = TaskSpec.from_dict(config["task"])
        physics = PhysicsParams.from_dict(config["physics"])
    elif header.get("config"):
        spec = TaskSpec.from_dict(header["config"]["task"])
        physics = PhysicsParams.from_dict(header["config"]["physics"])
    else:
        spec = default_task_spec(header["task_id"])
        physics = default_physics(header["task_id"])
    actual = config_hash(physics, spec)
    if actual != header["config_hash"]:
        raise ValueError(
            f"unknown config_hash {header['config_hash']}: reconstructed config hashes to {actual}"
        )
    return AirHockeyEnv(spec, physics, seed=header["seed"])


def verify_replay(trajectory_file: str, config: dict | None = None) -> ReplayReport:
    """Re-simulate a trajectory from its initial world and stored actions.

    PASS iff every observation, reward, done flag, and the initial world are
    bit-exact. Parse failures raise; divergence yields a FAIL report naming the
    first divergent step.
    """
    header, initial_world, steps = read_trajectory(trajectory_file)
    env = env_from_header(header, config)
    env.reset_from_world(initial_world)

    if env.world.to_dict() != initial_world.to_dict():
        return ReplayReport(False, 0, float("inf"), float("inf"), 0,
                            "initial world mismatch after reset from rng_state")

    max_obs_dev = 0.0
    max_r_dev = 0.0
    first_div: int | None = None
    for i, step in enumerate(steps):
        try:
            result = env.step(step["action"])
        except RuntimeError:
            first_div = i
            max_obs_dev = max_r_dev = float("inf")
            break
        obs_dev = float(np.max(np.abs(result.observation - np.array(step["next_obs"]))))
        r_dev = abs(result.reward - step["reward"])
        max_obs_dev = max(max_obs_dev, obs_dev)
        max_r_dev = max(max_r_dev, r_dev)
        if (obs_dev != 0.0 or r_dev != 0.0 or result.done != step["done"]) and first_div is None:
            first_div = i

    passed = first_div is None
    message = "bit-exact replay" if passed else f"first divergence at step {first_div}"
    return ReplayReport(passed, len(steps), max_obs_dev, max_r_dev, first_div, message)
