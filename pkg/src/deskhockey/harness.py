"""Training/evaluation entry points, seeding, and report emission.

train() runs one algorithm (ppo, bc, iql, sac_her) over a list of seeds and
writes per-seed policy files, a metrics CSV, a min-max-normalized reward curve
CSV, and a report.json; everything is deterministic per (config, seed).
emit_results_table() assembles reports into the tasks-by-algorithms table.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import load_transitions, make_header, read_dataset, write_trajectory
from .learn import (
    HERConfig,
    IQLConfig,
    PPOConfig,
    ReplayBuffer,
    SACConfig,
    bc_update,
    compute_gae,
    her_relabel,
    iql_init,
    iql_update,
    ppo_init,
    ppo_update,
    sac_init,
    sac_update,
)
from .nn import (
    gaussian_head,
    load_policy,
    make_policy,
    mlp_forward,
    policy_mean_logstd,
    save_policy,
)
from .tasks import TASK_IDS, AirHockeyEnv, make_task

ALGORITHMS = ("bc", "ppo", "sac_her", "iql")
ALGO_LABELS = {"bc": "BC", "iql": "IQL", "ppo": "PPO", "sac_her": "SAC+HER"}
EVAL_SEED_OFFSET = 10_000


@dataclass
class RunConfig:
    task_id: str
    algorithm: str
    physics: dict = field(default_factory=dict)
    task: dict = field(default_factory=dict)
    algo: dict = field(default_factory=dict)
    total_steps: int = 300_000
    eval_every: int = 25_000
    n_eval_episodes: int = 50
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    output_dir: str = "runs"
    dataset_dir: str | None = None
    n_envs: int = 8
    hidden: list = field(default_factory=lambda: [256, 256])
    target_success: float | None = None

    def validate(self) -> None:
        if self.task_id not in TASK_IDS:
            raise ValueError(f"unknown task_id {self.task_id!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; valid: {', '.join(ALGORITHMS)}")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.total_steps <= 0:
            raise ValueError("total_steps must be > 0")
        if self.algorithm in ("bc", "iql") and not self.dataset_dir:
            raise ValueError(f"{self.algorithm} requires dataset_dir")

    def env_config(self) -> dict:
        return {"task": dict(self.task), "physics": dict(self.physics)}

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path) as f:
            doc = json.load(f)
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def save(self, path: str) -> None:
        """Full default inlining: the saved document reconstructs this run exactly."""
        env = make_task(self.task_id, self.env_config(), seed=0)
        doc = asdict(self)
        doc["resolved"] = {"task": env.spec.to_dict(), "physics": env.physics.to_dict(),
                           "config_hash": env.config_hash()}
        with open(path, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)


@dataclass
class EvalReport:
    task_id: str
    per_seed: dict
    mean: float
    episodes: int
    policy_file: str
    mean_return: float = 0.0


def _obs_layout(env: AirHockeyEnv) -> dict:
    return {
        "task_id": env.spec.task_id,
        "obs_dim": env.observation_dim,
        "act_dim": env.action_dim,
        "goal_conditioned": env.spec.goal_conditioned,
        "n_blocks": env.spec.n_blocks,
    }


def greedy_action(policy, obs: np.ndarray) -> np.ndarray:
    a = gaussian_head(policy, obs, "mean")
    return np.clip(a, -1.0, 1.0)


def run_episode(env: AirHockeyEnv, policy, record: bool = False):
    """One greedy episode; returns (success, episodic_return, steps, initial_world)."""
    obs = env.reset()
    initial_world = env.world
    total = 0.0
    steps = [] if record else None
    while True:
        a = greedy_action(policy, obs)
        r = env.step(a)
        total += r.reward
        if record:
            steps.append({
                "obs": obs, "action": np.clip(np.asarray(a, dtype=np.float64), -1, 1),
                "reward": r.reward, "next_obs": r.observation, "done": r.done,
                "success": r.info["success"],
                "achieved_goal": r.info.get("achieved_goal"),
                "desired_goal": r.info.get("desired_goal"),
            })
        obs = r.observation
        if r.done:
            return r.info["success"], total, steps, initial_world


def evaluate(
    policy_file: str,
    task_id: str,
    n_episodes: int = 50,
    seeds: list | None = None,
    config: dict | None = None,
) -> EvalReport:
    """Greedy (policy-mean) evaluation; success per the task predicate; deterministic."""
    policy, doc = load_policy(policy_file)
    layout = doc["obs_layout"]
    probe = make_task(task_id, config, seed=0)
    if layout.get("obs_dim") != probe.observation_dim:
        raise ValueError(
            f"obs layout mismatch: policy expects obs_dim {layout.get('obs_dim')}, "
            f"task {task_id} provides {probe.observation_dim}"
        )
    seeds = list(seeds) if seeds else [0]
    per_seed = {}
    returns = []
    for seed in seeds:
        env = make_task(task_id, config, seed=EVAL_SEED_OFFSET + seed)
        wins = 0
        for _ in range(n_episodes):
            success, ep_ret, _, _ = run_episode(env, policy)
            wins += int(success)
            returns.append(ep_ret)
        per_seed[str(seed)] = wins / n_episodes
    mean = sum(per_seed.values()) / len(per_seed)
    return EvalReport(task_id, per_seed, mean, n_episodes, policy_file,
                      float(np.mean(returns)))


def _quick_success(env_cfg, task_id, policy, n_episodes=20, seed=0):
    env = make_task(task_id, env_cfg, seed=EVAL_SEED_OFFSET + seed)
    wins = 0
    rets = []
    for _ in range(n_episodes):
        success, ep_ret, _, _ = run_episode(env, policy)
        wins += int(success)
        rets.append(ep_ret)
    return wins / n_episodes, float(np.mean(rets))


def _write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")


def write_curve(path: str, steps: list, returns: list) -> None:
    """Reward curve min-max normalized to [0, 1] over the run."""
    if not returns:
        _write_csv(path, ["step", "normalized_return"], [])
        return
    lo, hi = min(returns), max(returns)
    span = hi - lo
    rows = []
    for s, r in zip(steps, returns):
        rows.append([s, 0.0 if span == 0.0 else (r - lo) / span])
    _write_csv(path, ["step", "normalized_return"], rows)


# -- PPO ------------------------------------------------------------------------


def train_ppo_seed(config: RunConfig, seed: int, out_dir: str) -> str:
    config.validate()
    ppo_cfg = PPOConfig(**config.algo.get("ppo", {}))
    ppo_cfg.validate()
    env_cfg = config.env_config()
    n_envs = config.n_envs
    envs = [make_task(config.task_id, env_cfg, seed=seed * 10_000 + i) for i in range(n_envs)]
    obs_dim = envs[0].observation_dim
    hidden = tuple(config.hidden)

    init_rng = np.random.default_rng(seed)
    policy = make_policy(obs_dim, 2, hidden, init_rng)
    learner = ppo_init(obs_dim, hidden, policy, ppo_cfg, init_rng)
    act_rng = np.random.default_rng(seed + 1)
    shuffle_rng = np.random.default_rng(seed + 2)

    rollout_len = max(1, ppo_cfg.rollout_len // n_envs)
    obs = np.stack([env.reset() for env in envs])
    ep_returns = np.zeros(n_envs)
    finished_returns: list[float] = []
    finished_successes: list[bool] = []
    metrics_rows = []
    curve_steps, curve_returns = [], []
    steps_done = 0
    next_eval = config.eval_every

    while steps_done < config.total_steps:
        roll_obs = np.zeros((rollout_len, n_envs, obs_dim))
        roll_act = np.zeros((rollout_len, n_envs, 2))
        roll_logp = np.zeros((rollout_len, n_envs))
        roll_rew = np.zeros((rollout_len, n_envs))
        roll_done = np.zeros((rollout_len, n_envs))
        roll_val = np.zeros((rollout_len + 1, n_envs))

        for t in range(rollout_len):
            mean, log_std = policy_mean_logstd(learner.policy, obs)
            std = np.exp(log_std)
            noise = act_rng.standard_normal(mean.shape)
            actions = mean + std * noise
            logp = (-0.5 * noise * noise - log_std - 0.5 * math.log(2 * math.pi)).sum(axis=1)
            values = mlp_forward(learner.value_net, obs)[:, 0]
            roll_obs[t] = obs
            roll_act[t] = actions
            roll_logp[t] = logp
            roll_val[t] = values
            for i, env in enumerate(envs):
                r = env.step(np.clip(actions[i], -1, 1))
                reward = r.reward
                done = r.done
                ep_returns[i] += reward
                if done:
                    finished_returns.append(ep_returns[i])
                    finished_successes.append(r.info["success"])
                    ep_returns[i] = 0.0
                    if r.info["truncated"]:
                        # timeout: bootstrap through the boundary
                        v_final = mlp_forward(learner.value_net, r.observation)[0, 0] \
                            if r.observation.ndim > 1 else \
                            mlp_forward(learner.value_net, r.observation[None, :])[0, 0]
                        reward = reward + ppo_cfg.gamma * float(v_final)
                    next_obs = env.reset()
                else:
                    next_obs = r.observation
                roll_rew[t, i] = reward
                roll_done[t, i] = float(done)
                obs[i] = next_obs
        roll_val[rollout_len] = mlp_forward(learner.value_net, obs)[:, 0]
        steps_done += rollout_len * n_envs

        adv = np.zeros((rollout_len, n_envs))
        ret = np.zeros((rollout_len, n_envs))
        for i in range(n_envs):
            adv[:, i], ret[:, i] = compute_gae(
                roll_rew[:, i], roll_val[:, i], roll_done[:, i], ppo_cfg.gamma, ppo_cfg.lam
            )
        flat_adv = adv.reshape(-1)
        flat_adv = (flat_adv - flat_adv.mean()) / (flat_adv.std() + 1e-8)
        batch = {
            "obs": roll_obs.reshape(-1, obs_dim),
            "actions": roll_act.reshape(-1, 2),
            "logprobs": roll_logp.reshape(-1),
            "advantages": flat_adv,
            "returns": ret.reshape(-1),
        }
        learner, m = ppo_update(learner, batch, ppo_cfg, shuffle_rng)

        window = finished_returns[-20:]
        mean_ret = float(np.mean(window)) if window else 0.0
        succ = float(np.mean(finished_successes[-20:])) if finished_successes else 0.0
        metrics_rows.append([steps_done, len(finished_returns), mean_ret, succ,
                             m["policy_loss"], m["value_loss"], m["kl"], m["clip_fraction"]])
        curve_steps.append(steps_done)
        curve_returns.append(mean_ret)

        if steps_done >= next_eval:
            next_eval += config.eval_every
            if config.target_success is not None:
                rate, _ = _quick_success(env_cfg, config.task_id, learner.policy, seed=seed)
                if rate >= config.target_success:
                    break

    policy_path = os.path.join(out_dir, "policy.json")
    save_policy(policy_path, learner.policy, _obs_layout(envs[0]), envs[0].action_scale)
    _write_csv(os.path.join(out_dir, "metrics.csv"),
               ["step", "episodes", "mean_return", "success_rate",
                "policy_loss", "value_loss", "kl", "clip_fraction"], metrics_rows)
    write_curve(os.path.join(out_dir, "curve.csv"), curve_steps, curve_returns)
    return policy_path


# -- offline: BC and IQL -----------------------------------------------------------


def _offline_data(config: RunConfig):
    index = read_dataset(config.dataset_dir, task_id=config.task_id)
    return load_transitions(index)


def train_bc_seed(config: RunConfig, seed: int, out_dir: str) -> str:
    data = _offline_data(config)
    env = make_task(config.task_id, config.env_config(), seed=seed)
    rng = np.random.default_rng(seed)
    lr = config.algo.get("bc", {}).get("lr", 1e-3)
    batch_size = config.algo.get("bc", {}).get("batch_size", 256)
    policy = make_policy(env.observation_dim, 2, tuple(config.hidden), rng)
    opt = None
    n = data["obs"].shape[0]
    metrics_rows, curve_steps, curve_returns = [], [], []
    for step in range(1, config.total_steps + 1):
        idx = rng.integers(0, n, size=batch_size)
        batch = {"obs": data["obs"][idx], "actions": data["actions"][idx]}
        policy, loss, opt = bc_update(policy, batch, lr, opt)
        if step % config.eval_every == 0 or step == config.total_steps:
            rate, mean_ret = _quick_success(config.env_config(), config.task_id, policy,
                                            n_episodes=5, seed=seed)
            metrics_rows.append([step, loss, rate, mean_ret])
            curve_steps.append(step)
            curve_returns.append(mean_ret)
    policy_path = os.path.join(out_dir, "policy.json")
    save_policy(policy_path, policy, _obs_layout(env), env.action_scale)
    _write_csv(os.path.join(out_dir, "metrics.csv"),
               ["step", "bc_loss", "success_rate", "mean_return"], metrics_rows)
    write_curve(os.path.join(out_dir, "curve.csv"), curve_steps, curve_returns)
    return policy_path


def train_iql_seed(config: RunConfig, seed: int, out_dir: str) -> str:
    data = _offline_data(config)
    env = make_task(config.task_id, config.env_config(), seed=seed)
    rng = np.random.default_rng(seed)
    iql_cfg = IQLConfig(**config.algo.get("iql", {}))
    iql_cfg.validate()
    batch_size = config.algo.get("batch_size", 256)
    q_nets, v_net, pi = iql_init(env.observation_dim, 2, tuple(config.hidden), iql_cfg, rng)
    n = data["obs"].shape[0]
    metrics_rows, curve_steps, curve_returns = [], [], []
    for step in range(1, config.total_steps + 1):
        idx = rng.integers(0, n, size=batch_size)
        batch = {k: data[k][idx] for k in ("obs", "actions", "rewards", "next_obs", "dones")}
        q_nets, v_net, pi, m = iql_update(q_nets, v_net, pi, batch, iql_cfg)
        if step % config.eval_every == 0 or step == config.total_steps:
            rate, mean_ret = _quick_success(config.env_config(), config.task_id, pi.policy,
                                            n_episodes=5, seed=seed)
            metrics_rows.append([step, m["v_loss"], m["q1_loss"], m["pi_loss"], rate, mean_ret])
            curve_steps.append(step)
            curve_returns.append(mean_ret)
    policy_path = os.path.join(out_dir, "policy.json")
    save_policy(policy_path, pi.policy, _obs_layout(env), env.action_scale)
    _write_csv(os.path.join(out_dir, "metrics.csv"),
               ["step", "v_loss", "q1_loss", "pi_loss", "success_rate", "mean_return"],
               metrics_rows)
    write_curve(os.path.join(out_dir, "curve.csv"), curve_steps, curve_returns)
    return policy_path


# -- SAC + HER ---------------------------------------------------------------------


def train_sac_her_seed(config: RunConfig, seed: int, out_dir: str) -> str:
    env_cfg = config.env_config()
    env = make_task(config.task_id, env_cfg, seed=seed * 10_000)
    if not env.spec.goal_conditioned:
        raise ValueError(f"sac_her requires a goal-conditioned task, not {config.task_id}")
    sac_cfg = SACConfig(**config.algo.get("sac", {}))
    sac_cfg.validate()
    if sac_cfg.target_entropy is None:
        sac_cfg.target_entropy = -float(env.action_dim)
    her_cfg = HERConfig(**config.algo.get("her", {}))
    her_cfg.validate()
    warmup = config.algo.get("warmup", 2_000)
    batch_size = config.algo.get("batch_size", 256)
    update_every = config.algo.get("update_every", 1)
    buffer = ReplayBuffer(config.algo.get("buffer_size", 1_000_000),
                          env.observation_dim, env.action_dim)

    rng = np.random.default_rng(seed)
    q_nets, pi, alpha = sac_init(env.observation_dim, env.action_dim,
                                 tuple(config.hidden), sac_cfg, rng)
    steps_done = 0
    metrics_rows, curve_steps, curve_returns = [], [], []
    finished_returns: list[float] = []
    last_metrics = {}

    while steps_done < config.total_steps:
        obs = env.reset()
        episode = []
        ep_ret = 0.0
        while True:
            if steps_done < warmup:
                a = rng.uniform(-1, 1, 2)
            else:
                a, _ = gaussian_head(pi.policy, obs, "sample", rng=rng)
                a = np.clip(a, -0.999999, 0.999999)
            r = env.step(a)
            episode.append({
                "obs": obs, "action": np.asarray(a, dtype=np.float64), "reward": r.reward,
                "next_obs": r.observation, "done": r.done and not r.info["truncated"],
                "success": r.info["success"],
                "achieved_goal": r.info.get("achieved_goal"),
                "desired_goal": r.info.get("desired_goal"),
            })
            obs = r.observation
            ep_ret += r.reward
            steps_done += 1
            if steps_done > warmup and steps_done % update_every == 0 and len(buffer) >= batch_size:
                batch = buffer.sample(batch_size, rng)
                q_nets, pi, alpha, last_metrics = sac_update(q_nets, pi, alpha, batch, sac_cfg, rng)
            if r.done or steps_done >= config.total_steps:
                break
        finished_returns.append(ep_ret)
        for tr in her_relabel(episode, her_cfg, env.spec, rng):
            buffer.add(tr["obs"], tr["action"], tr["reward"], tr["next_obs"], tr["done"])

        if len(finished_returns) % 10 == 0:
            mean_ret = float(np.mean(finished_returns[-20:]))
            metrics_rows.append([steps_done, len(finished_returns), mean_ret,
                                 last_metrics.get("q1_loss", 0.0),
                                 last_metrics.get("pi_loss", 0.0),
                                 last_metrics.get("alpha", sac_cfg.init_alpha)])
            curve_steps.append(steps_done)
            curve_returns.append(mean_ret)

    policy_path = os.path.join(out_dir, "policy.json")
    save_policy(policy_path, pi.policy, _obs_layout(env), env.action_scale)
    _write_csv(os.path.join(out_dir, "metrics.csv"),
               ["step", "episodes", "mean_return", "q1_loss", "pi_loss", "alpha"], metrics_rows)
    write_curve(os.path.join(out_dir, "curve.csv"), curve_steps, curve_returns)
    return policy_path


TRAINERS = {
    "ppo": train_ppo_seed,
    "bc": train_bc_seed,
    "iql": train_iql_seed,
    "sac_her": train_sac_her_seed,
}


def train(config: RunConfig) -> dict:
    """Run the configured algorithm for every seed; emit artifacts and a report."""
    config.validate()
    if config.algorithm in ("bc", "iql"):
        _offline_data(config)  # fail fast on a missing or empty dataset
    run_dir = os.path.join(config.output_dir, f"{config.task_id}_{config.algorithm}")
    os.makedirs(run_dir, exist_ok=True)
    config.save(os.path.join(run_dir, "run_config.json"))
    per_seed = {}
    policy_files = []
    for seed in config.seeds:
        out_dir = os.path.join(run_dir, f"seed_{seed}")
        os.makedirs(out_dir, exist_ok=True)
        policy_path = TRAINERS[config.algorithm](config, seed, out_dir)
        policy_files.append(policy_path)
        report = evaluate(policy_path, config.task_id, config.n_eval_episodes,
                          seeds=[seed], config=config.env_config())
        per_seed[str(seed)] = report.per_seed[str(seed)]
    mean = sum(per_seed.values()) / len(per_seed)
    report = {
        "task_id": config.task_id,
        "algorithm": config.algorithm,
        "per_seed": per_seed,
        "mean": mean,
        "episodes": config.n_eval_episodes,
        "policy_files": policy_files,
    }
    with open(os.path.join(run_dir, "report.json"), "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
    return report


# -- expert data collection ------------------------------------------------------


def collect_expert(
    policy_file: str,
    steps: int,
    out_dir: str,
    task_id: str | None = None,
    seed: int = 0,
    config: dict | None = None,
) -> dict:
    """Roll a trained policy greedily and write trajectory files totalling >= steps."""
    policy, doc = load_policy(policy_file)
    task = task_id or doc["obs_layout"]["task_id"]
    os.makedirs(out_dir, exist_ok=True)
    env = make_task(task, config, seed=seed)
    total = 0
    n_files = 0
    successes = 0
    while total < steps:
        success, _, ep_steps, initial_world = run_episode(env, policy, record=True)
        header = make_header(env, seed=seed, source="policy")
        path = os.path.join(out_dir, f"ep_{n_files:06d}.jsonl")
        write_trajectory(path, header, initial_world, ep_steps)
        total += len(ep_steps)
        n_files += 1
        successes += int(success)
    return {"episodes": n_files, "transitions": total, "success_rate": successes / n_files}


# -- results table -----------------------------------------------------------------


def emit_results_table(reports: list) -> tuple[str, str]:
    """Markdown and CSV with tasks as columns and algorithms as rows.

    Cells are means to one decimal; missing combinations render as '-'.
    """
    if not reports:
        raise ValueError("at least one report required")
    cells = {}
    for rep in reports:
        cells[(rep["algorithm"], rep["task_id"])] = rep["mean"]
    algos = [a for a in ALGORITHMS if any(k[0] == a for k in cells)]

    md_lines = ["| Method | " + " | ".join(TASK_IDS) + " |",
                "|---" * (len(TASK_IDS) + 1) + "|"]
    csv_lines = ["method," + ",".join(TASK_IDS)]
    for algo in algos:
        row_md, row_csv = [], []
        for task in TASK_IDS:
            val = cells.get((algo, task))
            cell = "-" if val is None else f"{val:.1f}"
            row_md.append(cell)
            row_csv.append(cell)
        md_lines.append(f"| {ALGO_LABELS[algo]} | " + " | ".join(row_md) + " |")
        csv_lines.append(ALGO_LABELS[algo] + "," + ",".join(row_csv))
    return "\n".join(md_lines) + "\n", "\n".join(csv_lines) + "\n"


def collect_reports(runs_dir: str) -> list:
    reports = []
    for root, _, files in os.walk(runs_dir):
        if "report.json" in files:
            with open(os.path.join(root, "report.json")) as f:
                reports.append(json.load(f))
    reports.sort(key=lambda r: (r["algorithm"], r["task_id"]))
    return reports
