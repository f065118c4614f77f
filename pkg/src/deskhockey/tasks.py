"""Ten air-hockey task environments behind one reset/step interface.

Tasks: Reach, ReachVelocity, Touch, Strike, StrikeCrowd, Juggle, PuckVelocity,
MoveBlock, HitGoal, HitGoalVelocity. Each environment owns a TaskSpec,
PhysicsParams, and a seeded PRNG; observations are normalized feature vectors,
actions are bounded paddle-target displacements, and rewards decompose into
named components (info carries the full breakdown).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .physics import (
    BLOCK,
    BLOCK_RADIUS,
    DEFAULT_BOUNDS,
    PADDLE,
    PADDLE_RADIUS,
    PUCK,
    PUCK_RADIUS,
    BodyState,
    PhysicsParams,
    StepEvents,
    TableBounds,
    WorldState,
    step_world,
)

TASK_IDS = (
    "Reach",
    "ReachVelocity",
    "Touch",
    "Strike",
    "StrikeCrowd",
    "Juggle",
    "PuckVelocity",
    "MoveBlock",
    "HitGoal",
    "HitGoalVelocity",
)

GOAL_TASKS = frozenset({"Reach", "ReachVelocity", "HitGoal", "HitGoalVelocity"})
VELOCITY_GOAL_TASKS = frozenset({"ReachVelocity", "HitGoalVelocity"})
DROP_TASKS = frozenset({"Touch", "Juggle", "PuckVelocity"})  # live falling puck
TERMINATE_ON_SUCCESS = frozenset({"Reach", "ReachVelocity", "Strike"})
TERMINATE_ON_ENTRY = frozenset({"HitGoal", "HitGoalVelocity"})

V_SCALE = 2.0           # velocity normalization (m/s)
PADDLE_HOME = (0.0, -0.7)
TOUCH_DEBOUNCE_STEPS = 10


def default_reward_weights() -> dict:
    return {
        "w_dist": 0.1,      # paddle-to-goal shaping (Reach tasks)
        "w_vel": 0.1,       # paddle-velocity-to-goal shaping (ReachVelocity)
        "w_puck": 0.1,      # paddle-to-puck shaping (contact tasks)
        "bonus": 1.0,       # success / per-event bonus
        "w_spread": 1.0,    # crowd spread gain
        "spread_min": 0.04,  # crowd success threshold (mean pairwise gain, m)
        "w_goal_dist": 1.0,  # HitGoalVelocity entry terms
        "w_goal_cos": 0.5,
        "w_goal_mag": 0.5,
    }


@dataclass
class TaskSpec:
    task_id: str
    episode_limit: int = 200
    eps_position: float = 0.02
    eps_velocity: float = 0.1
    v_min_strike: float = 0.5
    v_min_up: float = 0.5
    juggle_rise: float = 0.3
    juggle_hits_success: int = 4
    block_move_min: float = 0.05
    goal_radius: float = 0.08
    goal_speed: float = 0.6
    reward_weights: dict = field(default_factory=default_reward_weights)
    reg_lambda: float = 0.1
    goal_conditioned: bool = False
    n_blocks: int = 0

    def validate(self) -> None:
        if self.task_id not in TASK_IDS:
            raise ValueError(f"unknown task_id {self.task_id!r}; valid ids: {', '.join(TASK_IDS)}")
        if self.episode_limit < 1:
            raise ValueError("episode_limit must be >= 1")
        for name in ("eps_position", "eps_velocity", "v_min_strike", "v_min_up",
                     "juggle_rise", "block_move_min", "goal_radius", "goal_speed"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.juggle_hits_success < 1:
            raise ValueError("juggle_hits_success must be >= 1")
        if self.goal_conditioned != (self.task_id in GOAL_TASKS):
            raise ValueError(f"goal_conditioned must be {self.task_id in GOAL_TASKS} for {self.task_id}")
        if self.n_blocks < 0:
            raise ValueError("n_blocks must be >= 0")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "episode_limit": self.episode_limit,
            "eps_position": self.eps_position,
            "eps_velocity": self.eps_velocity,
            "v_min_strike": self.v_min_strike,
            "v_min_up": self.v_min_up,
            "juggle_rise": self.juggle_rise,
            "juggle_hits_success": self.juggle_hits_success,
            "block_move_min": self.block_move_min,
            "goal_radius": self.goal_radius,
            "goal_speed": self.goal_speed,
            "reward_weights": dict(sorted(self.reward_weights.items())),
            "reg_lambda": self.reg_lambda,
            "goal_conditioned": self.goal_conditioned,
            "n_blocks": self.n_blocks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        spec = cls(**d)
        spec.validate()
        return spec


def default_task_spec(task_id: str) -> TaskSpec:
    if task_id not in TASK_IDS:
        raise ValueError(f"unknown task_id {task_id!r}; valid ids: {', '.join(TASK_IDS)}")
    spec = TaskSpec(task_id=task_id, goal_conditioned=task_id in GOAL_TASKS)
    if task_id == "Juggle":
        spec.episode_limit = 400
    if task_id == "StrikeCrowd":
        spec.n_blocks = 6
    elif task_id == "MoveBlock":
        spec.n_blocks = 1
    return spec


def default_physics(task_id: str) -> PhysicsParams:
    params = PhysicsParams()
    if task_id not in DROP_TASKS:
        # Stationary-puck and reach tasks run the table flat so the puck (and the
        # parked puck of the Reach tasks) stays put until struck.
        params.tilt_deg = 0.0
    return params


def make_task(task_id: str, config: dict | None = None, seed: int = 0) -> "AirHockeyEnv":
    """Build a seeded task environment; identical arguments behave identically."""
    spec = default_task_spec(task_id)
    physics = default_physics(task_id)
    if config:
        for key, value in (config.get("task") or {}).items():
            if not hasattr(spec, key):
                raise ValueError(f"unknown task override {key!r}")
            setattr(spec, key, value)
        for key, value in (config.get("physics") or {}).items():
            if not hasattr(physics, key):
                raise ValueError(f"unknown physics override {key!r}")
            setattr(physics, key, value)
    spec.validate()
    physics.validate()
    return AirHockeyEnv(spec, physics, seed=seed)


def config_hash(physics: PhysicsParams, spec: TaskSpec) -> str:
    blob = json.dumps([physics.to_dict(), spec.to_dict()], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def observation_dim(spec: TaskSpec) -> int:
    dim = 8
    if spec.goal_conditioned:
        dim += 4 if spec.task_id in VELOCITY_GOAL_TASKS else 2
    dim += 2 * spec.n_blocks
    return dim


def goal_dim(spec: TaskSpec) -> int:
    if not spec.goal_conditioned:
        return 0
    return 4 if spec.task_id in VELOCITY_GOAL_TASKS else 2


def goal_slice(spec: TaskSpec) -> slice:
    """Position of the goal block inside the observation vector."""
    return slice(8, 8 + goal_dim(spec))


def observe(
    spec: TaskSpec,
    world: WorldState,
    goal_pos: tuple[float, float] | None = None,
    goal_vel: tuple[float, float] | None = None,
    bounds: TableBounds = DEFAULT_BOUNDS,
) -> np.ndarray:
    """Fixed per-task feature layout: paddle, puck, goal block, per-block positions.

    Positions are normalized by the table half extents, velocities by V_SCALE.
    """
    hw, hl = bounds.half_width, bounds.half_length
    pad, puck = world.paddle, world.puck
    out = [
        pad.position[0] / hw, pad.position[1] / hl,
        pad.velocity[0] / V_SCALE, pad.velocity[1] / V_SCALE,
        puck.position[0] / hw, puck.position[1] / hl,
        puck.velocity[0] / V_SCALE, puck.velocity[1] / V_SCALE,
    ]
    if spec.goal_conditioned:
        if goal_pos is None:
            raise ValueError("goal_conditioned task requires a goal")
        out += [goal_pos[0] / hw, goal_pos[1] / hl]
        if spec.task_id in VELOCITY_GOAL_TASKS:
            gv = goal_vel if goal_vel is not None else (0.0, 0.0)
            out += [gv[0] / V_SCALE, gv[1] / V_SCALE]
    for obj in world.objects:
        out += [obj.position[0] / hw, obj.position[1] / hl]
    return np.array(out, dtype=np.float64)


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


@dataclass
class EpisodeContext:
    """Per-episode accumulator: everything task_reward/task_success need."""

    tick: int = 0
    prev_action: tuple[float, float] | None = None
    touch_count: int = 0
    last_touch_tick: int = -(10**9)
    in_contact: bool = False
    contact_occurred: bool = False
    juggle_pending_y: float | None = None
    juggle_hits: int = 0
    strike_met: bool = False
    puckvel_met: bool = False
    block_moved: bool = False
    spread_met: bool = False
    reach_met: bool = False
    goal_entered: bool = False
    entry_speed_ok: bool = False
    entry_cos_ok: bool = False
    spread0: float = 0.0
    block_init: list = field(default_factory=list)
    goal_pos: tuple[float, float] | None = None
    goal_vel: tuple[float, float] | None = None
    success: bool = False


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def mean_pairwise_distance(positions: list) -> float:
    n = len(positions)
    if n < 2:
        return 0.0
    total = 0.0
    for i in range(n):
        for k in range(i + 1, n):
            total += _dist(positions[i], positions[k])
    return total / (n * (n - 1) / 2)


def cosine(u: tuple[float, float], v: tuple[float, float]) -> float:
    nu = math.hypot(u[0], u[1])
    nv = math.hypot(v[0], v[1])
    if nu < 1e-12 or nv < 1e-12:
        return 0.0
    c = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return max(-1.0, min(1.0, c))


def goal_entry_components(
    spec: TaskSpec,
    achieved: tuple,
    goal_pos: tuple[float, float],
    goal_vel: tuple[float, float] | None,
) -> tuple[dict, bool, bool]:
    """Entry-event reward terms for the hit-into-goal tasks, from an achieved goal.

    achieved is (x, y) or (x, y, vx, vy). Returns (components, speed_ok, cos_ok);
    shared with hindsight relabeling so recomputed rewards match the live env.
    """
    w = spec.reward_weights
    if spec.task_id == "HitGoal":
        return {"bonus": w["bonus"]}, True, True
    d = _dist((achieved[0], achieved[1]), goal_pos)
    vp = (achieved[2], achieved[3])
    vg = goal_vel if goal_vel is not None else (0.0, 0.0)
    cos = cosine(vp, vg)
    mag_diff = abs(math.hypot(*vp) - math.hypot(*vg))
    comps = {
        "goal_enter_dist": w["w_goal_dist"] * (-d),
        "goal_enter_cos": w["w_goal_cos"] * cos,
        "goal_enter_mag": w["w_goal_mag"] * (-mag_diff),
    }
    return comps, mag_diff <= spec.eps_velocity, cos >= 0.9


def task_reward(
    spec: TaskSpec,
    prev_world: WorldState,
    world: WorldState,
    events: StepEvents,
    ctx: EpisodeContext,
) -> tuple[float, dict]:
    """One control step of task reward; updates the episode context in place.

    Excludes the action regularization term, which the env adds on top.
    """
    w = spec.reward_weights
    comps: dict = {}
    pad = world.paddle.position
    puck = world.puck.position
    task = spec.task_id

    contact = events.paddle_puck_contacts > 0
    touch_event = (
        contact
        and not ctx.in_contact
        and (ctx.tick - ctx.last_touch_tick) >= TOUCH_DEBOUNCE_STEPS
    )
    if touch_event:
        ctx.touch_count += 1
        ctx.last_touch_tick = ctx.tick
    ctx.in_contact = contact
    ctx.contact_occurred = ctx.contact_occurred or contact

    if task not in ("Reach", "ReachVelocity"):
        comps["puck_dist"] = w["w_puck"] * (-_dist(pad, puck))

    if task in ("Reach", "ReachVelocity"):
        d = _dist(pad, ctx.goal_pos)
        comps["goal_dist"] = w["w_dist"] * (-d)
        met = d <= spec.eps_position
        if task == "ReachVelocity":
            dv = _dist(world.paddle.velocity, ctx.goal_vel)
            comps["goal_vel"] = w["w_vel"] * (-dv)
            met = met and dv <= spec.eps_velocity
        if met and not ctx.reach_met:
            ctx.reach_met = True
            comps["bonus"] = w["bonus"]
    elif task == "Touch":
        if touch_event:
            comps["touch"] = w["bonus"]
    elif task == "Strike":
        speed = math.hypot(*world.puck.velocity)
        if ctx.contact_occurred and speed >= spec.v_min_strike and not ctx.strike_met:
            ctx.strike_met = True
            comps["bonus"] = w["bonus"]
    elif task == "StrikeCrowd":
        spread = mean_pairwise_distance([o.position for o in world.objects])
        gain = spread - ctx.spread0
        comps["spread"] = w["w_spread"] * gain
        if gain >= w["spread_min"]:
            ctx.spread_met = True
    elif task == "Juggle":
        if ctx.juggle_pending_y is not None and puck[1] - ctx.juggle_pending_y >= spec.juggle_rise:
            ctx.juggle_hits += 1
            comps["juggle"] = w["bonus"]
            ctx.juggle_pending_y = None
        if touch_event:
            ctx.juggle_pending_y = puck[1]
    elif task == "PuckVelocity":
        if ctx.contact_occurred and world.puck.velocity[1] >= spec.v_min_up and not ctx.puckvel_met:
            ctx.puckvel_met = True
            comps["bonus"] = w["bonus"]
    elif task == "MoveBlock":
        moved = any(
            _dist(o.position, init) >= spec.block_move_min
            for o, init in zip(world.objects, ctx.block_init)
        )
        if moved and not ctx.block_moved:
            ctx.block_moved = True
            comps["bonus"] = w["bonus"]
    elif task in ("HitGoal", "HitGoalVelocity"):
        if not ctx.goal_entered and _dist(puck, ctx.goal_pos) <= spec.goal_radius:
            ctx.goal_entered = True
            achieved = (
                puck[0], puck[1], world.puck.velocity[0], world.puck.velocity[1],
            ) if task == "HitGoalVelocity" else puck
            entry, speed_ok, cos_ok = goal_entry_components(spec, achieved, ctx.goal_pos, ctx.goal_vel)
            comps.update(entry)
            ctx.entry_speed_ok = speed_ok
            ctx.entry_cos_ok = cos_ok

    return sum(comps.values()), comps


def task_success(spec: TaskSpec, ctx: EpisodeContext) -> bool:
    """Episode-level success predicate over the accumulated context."""
    task = spec.task_id
    if task in ("Reach", "ReachVelocity"):
        return ctx.reach_met
    if task == "Touch":
        return ctx.touch_count >= 1
    if task == "Strike":
        return ctx.strike_met
    if task == "StrikeCrowd":
        return ctx.spread_met
    if task == "Juggle":
        return ctx.juggle_hits >= spec.juggle_hits_success
    if task == "PuckVelocity":
        return ctx.puckvel_met
    if task == "MoveBlock":
        return ctx.block_moved
    if task == "HitGoal":
        return ctx.goal_entered
    if task == "HitGoalVelocity":
        return ctx.goal_entered and ctx.entry_speed_ok and ctx.entry_cos_ok
    raise ValueError(f"unknown task_id {task!r}")


class AirHockeyEnv:
    """Single-owner task environment; sendable between threads, never shared."""

    def __init__(
        self,
        spec: TaskSpec,
        physics: PhysicsParams | None = None,
        seed: int = 0,
        bounds: TableBounds = DEFAULT_BOUNDS,
    ):
        spec.validate()
        self.spec = spec
        self.physics = physics or default_physics(spec.task_id)
        self.physics.validate()
        self.bounds = bounds
        self.rng = np.random.default_rng(seed)
        self.world: WorldState | None = None
        self.ctx = EpisodeContext()
        self._done = True

    # -- identity ------------------------------------------------------------

    @property
    def observation_dim(self) -> int:
        return observation_dim(self.spec)

    @property
    def action_dim(self) -> int:
        return 2

    @property
    def action_scale(self) -> float:
        return self.physics.paddle_max_speed * self.physics.control_dt

    def config_hash(self) -> str:
        return config_hash(self.physics, self.spec)

    def seed(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    # -- episode lifecycle -----------------------------------------------------

    def reset(self) -> np.ndarray:
        """Start a new episode: snapshot the PRNG, sample placements and goal."""
        rng_snapshot = dict(self.rng.bit_generator.state)
        spec, b = self.spec, self.bounds
        task = spec.task_id

        paddle = BodyState(PADDLE_HOME, (0.0, 0.0), PADDLE_RADIUS, self.physics.paddle_mass, PADDLE)

        # Canonical draw order: puck, blocks, goal (replay relies on it).
        if task in DROP_TASKS:
            x = float(self.rng.uniform(-0.22, 0.22))
            vx = float(self.rng.uniform(-0.3, 0.3))
            vy = float(self.rng.uniform(-1.0, -0.4))
            puck = BodyState((x, 0.72), (vx, vy), PUCK_RADIUS, self.physics.puck_mass, PUCK)
        elif task in ("Reach", "ReachVelocity"):
            park = (0.0, b.half_length - PUCK_RADIUS - 0.01)
            puck = BodyState(park, (0.0, 0.0), PUCK_RADIUS, self.physics.puck_mass, PUCK)
        else:
            x = float(self.rng.uniform(-0.18, 0.18))
            y = float(self.rng.uniform(-0.55, -0.42))
            puck = BodyState((x, y), (0.0, 0.0), PUCK_RADIUS, self.physics.puck_mass, PUCK)

        objects: list[BodyState] = []
        if task == "StrikeCrowd" and spec.n_blocks > 0:
            cx = float(self.rng.uniform(-0.08, 0.08))
            spacing = 0.072
            row, placed, base_y = 0, 0, 0.12
            while placed < spec.n_blocks:
                count = row + 1
                y = base_y + row * spacing * 0.87
                for i in range(count):
                    if placed >= spec.n_blocks:
                        break
                    x = cx + (i - (count - 1) / 2.0) * spacing
                    objects.append(BodyState((x, y), (0.0, 0.0), BLOCK_RADIUS,
                                             self.physics.object_mass, BLOCK))
                    placed += 1
                row += 1
        elif task == "MoveBlock":
            for _ in range(spec.n_blocks):
                dx = float(self.rng.uniform(-0.06, 0.06))
                dy = float(self.rng.uniform(0.40, 0.55))
                bx = min(max(puck.position[0] + dx, -b.half_width + BLOCK_RADIUS),
                         b.half_width - BLOCK_RADIUS)
                objects.append(BodyState((bx, puck.position[1] + dy), (0.0, 0.0),
                                         BLOCK_RADIUS, self.physics.object_mass, BLOCK))

        goal_pos = goal_vel = None
        if task in ("Reach", "ReachVelocity"):
            margin = PADDLE_RADIUS + 0.01
            gx = float(self.rng.uniform(-(b.half_width - margin), b.half_width - margin))
            gy = float(self.rng.uniform(-b.half_length + margin, b.paddle_region_y_max - 0.01))
            goal_pos = (gx, gy)
        elif task in ("HitGoal", "HitGoalVelocity"):
            gr = spec.goal_radius
            gx = float(self.rng.uniform(-(b.half_width - gr), b.half_width - gr))
            gy = float(self.rng.uniform(gr, b.half_length - gr))
            goal_pos = (gx, gy)
        if task in VELOCITY_GOAL_TASKS:
            angle = float(self.rng.uniform(0.0, 2.0 * math.pi))
            mag = float(self.rng.uniform(0.3, 1.0)) * 2.0 * spec.goal_speed
            goal_vel = (mag * math.cos(angle), mag * math.sin(angle))

        self.world = WorldState(tick=0, paddle=paddle, puck=puck, objects=objects,
                                rng_state=rng_snapshot)
        self.ctx = EpisodeContext(
            goal_pos=goal_pos,
            goal_vel=goal_vel,
            block_init=[o.position for o in objects],
            spread0=mean_pairwise_distance([o.position for o in objects]),
        )
        self._done = False
        return self.observe()

    def reset_from_world(self, world: WorldState) -> np.ndarray:
        """Replay path: restore the PRNG snapshot and re-run reset sampling."""
        if world.rng_state is None:
            raise ValueError("world has no rng_state; cannot replay")
        self.rng.bit_generator.state = world.rng_state
        return self.reset()

    def observe(self, world: WorldState | None = None) -> np.ndarray:
        w = world if world is not None else self.world
        return observe(self.spec, w, self.ctx.goal_pos, self.ctx.goal_vel, self.bounds)

    def achieved_goal(self) -> list | None:
        if not self.spec.goal_conditioned:
            return None
        task = self.spec.task_id
        body = self.world.paddle if task in ("Reach", "ReachVelocity") else self.world.puck
        out = [body.position[0], body.position[1]]
        if task in VELOCITY_GOAL_TASKS:
            out += [body.velocity[0], body.velocity[1]]
        return out

    def desired_goal(self) -> list | None:
        if not self.spec.goal_conditioned:
            return None
        out = [self.ctx.goal_pos[0], self.ctx.goal_pos[1]]
        if self.spec.task_id in VELOCITY_GOAL_TASKS:
            out += [self.ctx.goal_vel[0], self.ctx.goal_vel[1]]
        return out

    def step(self, action) -> StepResult:
        if self._done:
            raise RuntimeError("episode done; reset required")
        spec, ctx = self.spec, self.ctx
        ax = min(max(float(action[0]), -1.0), 1.0)
        ay = min(max(float(action[1]), -1.0), 1.0)

        scale = self.action_scale
        pad = self.world.paddle.position
        target = (pad[0] + ax * scale, pad[1] + ay * scale)
        prev_world = self.world
        world, events = step_world(prev_world, target, self.physics, self.bounds)
        self.world = world

        base, comps = task_reward(spec, prev_world, world, events, ctx)
        if ctx.prev_action is not None:
            dx = ax - ctx.prev_action[0]
            dy = ay - ctx.prev_action[1]
            comps["action_reg"] = -spec.reg_lambda * (dx * dx + dy * dy)
        else:
            comps["action_reg"] = 0.0
        ctx.prev_action = (ax, ay)
        reward = float(sum(comps.values()))

        ctx.tick += 1
        ctx.success = ctx.success or task_success(spec, ctx)

        task = spec.task_id
        terminal = (task in TERMINATE_ON_SUCCESS and ctx.success) or (
            task in TERMINATE_ON_ENTRY and ctx.goal_entered
        )
        truncated = not terminal and ctx.tick >= spec.episode_limit
        done = terminal or truncated
        self._done = done

        info = {
            "success": ctx.success,
            "components": comps,
            "events": events.summary(),
            "truncated": truncated,
        }
        if spec.goal_conditioned:
            info["achieved_goal"] = self.achieved_goal()
            info["desired_goal"] = self.desired_goal()
        return StepResult(self.observe(), reward, done, info)


def task_catalog() -> dict:
    """Machine-readable task catalog for the harness and the UI."""
    tasks = []
    for task_id in TASK_IDS:
        spec = default_task_spec(task_id)
        physics = default_physics(task_id)
        tasks.append({
            "id": task_id,
            "observation_dim": observation_dim(spec),
            "action_dim": 2,
            "episode_limit": spec.episode_limit,
            "goal_conditioned": spec.goal_conditioned,
            "n_blocks": spec.n_blocks,
            "tilt_deg": physics.tilt_deg,
            "thresholds": {
                "eps_position": spec.eps_position,
                "eps_velocity": spec.eps_velocity,
                "v_min_strike": spec.v_min_strike,
                "v_min_up": spec.v_min_up,
                "juggle_rise": spec.juggle_rise,
                "juggle_hits_success": spec.juggle_hits_success,
                "block_move_min": spec.block_move_min,
                "goal_radius": spec.goal_radius,
                "goal_speed": spec.goal_speed,
            },
            "reward_components": sorted(spec.reward_weights.keys()) + ["action_reg"],
        })
    return {"version": 1, "tasks": tasks}
