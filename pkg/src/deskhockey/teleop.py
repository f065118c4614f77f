"""Live mouse-teleop service.

Runs the simulation loop at the control rate on a wall clock, streams world
state to WebSocket clients as JSON frames, converts normalized pointer targets
into bounded paddle actions (zero-order hold between commands, latest wins
within a control period), and records demonstration trajectories that replay
bit-exactly. One controlling client; additional clients are read-only.
"""

from __future__ import annotations

import asyncio
import json
import math
import os
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .data import make_header, write_trajectory
from .physics import DEFAULT_BOUNDS, BodyState, PhysicsParams, TableBounds
from .tasks import AirHockeyEnv, make_task, task_catalog

CONTROL_COMMANDS = ("reset", "set_task", "start_record", "stop_record", "set_seed")


@dataclass
class TeleopConfig:
    host: str = "127.0.0.1"
    port: int = 8008
    task_id: str = "Touch"
    seed: int = 0
    participant_id: str | None = None
    output_dir: str = "teleop_data"
    task: dict = field(default_factory=dict)
    physics: dict = field(default_factory=dict)
    static_dir: str | None = None

    @classmethod
    def from_file(cls, path: str) -> "TeleopConfig":
        with open(path) as f:
            return cls(**json.load(f))

    def env_config(self) -> dict:
        return {"task": dict(self.task), "physics": dict(self.physics)}


def map_target(
    raw: tuple[float, float],
    paddle: BodyState,
    physics: PhysicsParams,
    bounds: TableBounds = DEFAULT_BOUNDS,
) -> np.ndarray:
    """Normalized pointer coords -> bounded Action, matching env step semantics.

    Clamps raw to [-1,1]^2, denormalizes to table meters, clamps into the paddle
    region, and converts the displacement from the current paddle position into
    an action in [-1,1]^2 (divide by paddle_max_speed * control_dt, clip).
    """
    rx, ry = float(raw[0]), float(raw[1])
    if not (math.isfinite(rx) and math.isfinite(ry)):
        raise ValueError("invalid target")
    rx = min(max(rx, -1.0), 1.0)
    ry = min(max(ry, -1.0), 1.0)
    tx = rx * bounds.half_width
    ty = ry * bounds.half_length
    lim_x = bounds.half_width - paddle.radius
    tx = min(max(tx, -lim_x), lim_x)
    ty = min(max(ty, -bounds.half_length + paddle.radius), bounds.paddle_region_y_max)
    scale = physics.paddle_max_speed * physics.control_dt
    ax = (tx - paddle.position[0]) / scale
    ay = (ty - paddle.position[1]) / scale
    return np.array([min(max(ax, -1.0), 1.0), min(max(ay, -1.0), 1.0)])


def _body_dict(b: BodyState) -> dict:
    return {"pos": [b.position[0], b.position[1]],
            "vel": [b.velocity[0], b.velocity[1]],
            "radius": b.radius}


class TeleopHub:
    """Owns the environment and the simulation loop; sessions talk via queues."""

    def __init__(self, config: TeleopConfig):
        self.config = config
        self.env: AirHockeyEnv = make_task(config.task_id, config.env_config(), seed=config.seed)
        self.seed = config.seed
        self.commands: asyncio.Queue = asyncio.Queue()
        self.clients: dict[int, asyncio.Queue] = {}
        self.controller: int | None = None
        self._next_client_id = 1
        self.latest_target: tuple[float, float] | None = None
        self.recording = False
        self.capturing = False
        self.buffer: list = []
        self.initial_world = None
        self.episode_id = 0
        self.episode_return = 0.0
        self.last_reward = 0.0
        self.obs = None
        self.session = time.strftime("%Y%m%d-%H%M%S")
        self.file_count = 0
        self.flushed_files: list[str] = []
        self.running = True

    # -- client bookkeeping ---------------------------------------------------

    def attach(self) -> tuple[int, asyncio.Queue, str]:
        cid = self._next_client_id
        self._next_client_id += 1
        queue: asyncio.Queue = asyncio.Queue(maxsize=4)
        self.clients[cid] = queue
        role = "viewer"
        if self.controller is None:
            self.controller = cid
            role = "controller"
        return cid, queue, role

    def detach(self, cid: int) -> None:
        self.clients.pop(cid, None)
        if self.controller == cid:
            self.controller = min(self.clients) if self.clients else None
            if self.controller is not None:
                self._offer(self.clients[self.controller],
                            {"type": "role", "role": "controller"})

    @staticmethod
    def _offer(queue: asyncio.Queue, msg: dict) -> None:
        # drop the stalest frame rather than block the loop
        while True:
            try:
                queue.put_nowait(msg)
                return
            except asyncio.QueueFull:
                try:
                    queue.get_nowait()
                except asyncio.QueueEmpty:
                    return

    def broadcast(self, msg: dict) -> None:
        for queue in self.clients.values():
            self._offer(queue, msg)

    # -- commands --------------------------------------------------------------

    def handle_message(self, cid: int, msg: dict) -> dict | None:
        """Validate a client message; queue it for the loop. Returns an ack or None."""
        kind = msg.get("type")
        if kind == "target":
            if cid != self.controller:
                return {"type": "ack", "ok": False, "detail": "read-only"}
            try:
                x, y = float(msg["x"]), float(msg["y"])
            except (KeyError, TypeError, ValueError):
                return {"type": "ack", "ok": False, "detail": "invalid target"}
            if not (math.isfinite(x) and math.isfinite(y)):
                return {"type": "ack", "ok": False, "detail": "invalid target"}
            self.commands.put_nowait(("target", (x, y)))
            return None
        if kind == "control":
            if cid != self.controller:
                return {"type": "ack", "ok": False, "detail": "read-only"}
            cmd = msg.get("cmd")
            if cmd not in CONTROL_COMMANDS:
                return {"type": "ack", "ok": False,
                        "detail": f"unknown cmd; valid: {', '.join(CONTROL_COMMANDS)}"}
            self.commands.put_nowait(("control", dict(msg)))
            detail = cmd
            if cmd == "start_record":
                detail = "armed; recording begins at next reset"
            return {"type": "ack", "ok": True, "detail": detail}
        return {"type": "ack", "ok": False, "detail": "unknown message type"}

    def _apply_control(self, msg: dict) -> None:
        cmd = msg["cmd"]
        if cmd == "reset":
            self._end_episode(flush_truncated=True)
        elif cmd == "set_task":
            task_id = msg.get("task_id")
            self.env = make_task(task_id, self.config.env_config(), seed=self.seed)
            self.latest_target = None
            self._end_episode(flush_truncated=False, reset_env=False)
            self._begin_episode()
        elif cmd == "set_seed":
            self.seed = int(msg.get("seed", 0))
            self.env.seed(self.seed)
            self._end_episode(flush_truncated=True)
        elif cmd == "start_record":
            self.recording = True
            self.capturing = False  # capture begins at the next episode start
        elif cmd == "stop_record":
            if self.capturing and self.buffer:
                self._flush(truncated=True)
            self.recording = False
            self.capturing = False
            self.buffer = []

    def _begin_episode(self) -> None:
        self.obs = self.env.reset()
        self.initial_world = self.env.world
        self.episode_id += 1
        self.episode_return = 0.0
        self.last_reward = 0.0
        self.buffer = []
        self.capturing = self.recording

    def _end_episode(self, flush_truncated: bool, reset_env: bool = True) -> None:
        if self.capturing and self.buffer and flush_truncated:
            self._flush(truncated=True)
        self.buffer = []
        if reset_env:
            self._begin_episode()

    def _flush(self, truncated: bool) -> None:
        header = make_header(self.env, seed=self.seed, source="teleop_mouse",
                             participant_id=self.config.participant_id, truncated=truncated)
        os.makedirs(self.config.output_dir, exist_ok=True)
        name = f"{self.env.spec.task_id}_{self.session}_ep{self.file_count:05d}.jsonl"
        path = os.path.join(self.config.output_dir, name)
        write_trajectory(path, header, self.initial_world, self.buffer)
        self.flushed_files.append(path)
        self.file_count += 1
        self.buffer = []

    # -- simulation loop ---------------------------------------------------------

    def _drain_commands(self) -> None:
        while True:
            try:
                kind, payload = self.commands.get_nowait()
            except asyncio.QueueEmpty:
                return
            if kind == "target":
                self.latest_target = payload  # latest wins within a control period
            else:
                self._apply_control(payload)

    def tick(self) -> dict:
        """One control step: apply commands, step the env, record, build the frame."""
        self._drain_commands()
        env = self.env
        if self.latest_target is not None:
            action = map_target(self.latest_target, env.world.paddle, env.physics, env.bounds)
        else:
            action = np.zeros(2)
        prev_obs = self.obs
        result = env.step(action)
        self.obs = result.observation
        self.last_reward = result.reward
        self.episode_return += result.reward
        if self.capturing:
            self.buffer.append({
                "obs": prev_obs, "action": action, "reward": result.reward,
                "next_obs": result.observation, "done": result.done,
                "success": result.info["success"],
                "achieved_goal": result.info.get("achieved_goal"),
                "desired_goal": result.info.get("desired_goal"),
            })
        frame = {
            "type": "state",
            "tick": env.world.tick,
            "episode_id": self.episode_id,
            "task_id": env.spec.task_id,
            "paddle": _body_dict(env.world.paddle),
            "puck": _body_dict(env.world.puck),
            "objects": [_body_dict(o) for o in env.world.objects],
            "goal": None if env.ctx.goal_pos is None else {
                "pos": list(env.ctx.goal_pos),
                "vel": None if env.ctx.goal_vel is None else list(env.ctx.goal_vel),
                "radius": env.spec.goal_radius if env.spec.task_id.startswith("HitGoal")
                else env.spec.eps_position,
            },
            "reward": result.reward,
            "episode_return": self.episode_return,
            "recording": self.capturing,
            "success": result.info["success"],
            "done": result.done,
        }
        if result.done:
            if self.capturing and self.buffer:
                self._flush(truncated=False)
            self._begin_episode()
        return frame

    async def run(self) -> None:
        self._begin_episode()
        dt = self.env.physics.control_dt
        next_t = time.monotonic() + dt
        while self.running:
            frame = self.tick()
            self.broadcast(frame)
            dt = self.env.physics.control_dt
            now = time.monotonic()
            delay = next_t - now
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                next_t = now  # fell behind: re-anchor instead of bursting
            next_t += dt


def create_app(config: TeleopConfig) -> FastAPI:
    hub = TeleopHub(config)

    @asynccontextmanager
    async def lifespan(app):
        task = asyncio.create_task(hub.run())
        yield
        hub.running = False
        task.cancel()

    app = FastAPI(title="deskhockey teleop", lifespan=lifespan)
    app.state.hub = hub

    @app.get("/catalog")
    async def catalog():
        return JSONResponse(task_catalog())

    @app.websocket("/teleop")
    async def teleop_ws(ws: WebSocket):
        await ws.accept()
        cid, queue, role = hub.attach()
        await ws.send_json({
            "type": "hello", "role": role, "task_id": hub.env.spec.task_id,
            "control_dt": hub.env.physics.control_dt,
            "bounds": {"half_width": hub.env.bounds.half_width,
                       "half_length": hub.env.bounds.half_length,
                       "paddle_region_y_max": hub.env.bounds.paddle_region_y_max},
            "tasks": [t["id"] for t in task_catalog()["tasks"]],
        })

        async def sender():
            while True:
                msg = await queue.get()
                await ws.send_json(msg)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                try:
                    msg = await ws.receive_json()
                except json.JSONDecodeError:
                    await ws.send_json({"type": "ack", "ok": False, "detail": "bad json"})
                    continue
                ack = hub.handle_message(cid, msg)
                if ack is not None:
                    hub._offer(queue, ack)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            hub.detach(cid)

    if config.static_dir and os.path.isdir(config.static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")
    return app


def serve(config: TeleopConfig) -> None:
    """Run until shutdown. Port collisions surface as a startup error."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port,
                log_level="warning")


class TeleopClient:
    """Small synchronous client for scripted/headless driving and tests."""

    def __init__(self, url: str, timeout: float = 5.0):
        from websockets.sync.client import connect

        self.ws = connect(url, open_timeout=timeout)
        self.timeout = timeout
        self.hello = self.recv()

    def send(self, msg: dict) -> None:
        self.ws.send(json.dumps(msg))

    def send_target(self, x: float, y: float) -> None:
        self.send({"type": "target", "x": x, "y": y})

    def control(self, cmd: str, **kw) -> None:
        self.send({"type": "control", "cmd": cmd, **kw})

    def recv(self) -> dict:
        return json.loads(self.ws.recv(timeout=self.timeout))

    def recv_type(self, kind: str) -> dict:
        while True:
            msg = self.recv()
            if msg["type"] == kind:
                return msg

    def close(self) -> None:
        self.ws.close()
