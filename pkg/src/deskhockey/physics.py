"""Deterministic fixed-substep 2D disk physics on a tilted, bounded air-hockey table.

All quantities are SI (meters, kilograms, seconds). The coordinate origin is the
table center, +y points up-table (away from the paddle home), and the tilt
component of gravity acts along -y so a free puck slides back toward the paddle.
Bodies are non-spinning disks; the paddle is kinematic (infinite collision mass)
and tracks a commanded target with bounded speed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

INCH = 0.0254

# Table geometry: 66 in x 24 in workspace, 3.75 in paddle, 2.5 in puck.
HALF_WIDTH = 12.0 * INCH          # 0.3048 m, x extent
HALF_LENGTH = 33.0 * INCH         # 0.8382 m, y extent
PADDLE_RADIUS = 3.75 / 2.0 * INCH  # 0.047625 m
PUCK_RADIUS = 2.5 / 2.0 * INCH     # 0.03175 m
BLOCK_RADIUS = 0.03

# Paddle operates in the lowest 0.4 m band of the table.
PADDLE_REGION_Y_MAX = -(HALF_LENGTH - 0.4)  # -0.4382 m

# First-order tracking rate of the paddle toward its clamped target (1/s).
# Emulates robot compliance; keeps contact speeds finite instead of teleporting.
TRACK_RATE = 20.0

PADDLE = "paddle"
PUCK = "puck"
BLOCK = "block"

PENETRATION_TOL = 1e-6


@dataclass
class PhysicsParams:
    """Tunable world parameters; defaults are plausible desk-scale air-table values."""

    puck_mass: float = 0.025
    paddle_mass: float = 0.16     # unused while the paddle is kinematic
    object_mass: float = 0.05
    restitution_paddle_puck: float = 0.9
    restitution_wall: float = 0.85
    restitution_puck_object: float = 0.6
    puck_damping: float = 0.12    # linear damping, 1/s
    block_damping: float = 2.0    # blocks settle quickly after being hit
    tilt_deg: float = 5.5
    gravity: float = 9.81
    paddle_max_speed: float = 2.0
    control_dt: float = 0.05      # 20 Hz control
    substeps: int = 10
    tangential_friction: float = 0.0

    def validate(self) -> None:
        if self.puck_mass <= 0 or self.paddle_mass <= 0 or self.object_mass <= 0:
            raise ValueError("all masses must be > 0")
        for name in ("restitution_paddle_puck", "restitution_wall", "restitution_puck_object"):
            e = getattr(self, name)
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {e}")
        if not 0.0 <= self.tangential_friction <= 1.0:
            raise ValueError(f"tangential_friction must be in [0, 1], got {self.tangential_friction}")
        if self.control_dt <= 0:
            raise ValueError("control_dt must be > 0")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.paddle_max_speed <= 0:
            raise ValueError("paddle_max_speed must be > 0")

    def to_dict(self) -> dict:
        return {
            "puck_mass": self.puck_mass,
            "paddle_mass": self.paddle_mass,
            "object_mass": self.object_mass,
            "restitution_paddle_puck": self.restitution_paddle_puck,
            "restitution_wall": self.restitution_wall,
            "restitution_puck_object": self.restitution_puck_object,
            "puck_damping": self.puck_damping,
            "block_damping": self.block_damping,
            "tilt_deg": self.tilt_deg,
            "gravity": self.gravity,
            "paddle_max_speed": self.paddle_max_speed,
            "control_dt": self.control_dt,
            "substeps": self.substeps,
            "tangential_friction": self.tangential_friction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhysicsParams":
        p = cls(**d)
        p.validate()
        return p


@dataclass
class TableBounds:
    half_width: float = HALF_WIDTH
    half_length: float = HALF_LENGTH
    paddle_region_y_max: float = PADDLE_REGION_Y_MAX

    def validate(self) -> None:
        if self.half_width <= 0 or self.half_length <= 0:
            raise ValueError("table half extents must be > 0")
        if not -self.half_length <= self.paddle_region_y_max <= self.half_length:
            raise ValueError("paddle_region_y_max outside table")


DEFAULT_BOUNDS = TableBounds()


@dataclass
class BodyState:
    position: tuple[float, float]
    velocity: tuple[float, float]
    radius: float
    mass: float
    kind: str = PUCK

    def to_dict(self) -> dict:
        return {
            "position": [self.position[0], self.position[1]],
            "velocity": [self.velocity[0], self.velocity[1]],
            "radius": self.radius,
            "mass": self.mass,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BodyState":
        return cls(
            position=(float(d["position"][0]), float(d["position"][1])),
            velocity=(float(d["velocity"][0]), float(d["velocity"][1])),
            radius=float(d["radius"]),
            mass=float(d["mass"]),
            kind=str(d["kind"]),
        )


@dataclass
class WorldState:
    """The simulator's single source of truth. A value: copy freely, no interior sharing."""

    tick: int
    paddle: BodyState
    puck: BodyState
    objects: list[BodyState] = field(default_factory=list)
    rng_state: dict | None = None

    def to_dict(self) -> dict:
        # Canonical key order: tick, paddle, puck, objects, rng_state.
        return {
            "tick": self.tick,
            "paddle": self.paddle.to_dict(),
            "puck": self.puck.to_dict(),
            "objects": [o.to_dict() for o in self.objects],
            "rng_state": self.rng_state,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "WorldState":
        return cls(
            tick=int(d["tick"]),
            paddle=BodyState.from_dict(d["paddle"]),
            puck=BodyState.from_dict(d["puck"]),
            objects=[BodyState.from_dict(o) for o in d["objects"]],
            rng_state=d.get("rng_state"),
        )

    @classmethod
    def from_json(cls, s: str) -> "WorldState":
        return cls.from_dict(json.loads(s))


@dataclass
class StepEvents:
    paddle_puck_contacts: int = 0
    puck_object_contacts: list[int] = field(default_factory=list)
    wall_contacts: int = 0
    contact_points: list[tuple[tuple[float, float], float]] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "paddle_puck_contacts": self.paddle_puck_contacts,
            "puck_object_contacts": list(self.puck_object_contacts),
            "wall_contacts": self.wall_contacts,
        }


def _inv_mass(body: BodyState) -> float:
    # Kinematic paddle: infinite-mass limit for collision purposes.
    return 0.0 if body.kind == PADDLE else 1.0 / body.mass


def resolve_disk_collision(
    a: BodyState, b: BodyState, e: float, tangential_friction: float = 0.0
) -> tuple[BodyState, BodyState]:
    """Impulse resolution of a disk-disk contact.

    Applies the normal impulse j = -(1+e) * v_rel.n / (1/m_a + 1/m_b) equally and
    oppositely, scales each body's tangential velocity by (1 - tangential_friction),
    and separates overlapping disks along the normal in proportion to inverse mass.
    A non-closing contact is a no-op.
    """
    inv_a = _inv_mass(a)
    inv_b = _inv_mass(b)
    inv_sum = inv_a + inv_b
    if inv_sum == 0.0:
        raise ValueError("both bodies static")

    dx = a.position[0] - b.position[0]
    dy = a.position[1] - b.position[1]
    dist = math.sqrt(dx * dx + dy * dy)
    if dist > 0.0:
        nx, ny = dx / dist, dy / dist
    else:
        nx, ny = 0.0, 1.0  # coincident centers: deterministic tie-break

    rel_n = (a.velocity[0] - b.velocity[0]) * nx + (a.velocity[1] - b.velocity[1]) * ny
    if rel_n >= 0.0:
        return a, b  # separating or resting: no-op

    j = -(1.0 + e) * rel_n / inv_sum
    avx = a.velocity[0] + j * inv_a * nx
    avy = a.velocity[1] + j * inv_a * ny
    bvx = b.velocity[0] - j * inv_b * nx
    bvy = b.velocity[1] - j * inv_b * ny

    if tangential_friction != 0.0:
        tx, ty = -ny, nx
        keep = 1.0 - tangential_friction
        an, at = avx * nx + avy * ny, (avx * tx + avy * ty) * keep
        bn, bt = bvx * nx + bvy * ny, (bvx * tx + bvy * ty) * keep
        avx, avy = an * nx + at * tx, an * ny + at * ty
        bvx, bvy = bn * nx + bt * tx, bn * ny + bt * ty

    overlap = (a.radius + b.radius) - dist
    apx, apy = a.position
    bpx, bpy = b.position
    if overlap > 0.0:
        push_a = overlap * inv_a / inv_sum
        push_b = overlap * inv_b / inv_sum
        apx += nx * push_a
        apy += ny * push_a
        bpx -= nx * push_b
        bpy -= ny * push_b

    a2 = replace(a, position=(apx, apy), velocity=(avx, avy))
    b2 = replace(b, position=(bpx, bpy), velocity=(bvx, bvy))
    return a2, b2


def resolve_wall_contact(
    b: BodyState, bounds: TableBounds, e: float, tangential_friction: float = 0.0
) -> BodyState:
    """Reflect a body off the table walls; a fully interior body is returned unchanged."""
    px, py, vx, vy, _ = _wall_resolve(
        b.position[0], b.position[1], b.velocity[0], b.velocity[1],
        b.radius, bounds.half_width, bounds.half_length, e, tangential_friction,
    )
    if (px, py) == b.position and (vx, vy) == b.velocity:
        return b
    return replace(b, position=(px, py), velocity=(vx, vy))


def _wall_resolve(px, py, vx, vy, radius, half_w, half_l, e, tf):
    """Clamp a disk inside the walls, reflecting the outward normal velocity.

    Returns (px, py, vx, vy, hits). Velocity is reflected only when moving
    outward; the tangential component is scaled by (1 - tf) on each hit.
    """
    hits = 0
    keep = 1.0 - tf
    lim_x = half_w - radius
    lim_y = half_l - radius
    if px >= lim_x:
        px = lim_x
        if vx > 0.0:
            vx = -e * vx
            vy *= keep
            hits += 1
    elif px <= -lim_x:
        px = -lim_x
        if vx < 0.0:
            vx = -e * vx
            vy *= keep
            hits += 1
    if py >= lim_y:
        py = lim_y
        if vy > 0.0:
            vy = -e * vy
            vx *= keep
            hits += 1
    elif py <= -lim_y:
        py = -lim_y
        if vy < 0.0:
            vy = -e * vy
            vx *= keep
            hits += 1
    return px, py, vx, vy, hits


def clamp_paddle_target(
    tx: float, ty: float, radius: float, bounds: TableBounds
) -> tuple[float, float]:
    lim_x = bounds.half_width - radius
    tx = -lim_x if tx < -lim_x else (lim_x if tx > lim_x else tx)
    lo_y = -bounds.half_length + radius
    hi_y = bounds.paddle_region_y_max
    ty = lo_y if ty < lo_y else (hi_y if ty > hi_y else ty)
    return tx, ty


def paddle_track(
    paddle: BodyState,
    target: tuple[float, float],
    params: PhysicsParams,
    dt: float,
    bounds: TableBounds = DEFAULT_BOUNDS,
) -> BodyState:
    """Move the paddle one increment of dt toward a clamped target.

    First-order exponential tracking at TRACK_RATE, with the per-increment
    displacement additionally clamped to paddle_max_speed * dt. The paddle
    velocity is set to displacement / dt and it never exits the paddle region.
    """
    if not (math.isfinite(target[0]) and math.isfinite(target[1])):
        raise ValueError("invalid target")
    tx, ty = clamp_paddle_target(target[0], target[1], paddle.radius, bounds)
    frac = 1.0 - math.exp(-dt * TRACK_RATE)
    sx = (tx - paddle.position[0]) * frac
    sy = (ty - paddle.position[1]) * frac
    max_step = params.paddle_max_speed * dt
    step = math.sqrt(sx * sx + sy * sy)
    if step > max_step:
        scale = max_step / step
        sx *= scale
        sy *= scale
    px = paddle.position[0] + sx
    py = paddle.position[1] + sy
    px, py = clamp_paddle_target(px, py, paddle.radius, bounds)
    return replace(paddle, position=(px, py), velocity=(sx / dt, sy / dt))


def _check_finite(tag: str, px, py, vx, vy) -> None:
    if not (math.isfinite(px) and math.isfinite(py) and math.isfinite(vx) and math.isfinite(vy)):
        raise ValueError(f"numerical divergence in {tag}")


def step_world(
    world: WorldState,
    paddle_target: tuple[float, float],
    params: PhysicsParams,
    bounds: TableBounds = DEFAULT_BOUNDS,
) -> tuple[WorldState, StepEvents]:
    """Advance one control step (params.substeps sub-integrations of control_dt/substeps).

    Each substep: paddle tracking, semi-implicit Euler on the puck (tilt gravity
    along -y plus linear damping) and on blocks (damping only: blocks are
    quasistatic and move only when struck), then collision resolution in a fixed
    canonical order: paddle-puck, puck-object by index, object-object
    lexicographic, walls. Bit-deterministic for identical inputs.
    """
    if not (math.isfinite(paddle_target[0]) and math.isfinite(paddle_target[1])):
        raise ValueError("invalid target")

    ev = StepEvents()
    dt = params.control_dt / params.substeps
    g_eff = params.gravity * math.sin(math.radians(params.tilt_deg))
    frac = 1.0 - math.exp(-dt * TRACK_RATE)
    max_step = params.paddle_max_speed * dt
    e_pp = params.restitution_paddle_puck
    e_wall = params.restitution_wall
    e_po = params.restitution_puck_object
    tf = params.tangential_friction
    keep = 1.0 - tf
    half_w = bounds.half_width
    half_l = bounds.half_length

    pad = world.paddle
    puck = world.puck
    ppx, ppy = pad.position
    pvx, pvy = pad.velocity
    pr = pad.radius
    ux, uy = puck.position
    uvx, uvy = puck.velocity
    ur = puck.radius
    objs = [[o.position[0], o.position[1], o.velocity[0], o.velocity[1], o.radius, o.mass] for o in world.objects]
    n_obj = len(objs)

    tx, ty = clamp_paddle_target(paddle_target[0], paddle_target[1], pr, bounds)
    r_pp = pr + ur
    puck_inv = 1.0 / puck.mass
    puck_damp = params.puck_damping
    block_damp = params.block_damping

    for _ in range(params.substeps):
        # Paddle: exponential tracking with speed clamp; region enforced by target clamp.
        sx = (tx - ppx) * frac
        sy = (ty - ppy) * frac
        step = math.sqrt(sx * sx + sy * sy)
        if step > max_step:
            s = max_step / step
            sx *= s
            sy *= s
        ppx += sx
        ppy += sy
        pvx = sx / dt
        pvy = sy / dt

        # Puck: semi-implicit Euler, tilt gravity along -y plus linear damping.
        uvx += -puck_damp * uvx * dt
        uvy += (-g_eff - puck_damp * uvy) * dt
        ux += uvx * dt
        uy += uvy * dt

        # Blocks: damping only; they settle after being struck.
        for o in objs:
            o[2] += -block_damp * o[2] * dt
            o[3] += -block_damp * o[3] * dt
            o[0] += o[2] * dt
            o[1] += o[3] * dt

        # Paddle-puck contact (paddle kinematic: impulse and separation on the puck only).
        dx = ux - ppx
        dy = uy - ppy
        d2 = dx * dx + dy * dy
        if d2 < r_pp * r_pp:
            dist = math.sqrt(d2)
            if dist > 0.0:
                nx, ny = dx / dist, dy / dist
            else:
                nx, ny = 0.0, 1.0
            rel_n = (uvx - pvx) * nx + (uvy - pvy) * ny
            if rel_n < 0.0:
                juvx = uvx - (1.0 + e_pp) * rel_n * nx
                juvy = uvy - (1.0 + e_pp) * rel_n * ny
                if tf != 0.0:
                    un = juvx * nx + juvy * ny
                    ut = (juvx * -ny + juvy * nx) * keep
                    juvx = un * nx + ut * -ny
                    juvy = un * ny + ut * nx
                uvx, uvy = juvx, juvy
                ev.paddle_puck_contacts += 1
                ev.contact_points.append(((ppx + nx * pr, ppy + ny * pr), -rel_n))
            overlap = r_pp - dist
            if overlap > 0.0:
                ux += nx * overlap
                uy += ny * overlap

        # Puck-object contacts, by object index.
        for i in range(n_obj):
            o = objs[i]
            dx = ux - o[0]
            dy = uy - o[1]
            r_sum = ur + o[4]
            d2 = dx * dx + dy * dy
            if d2 < r_sum * r_sum:
                dist = math.sqrt(d2)
                if dist > 0.0:
                    nx, ny = dx / dist, dy / dist
                else:
                    nx, ny = 0.0, 1.0
                rel_n = (uvx - o[2]) * nx + (uvy - o[3]) * ny
                inv_sum = puck_inv + 1.0 / o[5]
                if rel_n < 0.0:
                    j = -(1.0 + e_po) * rel_n / inv_sum
                    uvx += j * puck_inv * nx
                    uvy += j * puck_inv * ny
                    o[2] -= j / o[5] * nx
                    o[3] -= j / o[5] * ny
                    if tf != 0.0:
                        un = uvx * nx + uvy * ny
                        ut = (uvx * -ny + uvy * nx) * keep
                        uvx, uvy = un * nx + ut * -ny, un * ny + ut * nx
                        on = o[2] * nx + o[3] * ny
                        ot = (o[2] * -ny + o[3] * nx) * keep
                        o[2], o[3] = on * nx + ot * -ny, on * ny + ot * nx
                    ev.puck_object_contacts.append(i)
                    ev.contact_points.append(((o[0] + nx * o[4], o[1] + ny * o[4]), -rel_n))
                overlap = r_sum - dist
                if overlap > 0.0:
                    pa = overlap * puck_inv / inv_sum
                    pb = overlap * (1.0 / o[5]) / inv_sum
                    ux += nx * pa
                    uy += ny * pa
                    o[0] -= nx * pb
                    o[1] -= ny * pb

        # Object-object contacts, lexicographic pair order.
        for i in range(n_obj):
            oi = objs[i]
            for k in range(i + 1, n_obj):
                ok = objs[k]
                dx = oi[0] - ok[0]
                dy = oi[1] - ok[1]
                r_sum = oi[4] + ok[4]
                d2 = dx * dx + dy * dy
                if d2 < r_sum * r_sum:
                    dist = math.sqrt(d2)
                    if dist > 0.0:
                        nx, ny = dx / dist, dy / dist
                    else:
                        nx, ny = 0.0, 1.0
                    rel_n = (oi[2] - ok[2]) * nx + (oi[3] - ok[3]) * ny
                    inv_i = 1.0 / oi[5]
                    inv_k = 1.0 / ok[5]
                    inv_sum = inv_i + inv_k
                    if rel_n < 0.0:
                        j = -(1.0 + e_po) * rel_n / inv_sum
                        oi[2] += j * inv_i * nx
                        oi[3] += j * inv_i * ny
                        ok[2] -= j * inv_k * nx
                        ok[3] -= j * inv_k * ny
                    overlap = r_sum - dist
                    if overlap > 0.0:
                        oi[0] += nx * overlap * inv_i / inv_sum
                        oi[1] += ny * overlap * inv_i / inv_sum
                        ok[0] -= nx * overlap * inv_k / inv_sum
                        ok[1] -= ny * overlap * inv_k / inv_sum

        # Walls. Puck first, then blocks; paddle is held inside by its target clamp.
        ux, uy, uvx, uvy, hits = _wall_resolve(ux, uy, uvx, uvy, ur, half_w, half_l, e_wall, tf)
        ev.wall_contacts += hits
        # Wall clamp can re-pin the puck into the paddle; squirt it along the wall.
        dx = ux - ppx
        dy = uy - ppy
        if dx * dx + dy * dy < r_pp * r_pp:
            ux, uy = _slide_clear(ux, uy, ppx, ppy, r_pp, ur, half_w, half_l)
        for i in range(n_obj):
            o = objs[i]
            o[0], o[1], o[2], o[3], hits = _wall_resolve(
                o[0], o[1], o[2], o[3], o[4], half_w, half_l, e_wall, tf
            )
            ev.wall_contacts += hits

    _check_finite("paddle", ppx, ppy, pvx, pvy)
    _check_finite("puck", ux, uy, uvx, uvy)
    for i, o in enumerate(objs):
        _check_finite(f"object {i}", o[0], o[1], o[2], o[3])

    new_world = WorldState(
        tick=world.tick + 1,
        paddle=replace(pad, position=(ppx, ppy), velocity=(pvx, pvy)),
        puck=replace(puck, position=(ux, uy), velocity=(uvx, uvy)),
        objects=[
            replace(world.objects[i], position=(o[0], o[1]), velocity=(o[2], o[3]))
            for i, o in enumerate(objs)
        ],
        rng_state=world.rng_state,
    )
    return new_world, ev


def _slide_clear(ux, uy, ppx, ppy, r_pp, ur, half_w, half_l):
    """Slide a wall-clamped puck tangentially along the wall until clear of the paddle.

    Handles the squeeze case (paddle pressing the puck into a wall) so overlap
    does not persist across a completed step. Deterministic tie-break: +tangent.
    """
    lim_x = half_w - ur
    lim_y = half_l - ur
    at_x = abs(ux) >= lim_x - 1e-12
    at_y = abs(uy) >= lim_y - 1e-12
    if at_y and not at_x:
        dy = uy - ppy
        gap2 = r_pp * r_pp - dy * dy
        if gap2 > 0.0:
            need = math.sqrt(gap2)
            ux = ppx + need if ux >= ppx else ppx - need
            if ux > lim_x:
                ux = lim_x
            elif ux < -lim_x:
                ux = -lim_x
    elif at_x and not at_y:
        dx = ux - ppx
        gap2 = r_pp * r_pp - dx * dx
        if gap2 > 0.0:
            need = math.sqrt(gap2)
            uy = ppy + need if uy >= ppy else ppy - need
            if uy > lim_y:
                uy = lim_y
            elif uy < -lim_y:
                uy = -lim_y
    # Corner pin: no tangent escapes both walls; leave for the next substep.
    return ux, uy


def kinetic_energy(*bodies: BodyState) -> float:
    return sum(0.5 * b.mass * (b.velocity[0] ** 2 + b.velocity[1] ** 2) for b in bodies)


def free_slide_closed_form(
    y0: float, v0: float, params: PhysicsParams, n_substeps: int
) -> tuple[float, float]:
    """Closed form of the discrete damped-slide recurrence, for oracle checks.

    The integrator applies v' = v*(1 - c*dt) - g*dt, y' = y + v'*dt per substep;
    this evaluates the same map after n substeps via the geometric series instead
    of iterating, so it is independent of the simulation loop.
    """
    dt = params.control_dt / params.substeps
    g_eff = params.gravity * math.sin(math.radians(params.tilt_deg))
    c = params.puck_damping
    alpha = 1.0 - c * dt
    if c == 0.0:
        v_n = v0 - g_eff * dt * n_substeps
        # y_n = y0 + dt * sum_{k=1..n} v_k with v_k = v0 - g*dt*k
        y_n = y0 + dt * (n_substeps * v0 - g_eff * dt * n_substeps * (n_substeps + 1) / 2.0)
        return y_n, v_n
    v_inf = -g_eff / c
    v_n = (v0 - v_inf) * alpha**n_substeps + v_inf
    # sum_{k=1..n} v_k = n*v_inf + (v0 - v_inf) * alpha * (1 - alpha^n) / (1 - alpha)
    s = n_substeps * v_inf + (v0 - v_inf) * alpha * (1.0 - alpha**n_substeps) / (1.0 - alpha)
    return y0 + dt * s, v_n
