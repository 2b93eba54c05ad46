"""Deterministic 2D physics for the mallet and puck.

Discrete-time second order kinematics, box constraints on velocity, circle
collisions against the table walls and between mallet and puck, and the free
rollout of a struck puck to the opponent's goal line. Everything here is a
pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class Vec2(NamedTuple):
    """A 2D vector of finite floats (meters, m/s or m/s^2 by context)."""

    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":  # type: ignore[override]
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def scaled(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def unit(self) -> "Vec2":
        """Unit vector in this direction; zero vector maps to zero."""
        n = self.norm()
        if n == 0.0:
            return Vec2(0.0, 0.0)
        return Vec2(self.x / n, self.y / n)


ZERO = Vec2(0.0, 0.0)


class BodyState(NamedTuple):
    """Position and velocity of a disc-shaped body."""

    pos: Vec2
    vel: Vec2


@dataclass(frozen=True)
class TableGeometry:
    """Table extents, goal placement and body radii, all in meters.

    x spans [0, width], y spans [0, height] with the opponent's goal line at
    ``goal_line_y`` (the far edge). The goal mouth is centered on
    ``goal_center_x`` with total width ``goal_width``.
    """

    width: float = 1.0
    height: float = 2.0
    goal_center_x: float = 0.5
    goal_width: float = 0.25
    mallet_radius: float = 0.05
    puck_radius: float = 0.03
    goal_line_y: float = 2.0

    def __post_init__(self) -> None:
        for name in ("width", "height", "goal_width", "mallet_radius",
                     "puck_radius", "goal_line_y"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not 0.0 <= self.goal_center_x <= self.width:
            raise ValueError("goal_center_x must lie within [0, width]")
        limit = min(self.width, self.height) / 4.0
        if self.mallet_radius >= limit or self.puck_radius >= limit:
            raise ValueError("body radii must be smaller than a quarter of the table")


@dataclass(frozen=True)
class PhysicsParams:
    """Sampling time and box constraints of the mechanics."""

    dt: float = 0.05
    max_force: float = 8.0
    max_velocity: float = 2.0
    restitution: float = 0.99

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.max_force <= 0.0 or self.max_velocity <= 0.0:
            raise ValueError("max_force and max_velocity must be positive")
        if not 0.0 < self.restitution <= 1.0:
            raise ValueError("restitution must be in (0, 1]")


class RolloutResult(NamedTuple):
    """Outcome of a post-strike puck rollout.

    ``crossing_x`` is the x coordinate where the puck center crosses the goal
    line, or None if it never crosses within the step budget.
    ``velocity_projection`` is the immediate post-strike speed along the
    direction from the strike point to the aim point on the goal line.
    """

    crossing_x: float | None
    velocity_projection: float


def _clamp(value: float, lo: float, hi: float) -> float:
    if value < lo:
        return lo
    if value > hi:
        return hi
    return value


def integrate_body(state: BodyState, accel: Vec2, params: PhysicsParams) -> BodyState:
    """One discrete-time step: position advances with the old velocity,
    velocity integrates the acceleration and is clamped per component."""
    dt = params.dt
    pos = Vec2(state.pos.x + dt * state.vel.x, state.pos.y + dt * state.vel.y)
    vmax = params.max_velocity
    vel = Vec2(
        _clamp(state.vel.x + dt * accel.x, -vmax, vmax),
        _clamp(state.vel.y + dt * accel.y, -vmax, vmax),
    )
    return BodyState(pos, vel)


def _reflect_axis(pos: float, vel: float, lo: float, hi: float) -> tuple[float, float, bool]:
    """Reflect one coordinate off [lo, hi]; contact requires penetration or
    an exact touch while moving into the wall."""
    if pos < lo or (pos == lo and vel < 0.0):
        return 2.0 * lo - pos, -vel, True
    if pos > hi or (pos == hi and vel > 0.0):
        return 2.0 * hi - pos, -vel, True
    return pos, vel, False


def _bounce_walls(puck: BodyState, geom: TableGeometry, restitution: float,
                  far_wall: bool) -> BodyState:
    """Reflect the puck off the table walls it has reached.

    The normal velocity component is negated per contacted wall, then the
    whole velocity vector is scaled once by the restitution so the outbound
    angle equals the inbound angle while kinetic energy drops by e^2.
    """
    r = geom.puck_radius
    x, vx, hit_x = _reflect_axis(puck.pos.x, puck.vel.x, r, geom.width - r)
    y_hi = geom.height - r if far_wall else math.inf
    y, vy, hit_y = _reflect_axis(puck.pos.y, puck.vel.y, r, y_hi)
    if not (hit_x or hit_y):
        return puck
    return BodyState(Vec2(x, y), Vec2(vx * restitution, vy * restitution))


def resolve_wall_collision(puck: BodyState, geom: TableGeometry,
                           restitution: float) -> BodyState:
    """Resolve puck-wall contact against all four table walls.

    Returns the puck unchanged when there is no contact. On contact the
    position is mirrored back inside the bounds and the velocity is
    reflected-then-scaled (see ``_bounce_walls``). Corner contact reflects
    both normals with a single restitution scaling.
    """
    return _bounce_walls(puck, geom, restitution, far_wall=True)


def touches_wall(pos: Vec2, radius: float, geom: TableGeometry) -> bool:
    """True when a disc of the given radius touches or penetrates any wall."""
    return (pos.x <= radius or pos.x >= geom.width - radius
            or pos.y <= radius or pos.y >= geom.height - radius)


def detect_mallet_puck_contact(mallet: BodyState, puck: BodyState,
                               geom: TableGeometry) -> tuple[bool, Vec2]:
    """Circle-circle contact test.

    Returns (contact, normal) where the normal is the unit vector from the
    mallet center to the puck center. Coincident centers degenerate to the
    fixed normal (1, 0).
    """
    d = puck.pos - mallet.pos
    dist = d.norm()
    if dist > geom.mallet_radius + geom.puck_radius:
        return False, Vec2(1.0, 0.0)
    if dist == 0.0:
        return True, Vec2(1.0, 0.0)
    return True, Vec2(d.x / dist, d.y / dist)


def resolve_strike(mallet: BodyState, puck: BodyState, normal: Vec2,
                   restitution: float) -> BodyState:
    """Impact of a kinematically driven mallet on the puck.

    The mallet acts as an infinite-mass velocity source: the puck's normal
    velocity component becomes v_m.n + e * (v_m.n - v_p.n) while the
    tangential component is unchanged (frictionless contact). A separating
    contact (relative normal velocity >= 0 away from the mallet) applies no
    impulse.
    """
    vm_n = mallet.vel.dot(normal)
    vp_n = puck.vel.dot(normal)
    closing = vm_n - vp_n
    if closing <= 0.0:
        return puck
    new_vp_n = vm_n + restitution * closing
    delta = new_vp_n - vp_n
    vel = Vec2(puck.vel.x + delta * normal.x, puck.vel.y + delta * normal.y)
    return BodyState(puck.pos, vel)


def rollout_puck_to_goal_line(puck: BodyState, geom: TableGeometry,
                              restitution: float, params: PhysicsParams,
                              max_steps: int, aim_x: float | None = None,
                              ) -> RolloutResult:
    """Simulate the free puck until its center crosses the goal line.

    The puck coasts (no friction) and bounces off the two side walls and the
    near wall; the far boundary is the goal line and absorbs the puck. Within
    each dt step the wall hits and the goal crossing are ordered by their
    time of occurrence along the straight-line motion, so the crossing x is
    exact for the piecewise-linear trajectory.

    ``velocity_projection`` is always computed from the immediate post-strike
    velocity, projected on the unit vector from the strike position to
    (aim_x, goal_line_y). ``aim_x`` defaults to the goal center.
    """
    if aim_x is None:
        aim_x = geom.goal_center_x
    target = Vec2(aim_x, geom.goal_line_y)
    direction = (target - puck.pos).unit()
    projection = puck.vel.dot(direction)

    if puck.vel.x == 0.0 and puck.vel.y == 0.0:
        return RolloutResult(None, 0.0)
    if puck.pos.y >= geom.goal_line_y:
        return RolloutResult(puck.pos.x, projection)

    r = geom.puck_radius
    x_lo, x_hi = r, geom.width - r
    y_lo = r
    goal_y = geom.goal_line_y
    x, y = puck.pos
    vx, vy = puck.vel
    dt = params.dt

    for _ in range(max_steps):
        remaining = dt
        # Walk the straight segments of this step, handling at most a few
        # wall events before the time budget runs out.
        while remaining > 0.0:
            t_goal = math.inf
            if vy > 0.0 and y < goal_y:
                t_goal = (goal_y - y) / vy
            t_wall = math.inf
            wall_axis = None
            if vx < 0.0:
                t = (x_lo - x) / vx
                if t < t_wall:
                    t_wall, wall_axis = t, "x"
            elif vx > 0.0:
                t = (x_hi - x) / vx
                if t < t_wall:
                    t_wall, wall_axis = t, "x"
            if vy < 0.0:
                t = (y_lo - y) / vy
                if t < t_wall:
                    t_wall, wall_axis = t, "y"

            if t_goal <= remaining and t_goal <= t_wall:
                return RolloutResult(x + t_goal * vx, projection)
            if t_wall <= remaining:
                x += t_wall * vx
                y += t_wall * vy
                if wall_axis == "x":
                    vx = -vx
                else:
                    vy = -vy
                vx *= restitution
                vy *= restitution
                remaining -= t_wall
                if vx == 0.0 and vy == 0.0:
                    return RolloutResult(None, projection)
                continue
            x += remaining * vx
            y += remaining * vy
            break

    return RolloutResult(None, projection)
