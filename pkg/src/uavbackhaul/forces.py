"""Virtual force field acting on UAV positions.

Forces are displacements in metres. The polar (magnitude, angle) form is
lifted to 3D: the direction is the unit vector between the two UAVs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .scenario import ForceParams, Position3D

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForceVector:
    fx: float = 0.0
    fy: float = 0.0
    fz: float = 0.0

    def __add__(self, other: ForceVector) -> ForceVector:
        return ForceVector(self.fx + other.fx, self.fy + other.fy, self.fz + other.fz)

    def __neg__(self) -> ForceVector:
        return ForceVector(-self.fx, -self.fy, -self.fz)

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.fx ** 2 + self.fy ** 2 + self.fz ** 2)


ZERO = ForceVector()


def _unit(frm: Position3D, to: Position3D) -> tuple[float, float, float, float]:
    dx, dy, dz = to.x - frm.x, to.y - frm.y, to.z - frm.z
    d = math.sqrt(dx * dx + dy * dy + dz * dz)
    if d == 0:
        raise ValueError("coincident UAV positions")
    return dx / d, dy / d, dz / d, d


def attractive_force(j: Position3D, i: Position3D, d_max: float, params: ForceParams) -> ForceVector:
    """Pull of j toward i, u_A * (d - d_max); zero when already within range."""
    ux, uy, uz, d = _unit(j, i)
    if d <= d_max:
        return ZERO
    m = params.u_attract * (d - d_max)
    return ForceVector(m * ux, m * uy, m * uz)


def repulsive_force_link(j: Position3D, i: Position3D, d_max: float, params: ForceParams) -> ForceVector:
    """Push of j away from i after link deletion, u_R1 * (d - d_max).

    ``j`` and ``i`` should be the initial locations. The magnitude is signed
    as written, so for d < d_max the displacement points toward i.
    """
    ux, uy, uz, d = _unit(j, i)
    m = params.u_repel_link * (d - d_max)
    return ForceVector(-m * ux, -m * uy, -m * uz)


def repulsive_force_collision(j: Position3D, i: Position3D, params: ForceParams) -> ForceVector:
    """Collision-avoidance push of j away from i, u_R2 / d."""
    ux, uy, uz, d = _unit(j, i)
    m = params.u_repel_collide / d
    return ForceVector(-m * ux, -m * uy, -m * uz)


def _as_pos(positions, k) -> Position3D:
    p = positions[k]
    return p if isinstance(p, Position3D) else Position3D.from_array(p)


def total_force(j: int, active_attractions, active_repulsions, positions, params: ForceParams, *,
                d_max: float, collision_radius: float = 50.0, initial_positions=None) -> ForceVector:
    """Sum of attraction, link-repulsion and collision terms acting on UAV j.

    ``positions`` is indexable by UAV id (``(J, 3)`` array or list of
    Position3D). Link repulsion distances use ``initial_positions`` when
    given. Collision terms come from every UAV within ``collision_radius``.
    """
    J = len(positions)
    for i in list(active_attractions) + list(active_repulsions):
        if not 0 <= i < J or i == j:
            raise ValueError(f"force partner {i} is not another UAV (the gateway exerts no force)")
    pj = _as_pos(positions, j)
    f = ZERO
    for i in sorted(active_attractions):
        f = f + attractive_force(pj, _as_pos(positions, i), d_max, params)
    init = positions if initial_positions is None else initial_positions
    for i in sorted(active_repulsions):
        f = f + repulsive_force_link(_as_pos(init, j), _as_pos(init, i), d_max, params)
    for i in range(J):
        if i == j:
            continue
        pi = _as_pos(positions, i)
        if pj.distance_to(pi) <= collision_radius:
            f = f + repulsive_force_collision(pj, pi, params)
    return f


def collision_force(j: int, at: Position3D, positions, params: ForceParams, radius: float) -> ForceVector:
    """Collision terms on UAV j if it stood at ``at``."""
    f = ZERO
    for i in range(len(positions)):
        if i == j:
            continue
        pi = _as_pos(positions, i)
        if at.distance_to(pi) <= radius:
            f = f + repulsive_force_collision(at, pi, params)
    return f


def apply_force(p: Position3D, f: ForceVector, area_side: float | None = None,
                min_altitude: float = 1.0) -> Position3D:
    """Displace p by f, clamped to the deployment square and a minimum altitude."""
    x, y, z = p.x + f.fx, p.y + f.fy, p.z + f.fz
    if area_side is not None:
        x = min(max(x, 0.0), area_side)
        y = min(max(y, 0.0), area_side)
    if z < min_altitude:
        logger.warning("force would drop UAV to z=%.3f m; clamped to %.3f m", z, min_altitude)
        z = min_altitude
    return Position3D(x, y, z)


def positions_array(positions) -> np.ndarray:
    return np.array([[p.x, p.y, p.z] for p in positions], dtype=float)
