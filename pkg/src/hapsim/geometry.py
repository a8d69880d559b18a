"""User placement over the coverage disk and per-user look angles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Horizontal standoff from the nadir point; the azimuth is undefined exactly
# underneath the platform.
MIN_HORIZONTAL_DISTANCE = 1.0  # m


@dataclass
class UserGeometry:
    """One user's ground position and the angles to the platform.

    The platform nadir is the origin of the ground plane.  `elevation` is the
    angle of the platform above the user's local horizontal, so it approaches
    pi/2 underneath the platform and 0 at far range.
    """

    user_id: int
    x: float
    y: float
    azimuth: float          # radians in [0, 2*pi)
    elevation: float        # radians in (0, pi/2]
    slant_distance: float   # m


def look_angles(x: float, y: float, altitude: float) -> tuple[float, float, float]:
    """(azimuth, elevation, slant distance) for a ground position."""
    horizontal = math.hypot(x, y)
    azimuth = math.atan2(y, x) % (2.0 * math.pi)
    elevation = math.atan2(altitude, horizontal)
    slant = math.sqrt(x * x + y * y + altitude * altitude)
    return azimuth, elevation, slant


def drop_users(config, rng: np.random.Generator) -> list[UserGeometry]:
    """Drop the scenario's users i.i.d. uniformly over the coverage disk.

    Uniform area density: radius R*sqrt(u), angle 2*pi*v, with the radius
    clamped to a 1 m standoff from the nadir point.
    """
    n = config.total_users
    radius = config.cell_radius * np.sqrt(rng.random(n))
    radius = np.maximum(radius, MIN_HORIZONTAL_DISTANCE)
    angle = 2.0 * np.pi * rng.random(n)
    xs = radius * np.cos(angle)
    ys = radius * np.sin(angle)
    users = []
    for uid in range(n):
        az, el, slant = look_angles(xs[uid], ys[uid], config.haps_altitude)
        users.append(UserGeometry(uid, float(xs[uid]), float(ys[uid]), az, el, slant))
    return users
