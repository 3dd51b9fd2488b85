"""Terminal-centric East-North-Up frame and satellite orientation angles.

Maps Earth-rotating Cartesian satellite positions into the tangential
plane of a ground terminal (x east, y north, z up) and derives the
elevation angle plus the satellite body orientation (bank, heading,
tilt) for a vehicle that keeps the same side facing the Earth.

The Earth is treated as a sphere of radius ``EARTH.radius_km``; the
tangential-plane origin sits on that sphere, while the 1.5 m terminal
antenna height only enters the local path geometry in
:mod:`ntn_gscm.environment` (never double counted here).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constants import EARTH

__all__ = [
    "TerminalLocation",
    "MtFrameState",
    "sph_to_cart",
    "cart_to_sph",
    "rotation_to_mt_frame",
    "terminal_cartesian",
    "to_mt_frame",
    "elevation",
    "orientation",
    "mt_frame_states",
    "write_pass_table",
    "DIRECTION_STEP_S",
]

PASS_CSV_HEADER = (
    "t_s,x_q_km,y_q_km,z_q_km,elev_deg,bank_deg,heading_deg,tilt_deg"
)

#: Time step used to form the direction-of-travel chord.  The chord
#: deviates from the tangent by n*dt/2 (~5.5e-7 rad at LEO rates for
#: 1 ms), while position round-off contributes only ~2e-9 rad; both stay
#: below the 1e-6 rad budget for the nadir tilt.
DIRECTION_STEP_S = 0.001


@dataclass(frozen=True)
class TerminalLocation:
    """Ground terminal position (spherical Earth).

    ``height_m`` is the antenna height above ground; it is carried here
    for the environment geometry but does not move the tangential-plane
    origin off the sphere.
    """

    lon_rad: float
    lat_rad: float
    radius_km: float = EARTH.radius_km
    height_m: float = 1.5

    def __post_init__(self) -> None:
        if not -math.pi / 2 <= self.lat_rad <= math.pi / 2:
            raise ValueError(f"latitude {self.lat_rad} outside [-pi/2, pi/2]")


@dataclass(frozen=True)
class MtFrameState:
    """Satellite position and orientation as seen from one terminal.

    Position (x_q, y_q, z_q) in km in the east/north/up axes, elevation
    ``alpha_rad``, and body orientation angles bank/heading/tilt.
    """

    x_q_km: float
    y_q_km: float
    z_q_km: float
    alpha_rad: float
    bank_rad: float
    heading_rad: float
    tilt_rad: float

    @property
    def visible(self) -> bool:
        return self.z_q_km > 0.0


def sph_to_cart(lon_rad, lat_rad, radius_km):
    """Spherical (lon, lat, R) to Cartesian (x, y, z); shape (..., 3)."""
    lon = np.asarray(lon_rad, dtype=float)
    lat = np.asarray(lat_rad, dtype=float)
    r = np.asarray(radius_km, dtype=float)
    x = r * np.cos(lon) * np.cos(lat)
    y = r * np.sin(lon) * np.cos(lat)
    z = r * np.sin(lat)
    return np.stack([x, y, z], axis=-1)


def cart_to_sph(xyz):
    """Inverse of :func:`sph_to_cart`; longitude 0 at the poles."""
    xyz = np.asarray(xyz, dtype=float)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    rho = np.hypot(x, y)
    r = np.sqrt(x * x + y * y + z * z)
    lon = np.where(rho > 0.0, np.arctan2(y, x), 0.0)
    lat = np.arctan2(z, rho)
    return lon, lat, r


def rotation_to_mt_frame(u: TerminalLocation) -> np.ndarray:
    """3x3 rotation aligning geographic Cartesian axes with east/north/up.

    Rows are the east, north and up unit vectors at the terminal, so the
    matrix is orthonormal with determinant +1 for any terminal.
    """
    sin_lon, cos_lon = math.sin(u.lon_rad), math.cos(u.lon_rad)
    sin_lat, cos_lat = math.sin(u.lat_rad), math.cos(u.lat_rad)
    return np.array(
        [
            [-sin_lon, cos_lon, 0.0],
            [-sin_lat * cos_lon, -sin_lat * sin_lon, cos_lat],
            [cos_lat * cos_lon, cos_lat * sin_lon, sin_lat],
        ]
    )


def terminal_cartesian(u: TerminalLocation) -> np.ndarray:
    """Terminal position in rotating Cartesian coordinates (km)."""
    return sph_to_cart(u.lon_rad, u.lat_rad, u.radius_km)


def to_mt_frame(sat_xyz_km, u: TerminalLocation) -> np.ndarray:
    """Rotating-frame satellite position(s) into terminal ENU coordinates.

    Rigid transform: the output norm equals |sat - terminal|.
    Accepts shape (..., 3); returns the same shape.
    """
    sat = np.asarray(sat_xyz_km, dtype=float)
    rot = rotation_to_mt_frame(u)
    return (sat - terminal_cartesian(u)) @ rot.T


def elevation(x_q_km, y_q_km, z_q_km):
    """Elevation angle above the terminal horizon in [-pi/2, pi/2].

    The satellite is visible when z_q > 0.  A zero position vector means
    satellite and terminal coincide and is rejected.
    """
    x = np.asarray(x_q_km, dtype=float)
    y = np.asarray(y_q_km, dtype=float)
    z = np.asarray(z_q_km, dtype=float)
    horiz = np.hypot(x, y)
    if np.any((horiz == 0.0) & (z == 0.0)):
        raise ValueError("zero-length vector: satellite coincides with terminal")
    return np.arctan2(z, horiz)


def _unit(v: np.ndarray, axis: int = -1) -> np.ndarray:
    norm = np.linalg.norm(v, axis=axis, keepdims=True)
    if np.any(norm == 0.0):
        raise ValueError("cannot normalize a zero-length vector")
    return v / norm


def orientation(sat_pos_km, sat_pos_next_km, u: TerminalLocation):
    """Bank, heading, tilt of a nadir-locked satellite body.

    ``sat_pos_km`` and ``sat_pos_next_km`` are rotating-frame positions
    at t and t + dt (dt > 0); the chord between them approximates the
    direction of travel.  Heading is measured in the terminal ENU plane
    (0 = east, pi/2 = north); if the travel direction is vertical in
    that frame the heading is returned as 0 and the tilt carries the
    information.  Accepts shape (..., 3); returns three arrays.
    """
    pos = np.asarray(sat_pos_km, dtype=float)
    pos_next = np.asarray(sat_pos_next_km, dtype=float)
    direction = pos_next - pos
    if np.any(np.linalg.norm(direction, axis=-1) == 0.0):
        raise ValueError("coincident track points: direction step too small")
    u_bar = _unit(terminal_cartesian(u))
    r_bar = _unit(pos)
    d_bar = _unit(direction)
    bank = np.arcsin(
        np.clip(np.sum(u_bar * np.cross(r_bar, d_bar), axis=-1), -1.0, 1.0)
    )
    d_q = d_bar @ rotation_to_mt_frame(u).T
    horiz = np.hypot(d_q[..., 0], d_q[..., 1])
    heading = np.where(
        horiz > 0.0, np.arctan2(d_q[..., 1], d_q[..., 0]), 0.0
    )
    tilt = np.arctan2(d_q[..., 2], horiz)
    return bank, heading, tilt


def mt_frame_states(sat_pos_km, sat_pos_next_km, u: TerminalLocation):
    """Full six-parameter state (position + orientation) per track point.

    Returns ``(q_km, alpha, bank, heading, tilt)`` arrays where ``q_km``
    has shape (..., 3) in the terminal ENU frame.
    """
    q = to_mt_frame(sat_pos_km, u)
    alpha = elevation(q[..., 0], q[..., 1], q[..., 2])
    bank, heading, tilt = orientation(sat_pos_km, sat_pos_next_km, u)
    return q, alpha, bank, heading, tilt


def write_pass_table(path: str | Path, t_s, q_km, alpha, bank, heading, tilt) -> None:
    """Write one satellite pass as seen from a terminal."""
    q = np.asarray(q_km, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PASS_CSV_HEADER.split(","))
        for i in range(len(np.atleast_1d(t_s))):
            writer.writerow(
                [
                    f"{np.atleast_1d(t_s)[i]:.3f}",
                    f"{q[i, 0]:.9f}",
                    f"{q[i, 1]:.9f}",
                    f"{q[i, 2]:.9f}",
                    f"{math.degrees(np.atleast_1d(alpha)[i]):.6f}",
                    f"{math.degrees(np.atleast_1d(bank)[i]):.6f}",
                    f"{math.degrees(np.atleast_1d(heading)[i]):.6f}",
                    f"{math.degrees(np.atleast_1d(tilt)[i]):.6f}",
                ]
            )
