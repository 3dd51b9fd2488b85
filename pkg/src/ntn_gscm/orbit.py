"""Keplerian orbit propagation with secular J2 drift.

Propagates the six classical orbital elements under the dominant Earth
oblateness perturbation (secular drift of the ascending node and of the
argument of perigee) and expresses satellite positions both in
non-rotating geocentric Cartesian coordinates and in the Earth-rotating
geographic frame (latitude, longitude, radius).  At the reference time
t = 0 the prime meridian is aligned with the inertial x-axis.

All angles are radians, wrapped to [-pi, pi); distances are km; times
are seconds relative to the element epoch.  Every function is pure and
accepts scalar or array time arguments.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constants import EARTH, EarthConstants

__all__ = [
    "OrbitalElements",
    "InertialState",
    "GeoState",
    "TrackArrays",
    "wrap_angle",
    "secular_rates",
    "perturbed_node_perigee",
    "solve_eccentric_anomaly",
    "true_from_eccentric",
    "eccentric_from_true",
    "orbital_radius",
    "inertial_position",
    "rotating_geographic",
    "propagate",
    "propagate_arrays",
    "load_elements_json",
    "save_elements_json",
    "write_track_csv",
]

TRACK_CSV_HEADER = "t_s,lat_deg,lon_deg,radius_km,x_i_km,y_i_km,z_i_km"


def wrap_angle(angle):
    """Wrap angle(s) to [-pi, pi)."""
    return (np.asarray(angle) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class OrbitalElements:
    """Six Keplerian elements plus the epoch they refer to.

    ``a_km`` is the semi-major axis (apogee+perigee)/2, ``e`` the
    eccentricity (R_a-R_p)/(R_a+R_p), ``inc_rad`` the inclination,
    ``raan0_rad`` the longitude of the ascending node, ``argp0_rad`` the
    argument of perigee and ``nu0_rad`` the true anomaly, all at
    ``epoch_s``.
    """

    a_km: float
    e: float
    inc_rad: float
    raan0_rad: float
    argp0_rad: float
    nu0_rad: float
    epoch_s: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.e < 1.0:
            raise ValueError(f"eccentricity must be in [0, 1), got {self.e}")
        if self.a_km * (1.0 - self.e) <= EARTH.radius_km:
            raise ValueError(
                f"perigee {self.a_km * (1.0 - self.e):.1f} km is not above "
                f"the Earth's surface ({EARTH.radius_km} km)"
            )

    @property
    def apogee_km(self) -> float:
        return self.a_km * (1.0 + self.e)

    @property
    def perigee_km(self) -> float:
        return self.a_km * (1.0 - self.e)


@dataclass(frozen=True)
class InertialState:
    """Non-rotating geocentric Cartesian position (km)."""

    x_km: float
    y_km: float
    z_km: float

    @property
    def radius_km(self) -> float:
        return math.sqrt(self.x_km**2 + self.y_km**2 + self.z_km**2)


@dataclass(frozen=True)
class GeoState:
    """Earth-rotating geographic position.

    ``lat_rad`` in [-pi/2, pi/2], ``lon_rad`` wrapped to [-pi, pi),
    ``radius_km`` the geocentric radius.
    """

    lat_rad: float
    lon_rad: float
    radius_km: float


def secular_rates(
    el: OrbitalElements, constants: EarthConstants = EARTH
) -> tuple[float, float]:
    """Perturbed mean motion and oblateness factor for the secular drift.

    Returns ``(n_bar, p_bar)`` where ``p_bar`` is the dimensionless J2
    factor 3*J2*R_e^2 / (2 a^2 (1-e^2)^2) and ``n_bar`` the mean motion
    corrected by ``p_bar * (1 - 1.5 sin^2 inc) * sqrt(1 - e^2)``.
    """
    one_m_e2 = 1.0 - el.e**2
    p_bar = (
        3.0 * constants.j2 * constants.radius_km**2
        / (2.0 * el.a_km**2 * one_m_e2**2)
    )
    n_kepler = math.sqrt(constants.mu_km3_s2 / el.a_km**3)
    n_bar = n_kepler * (
        1.0 + p_bar * (1.0 - 1.5 * math.sin(el.inc_rad) ** 2) * math.sqrt(one_m_e2)
    )
    return n_bar, p_bar


def perturbed_node_perigee(el: OrbitalElements, n_bar: float, p_bar: float, t):
    """Ascending-node longitude and perigee argument at time ``t``.

    The node regresses at -n_bar*p_bar*cos(inc) and the perigee drifts
    at +n_bar*p_bar*(2 - 2.5 sin^2 inc); negative ``t`` propagates
    backwards.  Outputs are wrapped to [-pi, pi).
    """
    t = np.asarray(t, dtype=float)
    raan_t = el.raan0_rad - t * n_bar * p_bar * math.cos(el.inc_rad)
    argp_t = el.argp0_rad + t * n_bar * p_bar * (
        2.0 - 2.5 * math.sin(el.inc_rad) ** 2
    )
    return wrap_angle(raan_t), wrap_angle(argp_t)


_KEPLER_TOL_RAD = 1e-12
_KEPLER_MAX_ITER = 50


def _solve_kepler_reduced(m_red, e: float):
    """Solve E - e*sin(E) = M for M in [-pi, pi) via Newton iterations.

    Seeded at M (or sign(M)*pi for e > 0.8 where the Newton step from M
    can overshoot); falls back to bisection on any entry that has not
    reached |residual| < 1e-12 rad after 50 iterations.
    """
    m_red = np.asarray(m_red, dtype=float)
    if e > 0.8:
        ecc = np.where(np.abs(m_red) > 1e-15, np.sign(m_red) * np.pi, m_red)
    else:
        ecc = m_red
    ecc = np.array(ecc, dtype=float)
    for _ in range(_KEPLER_MAX_ITER):
        f = ecc - e * np.sin(ecc) - m_red
        if np.max(np.abs(f)) < _KEPLER_TOL_RAD:
            break
        ecc = ecc - f / (1.0 - e * np.cos(ecc))
    bad = np.abs(ecc - e * np.sin(ecc) - m_red) >= _KEPLER_TOL_RAD
    if np.any(bad):
        lo = np.full(m_red.shape, -np.pi - e)
        hi = np.full(m_red.shape, np.pi + e)
        mid = ecc.copy()
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = mid - e * np.sin(mid) - m_red < 0.0
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        ecc = np.where(bad, mid, ecc)
        if np.max(np.abs(ecc - e * np.sin(ecc) - m_red)) >= _KEPLER_TOL_RAD:
            raise RuntimeError("Kepler solver failed to converge (e < 1 expected)")
    return ecc


def solve_eccentric_anomaly(e0_rad, e: float, n_bar: float, t):
    """Eccentric anomaly at time ``t`` given the anomaly ``e0_rad`` at t=0.

    Solves E - e*sin(E) = E0 - e*sin(E0) + n_bar*t on the continuous
    branch: a full period advances E by exactly 2*pi rather than
    wrapping back.
    """
    if not 0.0 <= e < 1.0:
        raise ValueError(f"eccentricity must be in [0, 1), got {e}")
    t = np.asarray(t, dtype=float)
    mean_anom = e0_rad - e * np.sin(e0_rad) + n_bar * t
    # Split into whole revolutions + reduced anomaly so the Newton seed
    # always sits in the same revolution as the solution.
    rev = np.round(mean_anom / (2.0 * np.pi))
    m_red = mean_anom - 2.0 * np.pi * rev
    return _solve_kepler_reduced(m_red, e) + 2.0 * np.pi * rev


def true_from_eccentric(ecc_anom, e: float):
    """True anomaly from eccentric anomaly (same revolution preserved).

    Uses the half-angle relation tan(nu/2) = sqrt((1+e)/(1-e)) tan(E/2)
    in its atan2 form, which keeps nu in the same revolution as E and
    leaves the apogee fixed point nu(pi) = pi for any e.
    """
    if not 0.0 <= e < 1.0:
        raise ValueError(f"eccentricity must be in [0, 1), got {e}")
    ecc_anom = np.asarray(ecc_anom, dtype=float)
    rev = np.round(ecc_anom / (2.0 * np.pi))
    e_red = ecc_anom - 2.0 * np.pi * rev
    nu_red = 2.0 * np.arctan2(
        math.sqrt(1.0 + e) * np.sin(e_red / 2.0),
        math.sqrt(1.0 - e) * np.cos(e_red / 2.0),
    )
    return nu_red + 2.0 * np.pi * rev


def eccentric_from_true(nu, e: float):
    """Eccentric anomaly from true anomaly (inverse of the map above)."""
    if not 0.0 <= e < 1.0:
        raise ValueError(f"eccentricity must be in [0, 1), got {e}")
    nu = np.asarray(nu, dtype=float)
    rev = np.round(nu / (2.0 * np.pi))
    nu_red = nu - 2.0 * np.pi * rev
    e_red = 2.0 * np.arctan2(
        math.sqrt(1.0 - e) * np.sin(nu_red / 2.0),
        math.sqrt(1.0 + e) * np.cos(nu_red / 2.0),
    )
    return e_red + 2.0 * np.pi * rev


def orbital_radius(el: OrbitalElements, nu):
    """Geocentric radius R = a(1-e^2) / (1 + e*cos(nu)) in km.

    This is the conic-section form whose perigee/apogee radii agree with
    the element definitions R_p = a(1-e) and R_a = a(1+e).
    """
    nu = np.asarray(nu, dtype=float)
    return el.a_km * (1.0 - el.e**2) / (1.0 + el.e * np.cos(nu))


def inertial_position(raan, argp, nu, inc_rad: float, radius_km):
    """Cartesian position from in-plane angle and orbit orientation.

    Applies the rotation composition Rz(raan) * Rx(inc) * Rz(argp+nu) to
    the radius vector (R, 0, 0); the result is orthonormal, so the norm
    of the output equals ``radius_km`` for any angles.  Returns an array
    of shape (..., 3) in km.
    """
    u = np.asarray(argp, dtype=float) + np.asarray(nu, dtype=float)
    raan = np.asarray(raan, dtype=float)
    radius_km = np.asarray(radius_km, dtype=float)
    cos_u, sin_u = np.cos(u), np.sin(u)
    cos_o, sin_o = np.cos(raan), np.sin(raan)
    cos_i, sin_i = math.cos(inc_rad), math.sin(inc_rad)
    x = radius_km * (cos_u * cos_o - sin_u * sin_o * cos_i)
    y = radius_km * (cos_u * sin_o + sin_u * cos_o * cos_i)
    z = radius_km * sin_u * sin_i
    return np.stack([x, y, z], axis=-1)


def rotating_geographic(position_km, t, constants: EarthConstants = EARTH):
    """Geographic latitude/longitude/radius of an inertial position.

    Longitude is corrected by the accumulated Earth rotation
    ``omega_e * t`` and wrapped to [-pi, pi).  At the poles the
    longitude is undefined; 0 is returned there by convention.
    Returns ``(lat_rad, lon_rad, radius_km)`` arrays.
    """
    pos = np.asarray(position_km, dtype=float)
    t = np.asarray(t, dtype=float)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    rho = np.hypot(x, y)
    radius = np.sqrt(x * x + y * y + z * z)
    if np.any(radius == 0.0):
        raise ValueError("zero-norm position has no geographic coordinates")
    lat = np.arctan2(z, rho)
    lon = np.where(
        rho > 0.0,
        wrap_angle(np.arctan2(y, x) - constants.rotation_rate_rad_s * t),
        0.0,
    )
    return lat, lon, radius


@dataclass(frozen=True)
class TrackArrays:
    """Vectorized propagation output over a time grid."""

    t_s: np.ndarray
    inertial_km: np.ndarray  # shape (n, 3)
    lat_rad: np.ndarray
    lon_rad: np.ndarray
    radius_km: np.ndarray


def propagate_arrays(
    el: OrbitalElements, times_s, constants: EarthConstants = EARTH
) -> TrackArrays:
    """Propagate one satellite over a time grid (seconds past epoch).

    Composition order: secular rates -> node/perigee drift -> eccentric
    anomaly -> true anomaly -> radius -> inertial -> geographic.
    Deterministic: identical inputs give bit-identical outputs.
    """
    times_s = np.atleast_1d(np.asarray(times_s, dtype=float))
    if not np.all(np.isfinite(times_s)):
        raise ValueError("propagation times must be finite")
    dt = times_s - el.epoch_s
    n_bar, p_bar = secular_rates(el, constants)
    raan_t, argp_t = perturbed_node_perigee(el, n_bar, p_bar, dt)
    e0 = float(eccentric_from_true(el.nu0_rad, el.e))
    ecc_t = solve_eccentric_anomaly(e0, el.e, n_bar, dt)
    nu_t = true_from_eccentric(ecc_t, el.e)
    radius = orbital_radius(el, nu_t)
    pos = inertial_position(raan_t, argp_t, nu_t, el.inc_rad, radius)
    lat, lon, r = rotating_geographic(pos, dt, constants)
    return TrackArrays(times_s, pos, lat, lon, r)


def propagate(
    el: OrbitalElements, times_s, constants: EarthConstants = EARTH
) -> list[GeoState]:
    """Geographic states for each requested time (list form)."""
    track = propagate_arrays(el, times_s, constants)
    return [
        GeoState(float(la), float(lo), float(r))
        for la, lo, r in zip(track.lat_rad, track.lon_rad, track.radius_km)
    ]


def load_elements_json(path: str | Path) -> list[tuple[str, OrbitalElements]]:
    """Read a constellation element file.

    Format: JSON array of records
    ``{name, a_km, e, inc_deg, raan_deg, argp_deg, nu_deg, epoch_s}``.
    """
    records = json.loads(Path(path).read_text())
    out = []
    for rec in records:
        out.append(
            (
                str(rec["name"]),
                OrbitalElements(
                    a_km=float(rec["a_km"]),
                    e=float(rec["e"]),
                    inc_rad=math.radians(float(rec["inc_deg"])),
                    raan0_rad=math.radians(float(rec["raan_deg"])),
                    argp0_rad=math.radians(float(rec["argp_deg"])),
                    nu0_rad=math.radians(float(rec["nu_deg"])),
                    epoch_s=float(rec.get("epoch_s", 0.0)),
                ),
            )
        )
    return out


def save_elements_json(path: str | Path, named: list[tuple[str, OrbitalElements]]) -> None:
    """Write a constellation element file (inverse of the loader)."""
    records = [
        {
            "name": name,
            "a_km": el.a_km,
            "e": el.e,
            "inc_deg": math.degrees(el.inc_rad),
            "raan_deg": math.degrees(el.raan0_rad),
            "argp_deg": math.degrees(el.argp0_rad),
            "nu_deg": math.degrees(el.nu0_rad),
            "epoch_s": el.epoch_s,
        }
        for name, el in named
    ]
    Path(path).write_text(json.dumps(records, indent=2) + "\n")


def write_track_csv(path: str | Path, track: TrackArrays) -> None:
    """Write one satellite track with the canonical header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_CSV_HEADER.split(","))
        for i in range(len(track.t_s)):
            writer.writerow(
                [
                    f"{track.t_s[i]:.3f}",
                    f"{math.degrees(track.lat_rad[i]):.9f}",
                    f"{math.degrees(track.lon_rad[i]):.9f}",
                    f"{track.radius_km[i]:.9f}",
                    f"{track.inertial_km[i, 0]:.9f}",
                    f"{track.inertial_km[i, 1]:.9f}",
                    f"{track.inertial_km[i, 2]:.9f}",
                ]
            )
