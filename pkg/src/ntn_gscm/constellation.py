"""Walker-Delta constellations, random terminals, and visible links.

Generates the symmetric T/P/F constellation pattern on circular orbits,
samples terminal positions uniformly over the band of the sphere inside
a latitude limit, and enumerates every (terminal, satellite, time)
combination whose elevation clears a cutoff.  Link enumeration is
deterministic geometry; randomness only enters through the terminal
sampler's generator.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constants import EARTH
from . import frames, orbit
from .frames import DIRECTION_STEP_S, MtFrameState, TerminalLocation
from .orbit import OrbitalElements

__all__ = [
    "WalkerSpec",
    "LinkSample",
    "LinkTable",
    "walker_delta",
    "walker_names",
    "sample_terminals",
    "enumerate_links",
    "slant_range_km",
    "write_link_csv",
    "MIN_ELEVATION_FLOOR_RAD",
]

LINK_CSV_HEADER = "term_id,sat_id,t_s,elev_deg,dist_m,heading_deg"

#: Links below this elevation are always rejected: the log-elevation
#: covariate of the parameter model degenerates as alpha -> 0.
MIN_ELEVATION_FLOOR_RAD = math.radians(0.5)


@dataclass(frozen=True)
class WalkerSpec:
    """Walker-Delta pattern ``inc: total/planes/phasing`` at one altitude."""

    total: int
    planes: int
    phasing: int
    altitude_km: float
    inc_rad: float

    def __post_init__(self) -> None:
        if self.total <= 0 or self.planes <= 0:
            raise ValueError("total and planes must be positive")
        if self.total % self.planes != 0:
            raise ValueError(
                f"total satellites {self.total} not divisible by {self.planes} planes"
            )
        if self.altitude_km <= 0:
            raise ValueError("altitude must be positive")


def walker_delta(spec: WalkerSpec, epoch_s: float = 0.0) -> list[OrbitalElements]:
    """Circular-orbit elements for every slot of a Walker-Delta pattern.

    Plane p (0-based) has RAAN 2*pi*p/P; slot s within the plane sits at
    anomaly 2*pi*s/(T/P) + 2*pi*F*p/T.  Satellites are ordered plane by
    plane, slot by slot.
    """
    per_plane = spec.total // spec.planes
    elements = []
    for p in range(spec.planes):
        raan = 2.0 * math.pi * p / spec.planes
        phase = 2.0 * math.pi * spec.phasing * p / spec.total
        for s in range(per_plane):
            nu = 2.0 * math.pi * s / per_plane + phase
            elements.append(
                OrbitalElements(
                    a_km=EARTH.radius_km + spec.altitude_km,
                    e=0.0,
                    inc_rad=spec.inc_rad,
                    raan0_rad=float(orbit.wrap_angle(raan)),
                    argp0_rad=0.0,
                    nu0_rad=float(orbit.wrap_angle(nu)),
                    epoch_s=epoch_s,
                )
            )
    return elements


def walker_names(spec: WalkerSpec, shell_tag: str) -> list[str]:
    """Stable satellite names matching the ``walker_delta`` ordering."""
    per_plane = spec.total // spec.planes
    return [
        f"{shell_tag}-p{p:02d}s{s:02d}"
        for p in range(spec.planes)
        for s in range(per_plane)
    ]


def sample_terminals(
    n: int,
    rng: np.random.Generator,
    lat_limit_rad: float = math.radians(53.0),
    height_m: float = 1.5,
) -> list[TerminalLocation]:
    """Random outdoor terminals, area-uniform inside +/- lat_limit.

    Longitude is uniform on [-pi, pi); the sine of the latitude is
    uniform on [-sin(limit), sin(limit)] so that terminal density is
    uniform per unit area of the sphere.
    """
    if n <= 0:
        raise ValueError("terminal count must be positive")
    lon = rng.uniform(-math.pi, math.pi, n)
    lat = np.arcsin(rng.uniform(-math.sin(lat_limit_rad), math.sin(lat_limit_rad), n))
    return [
        TerminalLocation(float(lo), float(la), EARTH.radius_km, height_m)
        for lo, la in zip(lon, lat)
    ]


@dataclass(frozen=True)
class LinkSample:
    """One visible satellite-terminal geometry sample."""

    term_id: int
    sat_id: int
    t_s: float
    terminal: TerminalLocation
    mt_state: MtFrameState
    distance_m: float
    elevation_rad: float


@dataclass(frozen=True)
class LinkTable:
    """Column-oriented view of enumerated links (one row per link)."""

    term_id: np.ndarray
    sat_id: np.ndarray
    t_s: np.ndarray
    distance_m: np.ndarray
    elevation_rad: np.ndarray
    sat_azimuth_rad: np.ndarray  # azimuth of the satellite seen from the terminal
    heading_rad: np.ndarray
    terminals: list[TerminalLocation]

    def __len__(self) -> int:
        return len(self.term_id)


def slant_range_km(elevation_rad, altitude_km, terminal_radius_km=EARTH.radius_km):
    """Closed-form slant range for a spherical Earth.

    d = -R' sin(a) + sqrt(R'^2 sin^2(a) + h^2 + 2 R' h) with R' the
    terminal geocentric radius and h the satellite height above R'.
    """
    alpha = np.asarray(elevation_rad, dtype=float)
    r = terminal_radius_km
    h = altitude_km
    rs = r * np.sin(alpha)
    return -rs + np.sqrt(rs * rs + h * h + 2.0 * r * h)


def enumerate_links(
    constellation: list[OrbitalElements],
    terminals: list[TerminalLocation],
    times_s,
    min_elev_rad: float = math.radians(10.0),
) -> LinkTable:
    """All (terminal, satellite, time) rows with the satellite in view.

    Visibility requires z_q > 0 and elevation >= max(min_elev_rad, the
    0.5 degree floor).  Rows are ordered by (terminal, satellite, time);
    an empty result is valid.  Distances are meters (covariate of the
    parameter model).
    """
    times_s = np.atleast_1d(np.asarray(times_s, dtype=float))
    cutoff = max(min_elev_rad, MIN_ELEVATION_FLOOR_RAD)

    # Rotating-frame positions for all satellites at t and t + dt.
    n_sat, n_t = len(constellation), len(times_s)
    sat_now = np.empty((n_sat, n_t, 3))
    sat_next = np.empty((n_sat, n_t, 3))
    for k, el in enumerate(constellation):
        for dst, grid in ((sat_now, times_s), (sat_next, times_s + DIRECTION_STEP_S)):
            tr = orbit.propagate_arrays(el, grid)
            dst[k] = frames.sph_to_cart(tr.lon_rad, tr.lat_rad, tr.radius_km)

    cols: dict[str, list] = {k: [] for k in (
        "term", "sat", "t", "dist", "elev", "sat_az", "heading")}
    for ti, u in enumerate(terminals):
        rot = frames.rotation_to_mt_frame(u)
        u_cart = frames.terminal_cartesian(u)
        q = (sat_now - u_cart) @ rot.T  # (n_sat, n_t, 3)
        horiz = np.hypot(q[..., 0], q[..., 1])
        elev = np.arctan2(q[..., 2], horiz)
        vis = (q[..., 2] > 0.0) & (elev >= cutoff)
        sat_idx, t_idx = np.nonzero(vis)
        if sat_idx.size == 0:
            continue
        qv = q[sat_idx, t_idx]
        d_bar = sat_next[sat_idx, t_idx] - sat_now[sat_idx, t_idx]
        d_bar /= np.linalg.norm(d_bar, axis=-1, keepdims=True)
        d_q = d_bar @ rot.T
        dh = np.hypot(d_q[:, 0], d_q[:, 1])
        heading = np.where(dh > 0.0, np.arctan2(d_q[:, 1], d_q[:, 0]), 0.0)
        cols["term"].append(np.full(sat_idx.shape, ti))
        cols["sat"].append(sat_idx)
        cols["t"].append(times_s[t_idx])
        cols["dist"].append(np.linalg.norm(qv, axis=-1) * 1000.0)
        cols["elev"].append(elev[sat_idx, t_idx])
        cols["sat_az"].append(np.arctan2(qv[:, 1], qv[:, 0]))
        cols["heading"].append(heading)

    if not cols["term"]:
        empty = np.empty(0)
        return LinkTable(
            np.empty(0, dtype=int), np.empty(0, dtype=int), empty, empty,
            empty, empty, empty, list(terminals),
        )
    return LinkTable(
        term_id=np.concatenate(cols["term"]).astype(int),
        sat_id=np.concatenate(cols["sat"]).astype(int),
        t_s=np.concatenate(cols["t"]),
        distance_m=np.concatenate(cols["dist"]),
        elevation_rad=np.concatenate(cols["elev"]),
        sat_azimuth_rad=np.concatenate(cols["sat_az"]),
        heading_rad=np.concatenate(cols["heading"]),
        terminals=list(terminals),
    )


def write_link_csv(path: str | Path, links: LinkTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LINK_CSV_HEADER.split(","))
        for i in range(len(links)):
            writer.writerow(
                [
                    int(links.term_id[i]),
                    int(links.sat_id[i]),
                    f"{links.t_s[i]:.3f}",
                    f"{math.degrees(links.elevation_rad[i]):.6f}",
                    f"{links.distance_m[i]:.3f}",
                    f"{math.degrees(links.heading_rad[i]):.6f}",
                ]
            )


def read_link_csv(path: str | Path, terminals: list[TerminalLocation]) -> LinkTable:
    """Rebuild a LinkTable from the link CSV plus the terminal list.

    The satellite azimuth column is not stored in the CSV; it is only
    needed for path synthesis and is reconstructed by the caller that
    owns the constellation.  Here it is filled with NaN.
    """
    rows = list(csv.reader(open(path, newline="")))
    header, body = rows[0], rows[1:]
    if ",".join(header) != LINK_CSV_HEADER:
        raise ValueError(f"unexpected link CSV header: {header}")
    arr = np.array(body, dtype=float) if body else np.empty((0, 6))
    return LinkTable(
        term_id=arr[:, 0].astype(int),
        sat_id=arr[:, 1].astype(int),
        t_s=arr[:, 2],
        distance_m=arr[:, 4],
        elevation_rad=np.radians(arr[:, 3]),
        sat_azimuth_rad=np.full(len(arr), np.nan),
        heading_rad=np.radians(arr[:, 5]),
        terminals=list(terminals),
    )
