"""Simplified single-bounce scattering environment.

Builds deterministic per-link path sets from a randomized local
environment: each link gets a fixed number of scatterers with uniform
azimuth and truncated-Gaussian distance/height, every scattered path
carries an equal share of the clutter-model power, and the direct path
(when present) carries the free-space power.  Multi-bounce scattering,
diffraction and material effects are out of scope.

Path geometry uses a link-local frame: terminal antenna at the origin,
satellite at azimuth 0 and its true elevation/range.  Scatterer
azimuths are isotropic, so statistics are invariant under this choice;
it makes every stage reproducible from the link file alone.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .constants import SPEED_OF_LIGHT_M_S
from .constellation import LinkTable
from . import lsp

__all__ = [
    "ScenarioParams",
    "SCENARIOS",
    "Scatterer",
    "PathSet",
    "PathTable",
    "fspl_db",
    "draw_scatterers",
    "draw_scatterer_batch",
    "geometry_paths",
    "assign_nlos_powers",
    "add_los",
    "draw_xpr",
    "synthesize_paths",
    "write_path_csv",
    "read_path_csv",
]

log = logging.getLogger(__name__)

PATH_CSV_HEADER = (
    "term_id,sat_id,t_s,path_idx,is_los,delay_s,power_db,"
    "aoa_az_deg,aoa_el_deg,aod_az_deg,aod_el_deg,xpr_db"
)

_REJECTION_CAP = 10**6


@dataclass(frozen=True)
class ScenarioParams:
    """Per-scenario scattering environment description (meters)."""

    name: str
    n_paths: int
    dist_min_m: float
    dist_max_m: float
    dist_mean_m: float
    dist_std_m: float
    height_min_m: float
    height_max_m: float
    height_mean_m: float
    height_std_m: float

    def __post_init__(self) -> None:
        for lo, hi, mean in (
            (self.dist_min_m, self.dist_max_m, self.dist_mean_m),
            (self.height_min_m, self.height_max_m, self.height_mean_m),
        ):
            if not lo < hi:
                raise ValueError(f"{self.name}: min {lo} not below max {hi}")
            if not lo <= mean <= hi:
                raise ValueError(f"{self.name}: mean {mean} outside [{lo}, {hi}]")


SCENARIOS: dict[str, ScenarioParams] = {
    "DenseUrban": ScenarioParams("DenseUrban", 10, 0.1, 100.0, 40.0, 30.0, 0.0, 60.0, 2.0, 18.0),
    "Urban": ScenarioParams("Urban", 10, 0.1, 200.0, 50.0, 35.0, 0.0, 30.0, 2.0, 9.0),
    "Suburban": ScenarioParams("Suburban", 8, 0.1, 500.0, 65.0, 50.0, 0.0, 8.0, 1.5, 1.5),
    "Rural": ScenarioParams("Rural", 6, 0.1, 3500.0, 300.0, 200.0, 0.0, 8.0, 1.5, 1.5),
}


@dataclass(frozen=True)
class Scatterer:
    """Single scattering object around a terminal."""

    azimuth_rad: float
    distance_m: float
    height_m: float


@dataclass
class PathSet:
    """Propagation paths of one link; arrays indexed by path.

    If a line-of-sight path is present it is path 0 and has the strictly
    smallest delay.  Powers are linear gains; XPR is dB.  The covariates
    (d, f, alpha) ride along for the parameter model.
    """

    delay_s: np.ndarray
    power: np.ndarray
    aoa_az_rad: np.ndarray
    aoa_el_rad: np.ndarray
    aod_az_rad: np.ndarray
    aod_el_rad: np.ndarray
    xpr_db: np.ndarray
    is_los: np.ndarray
    d_m: float
    f_ghz: float
    alpha_rad: float

    def __post_init__(self) -> None:
        if int(np.sum(self.is_los)) > 1:
            raise ValueError("at most one line-of-sight path per link")


@dataclass
class PathTable:
    """Batch of path sets for all links of one (scenario, frequency).

    2-D arrays have shape (n_links, n_paths) where column 0 is the
    direct path when ``has_los`` (otherwise all columns are scattered
    paths).
    """

    scenario: str
    f_ghz: float
    has_los: bool
    term_id: np.ndarray
    sat_id: np.ndarray
    t_s: np.ndarray
    d_m: np.ndarray
    alpha_rad: np.ndarray
    delay_s: np.ndarray
    power: np.ndarray
    aoa_az_rad: np.ndarray
    aoa_el_rad: np.ndarray
    aod_az_rad: np.ndarray
    aod_el_rad: np.ndarray
    xpr_db: np.ndarray

    def __len__(self) -> int:
        return len(self.term_id)

    def path_set(self, i: int) -> PathSet:
        is_los = np.zeros(self.delay_s.shape[1], dtype=bool)
        if self.has_los:
            is_los[0] = True
        return PathSet(
            self.delay_s[i], self.power[i], self.aoa_az_rad[i],
            self.aoa_el_rad[i], self.aod_az_rad[i], self.aod_el_rad[i],
            self.xpr_db[i], is_los,
            float(self.d_m[i]), self.f_ghz, float(self.alpha_rad[i]),
        )

    def nlos_view(self) -> "PathTable":
        """The same links without the direct path."""
        if not self.has_los:
            return self
        return replace(
            self,
            has_los=False,
            delay_s=self.delay_s[:, 1:],
            power=self.power[:, 1:],
            aoa_az_rad=self.aoa_az_rad[:, 1:],
            aoa_el_rad=self.aoa_el_rad[:, 1:],
            aod_az_rad=self.aod_az_rad[:, 1:],
            aod_el_rad=self.aod_el_rad[:, 1:],
            xpr_db=self.xpr_db[:, 1:],
        )


def fspl_db(d_m, f_ghz):
    """Free-space path loss 32.45 + 20 log10(d_m) + 20 log10(f_GHz) dB."""
    return 32.45 + 20.0 * np.log10(np.asarray(d_m, dtype=float)) \
        + 20.0 * np.log10(np.asarray(f_ghz, dtype=float))


def _truncated_normal(mean, std, lo, hi, shape, rng: np.random.Generator):
    """Rejection-sample Normal(mean, std) into [lo, hi]."""
    out = np.empty(shape).ravel()
    pending = np.arange(out.size)
    drawn = 0
    while pending.size:
        draw = rng.normal(mean, std, pending.size)
        drawn += pending.size
        if drawn > _REJECTION_CAP * max(out.size, 1):
            raise RuntimeError("truncated-normal rejection did not terminate")
        ok = (draw >= lo) & (draw <= hi)
        out[pending[ok]] = draw[ok]
        pending = pending[~ok]
    return out.reshape(shape)


def draw_scatterer_batch(
    sc: ScenarioParams, n_links: int, rng: np.random.Generator
):
    """Scatterer geometry for many links at once.

    Returns (azimuth, distance, height) arrays of shape
    (n_links, sc.n_paths); azimuth uniform on [-pi, pi), distance and
    height truncated Gaussians per the scenario table.
    """
    shape = (n_links, sc.n_paths)
    azimuth = rng.uniform(-math.pi, math.pi, shape)
    distance = _truncated_normal(
        sc.dist_mean_m, sc.dist_std_m, sc.dist_min_m, sc.dist_max_m, shape, rng
    )
    height = _truncated_normal(
        sc.height_mean_m, sc.height_std_m, sc.height_min_m, sc.height_max_m, shape, rng
    )
    return azimuth, distance, height


def draw_scatterers(sc: ScenarioParams, rng: np.random.Generator) -> list[Scatterer]:
    """Scatterers for a single link (list form)."""
    az, dist, hgt = draw_scatterer_batch(sc, 1, rng)
    return [
        Scatterer(float(a), float(d), float(h))
        for a, d, h in zip(az[0], dist[0], hgt[0])
    ]


def _angles_of(vec):
    """Azimuth/elevation of direction vectors, shape (..., 3)."""
    az = np.arctan2(vec[..., 1], vec[..., 0])
    el = np.arctan2(vec[..., 2], np.hypot(vec[..., 0], vec[..., 1]))
    return az, el


def _nlos_geometry(d_m, alpha_rad, az, dist, hgt, height_m: float):
    """Delays and angles of single-bounce paths in the link-local frame.

    Satellite at range d_m, azimuth 0, elevation alpha; antenna at the
    origin; scatterer k at (dist*cos(az), dist*sin(az), hgt - height_m).
    """
    d_m = np.asarray(d_m, dtype=float)[:, None]
    alpha = np.asarray(alpha_rad, dtype=float)[:, None]
    sx = dist * np.cos(az)
    sy = dist * np.sin(az)
    sz = hgt - height_m
    sat = np.concatenate(
        [d_m * np.cos(alpha), np.zeros_like(d_m), d_m * np.sin(alpha)], axis=1
    )  # (n, 3)
    r_term = np.sqrt(sx * sx + sy * sy + sz * sz)
    dx = sat[:, 0:1] - sx
    dy = sat[:, 1:2] - sy
    dz = sat[:, 2:3] - sz
    r_sat = np.sqrt(dx * dx + dy * dy + dz * dz)
    delay = (r_term + r_sat) / SPEED_OF_LIGHT_M_S
    aoa_az = np.arctan2(sy, sx)
    aoa_el = np.arctan2(sz, np.hypot(sx, sy))
    # departure ray: satellite -> scatterer
    aod_az, aod_el = _angles_of(np.stack([-dx, -dy, -dz], axis=-1))
    return delay, aoa_az, aoa_el, aod_az, aod_el


def geometry_paths(
    link_d_m: float,
    link_alpha_rad: float,
    scatterers: list[Scatterer],
    f_ghz: float,
    terminal_height_m: float = 1.5,
) -> PathSet:
    """Scattered-path geometry (no powers yet) for one link.

    Every delay exceeds d/c by the triangle inequality; arrival
    elevation is driven purely by the scatterer height relative to the
    antenna.
    """
    az = np.array([[s.azimuth_rad for s in scatterers]])
    dist = np.array([[s.distance_m for s in scatterers]])
    hgt = np.array([[s.height_m for s in scatterers]])
    delay, aoa_az, aoa_el, aod_az, aod_el = _nlos_geometry(
        [link_d_m], [link_alpha_rad], az, dist, hgt, terminal_height_m
    )
    k = len(scatterers)
    return PathSet(
        delay_s=delay[0],
        power=np.full(k, np.nan),
        aoa_az_rad=aoa_az[0],
        aoa_el_rad=aoa_el[0],
        aod_az_rad=aod_az[0],
        aod_el_rad=aod_el[0],
        xpr_db=np.full(k, np.nan),
        is_los=np.zeros(k, dtype=bool),
        d_m=float(link_d_m),
        f_ghz=float(f_ghz),
        alpha_rad=float(link_alpha_rad),
    )


def assign_nlos_powers(
    ps: PathSet, pl_coeffs: lsp.LspCoefficients, sf_db: float
) -> PathSet:
    """Split the clutter-model power equally over the scattered paths.

    Total scattered gain is -(PL(d, f, alpha) + SF) dB; each of the N
    paths carries total/N in linear scale.
    """
    n = int(np.sum(~ps.is_los))
    if n < 1:
        raise ValueError("need at least one scattered path")
    pl_db = float(lsp.eval_mean(pl_coeffs, ps.d_m, ps.f_ghz, ps.alpha_rad))
    total = 10.0 ** (-(pl_db + sf_db) / 10.0)
    power = ps.power.copy()
    power[~ps.is_los] = total / n
    return replace(ps, power=power)


def add_los(ps: PathSet) -> PathSet:
    """Prepend the direct path (free-space power, delay d/c).

    Scattered powers are unchanged; departure and arrival directions
    lie on the terminal-satellite line.
    """
    if np.any(ps.is_los):
        raise ValueError("path set already has a direct path")
    delay0 = ps.d_m / SPEED_OF_LIGHT_M_S
    p0 = 10.0 ** (-fspl_db(ps.d_m, ps.f_ghz) / 10.0)
    return PathSet(
        delay_s=np.concatenate([[delay0], ps.delay_s]),
        power=np.concatenate([[p0], ps.power]),
        aoa_az_rad=np.concatenate([[0.0], ps.aoa_az_rad]),
        aoa_el_rad=np.concatenate([[ps.alpha_rad], ps.aoa_el_rad]),
        aod_az_rad=np.concatenate([[math.pi], ps.aod_az_rad]),
        aod_el_rad=np.concatenate([[-ps.alpha_rad], ps.aod_el_rad]),
        xpr_db=np.concatenate([[np.nan], ps.xpr_db]),
        is_los=np.concatenate([[True], ps.is_los]),
        d_m=ps.d_m,
        f_ghz=ps.f_ghz,
        alpha_rad=ps.alpha_rad,
    )


_XPR_STD_FLOOR_DB = 0.5


def draw_xpr(
    ps: PathSet, xpr_coeffs: lsp.LspCoefficients, rng: np.random.Generator
) -> PathSet:
    """Per-path cross-polarization ratios from the scenario XPR model."""
    mean = float(lsp.eval_mean(xpr_coeffs, ps.d_m, ps.f_ghz, ps.alpha_rad))
    std = float(lsp.eval_std(xpr_coeffs, ps.f_ghz, ps.alpha_rad))
    if std < _XPR_STD_FLOOR_DB:
        log.warning(
            "XPR std %.2f dB below floor at alpha=%.3f rad; clamped to %.1f dB",
            std, ps.alpha_rad, _XPR_STD_FLOOR_DB,
        )
        std = _XPR_STD_FLOOR_DB
    return replace(ps, xpr_db=rng.normal(mean, std, ps.delay_s.shape))


def synthesize_paths(
    links: LinkTable,
    scenario: str,
    f_ghz: float,
    entries: dict[str, "lsp.ScenarioEntry"],
    rng: np.random.Generator,
) -> PathTable:
    """Deterministic path sets (with direct path) for every link.

    ``entries`` maps "los"/"nlos" to the scenario's coefficient entries;
    the scattered-path power uses the NLOS clutter model, the per-path
    XPR uses the matching state's XPR model (identical for both states
    in the shipped table, so the LOS row simply uses the LOS one).
    Links are processed in table order with a single generator, so the
    output is reproducible from (links, scenario, f, seed) alone.
    """
    sc = SCENARIOS[scenario]
    n = len(links)
    az, dist, hgt = draw_scatterer_batch(sc, n, rng)
    height_m = links.terminals[0].height_m if links.terminals else 1.5
    delay, aoa_az, aoa_el, aod_az, aod_el = _nlos_geometry(
        links.distance_m, links.elevation_rad, az, dist, hgt, height_m
    )

    d_m = links.distance_m
    alpha = links.elevation_rad
    lf = np.log10(f_ghz)
    nlos_pl = entries["nlos"].lsps["PL"]
    nlos_sf = entries["nlos"].lsps["SF"]
    pl_mean = lsp.eval_mean(nlos_pl, d_m, f_ghz, alpha)
    sf_std = lsp.eval_std(nlos_sf, f_ghz, alpha)
    sf_db = sf_std * rng.standard_normal(n)
    total = 10.0 ** (-(pl_mean + sf_db) / 10.0)
    power_nlos = np.repeat((total / sc.n_paths)[:, None], sc.n_paths, axis=1)

    p_los = 10.0 ** (-fspl_db(d_m, f_ghz) / 10.0)
    delay_los = d_m / SPEED_OF_LIGHT_M_S

    xpr = entries["los"].lsps["XPR"]
    xpr_mean = lsp.eval_mean(xpr, d_m, f_ghz, alpha)
    xpr_std = np.maximum(lsp.eval_std(xpr, f_ghz, alpha), _XPR_STD_FLOOR_DB)
    xpr_db = xpr_mean[:, None] + xpr_std[:, None] * rng.standard_normal(
        (n, sc.n_paths + 1)
    )

    zeros = np.zeros((n, 1))
    return PathTable(
        scenario=scenario,
        f_ghz=f_ghz,
        has_los=True,
        term_id=links.term_id.copy(),
        sat_id=links.sat_id.copy(),
        t_s=links.t_s.copy(),
        d_m=d_m.copy(),
        alpha_rad=alpha.copy(),
        delay_s=np.concatenate([delay_los[:, None], delay], axis=1),
        power=np.concatenate([p_los[:, None], power_nlos], axis=1),
        aoa_az_rad=np.concatenate([zeros, aoa_az], axis=1),
        aoa_el_rad=np.concatenate([alpha[:, None], aoa_el], axis=1),
        aod_az_rad=np.concatenate([zeros + math.pi, aod_az], axis=1),
        aod_el_rad=np.concatenate([-alpha[:, None], aod_el], axis=1),
        xpr_db=xpr_db,
    )


def write_path_csv(path: str | Path, table: PathTable) -> None:
    """Path dump plus a JSON sidecar carrying scenario/frequency."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PATH_CSV_HEADER.split(","))
        n, k = table.delay_s.shape
        for i in range(n):
            for j in range(k):
                writer.writerow(
                    [
                        int(table.term_id[i]),
                        int(table.sat_id[i]),
                        f"{table.t_s[i]:.3f}",
                        j,
                        int(table.has_los and j == 0),
                        f"{table.delay_s[i, j]:.15e}",
                        f"{10.0 * math.log10(table.power[i, j]):.9f}",
                        f"{math.degrees(table.aoa_az_rad[i, j]):.9f}",
                        f"{math.degrees(table.aoa_el_rad[i, j]):.9f}",
                        f"{math.degrees(table.aod_az_rad[i, j]):.9f}",
                        f"{math.degrees(table.aod_el_rad[i, j]):.9f}",
                        f"{table.xpr_db[i, j]:.9f}",
                    ]
                )
    meta = path.with_suffix(".meta.json")
    meta.write_text(
        json.dumps(
            {"scenario": table.scenario, "f_ghz": table.f_ghz, "has_los": table.has_los},
            indent=2,
        )
        + "\n"
    )


def read_path_csv(path: str | Path) -> PathTable:
    """Rebuild a PathTable from a dump and its sidecar."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".meta.json").read_text())
    rows = list(csv.reader(open(path, newline="")))
    header, body = rows[0], rows[1:]
    if ",".join(header) != PATH_CSV_HEADER:
        raise ValueError(f"unexpected path CSV header: {header}")
    arr = np.array(body, dtype=float)
    n_paths = int(arr[:, 3].max()) + 1
    n = len(arr) // n_paths
    shaped = arr.reshape(n, n_paths, -1)
    first = shaped[:, 0, :]
    delay = shaped[:, :, 5]
    # Covariates are reconstructed from the direct path: d = c * delay0,
    # alpha = arrival elevation of path 0.
    if not meta["has_los"]:
        raise ValueError("path dumps are written with the direct path present")
    d_m = delay[:, 0] * SPEED_OF_LIGHT_M_S
    alpha = np.radians(shaped[:, 0, 8])
    return PathTable(
        scenario=meta["scenario"],
        f_ghz=float(meta["f_ghz"]),
        has_los=True,
        term_id=first[:, 0].astype(int),
        sat_id=first[:, 1].astype(int),
        t_s=first[:, 2],
        d_m=d_m,
        alpha_rad=alpha,
        delay_s=delay,
        power=10.0 ** (shaped[:, :, 6] / 10.0),
        aoa_az_rad=np.radians(shaped[:, :, 7]),
        aoa_el_rad=np.radians(shaped[:, :, 8]),
        aod_az_rad=np.radians(shaped[:, :, 9]),
        aod_el_rad=np.radians(shaped[:, :, 10]),
        xpr_db=shaped[:, :, 11],
    )
