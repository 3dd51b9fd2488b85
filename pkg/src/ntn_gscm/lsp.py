"""Large-scale parameter model: coefficient database, evaluation, sampling.

Each large-scale parameter (path loss, shadow fading, K-factor, delay
spread, the four angular spreads, XPR) follows the same seven-parameter
model: a reference value at 1 m, 1 GHz and 1 rad elevation with
log-linear distance/frequency/elevation slopes for the mean, plus a
reference standard deviation with log-linear frequency/elevation slopes:

    V = mu + dist_dep*log10(d_m) + freq_dep*log10(f_GHz)
           + elev_dep*log10(alpha_rad)
        + X * (std + std_freq_dep*log10(f_GHz) + std_elev_dep*log10(alpha_rad))

where X is a zero-mean unit-variance Gaussian.  The X's of different
parameters are cross-correlated per scenario/state and spatially
correlated with per-parameter decorrelation distances.

The shipped coefficient database (``data/sat_lsp_params.json``) covers
four environments (DenseUrban, Urban, Suburban, Rural) in LOS and NLOS
states plus two resimulation reference columns, and the inter-parameter
correlation matrices over {DS, KF, SF, ASD, ASA, ESD, ESA}.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "LSP_ORDER",
    "LSP_NAMES",
    "LspCoefficients",
    "ScenarioEntry",
    "ParameterDB",
    "LspSampleBatch",
    "load_parameter_table",
    "default_params_path",
    "eval_mean",
    "eval_std",
    "correlated_field",
    "corr_matrix_sqrt",
    "sample_lsps",
]

log = logging.getLogger(__name__)

#: Order of the cross-correlated parameters (rows of the 7x7 matrices).
LSP_ORDER = ("DS", "KF", "SF", "ASD", "ASA", "ESD", "ESA")

#: All modeled parameters, including the two outside the mixing matrix.
LSP_NAMES = ("PL", "SF", "KF", "DS", "ASA", "ASD", "ESA", "ESD", "XPR")


@dataclass(frozen=True)
class LspCoefficients:
    """Seven model coefficients plus decorrelation distance for one LSP.

    Units follow the parameter: dB for PL/SF/KF/XPR, log10(seconds) for
    DS, log10(degrees) for angular spreads; slopes are per decade of the
    respective covariate.  ``decorr_dist_m`` is None where undefined.
    """

    mu: float = 0.0
    dist_dep: float = 0.0
    freq_dep: float = 0.0
    elev_dep: float = 0.0
    std: float = 0.0
    std_freq_dep: float = 0.0
    std_elev_dep: float = 0.0
    decorr_dist_m: float | None = None


@dataclass(frozen=True)
class ScenarioEntry:
    """Coefficients and cluster-structure constants for one (scenario, state)."""

    scenario: str
    state: str  # "los" | "nlos"
    lsps: dict[str, LspCoefficients]
    n_clusters: int | None = None
    delay_factor: float | None = None
    cluster_ds_ns_mu: float | None = None
    cluster_ds_ns_freq_dep: float | None = None
    cluster_asa_deg: float | None = None
    cluster_esa_deg: float | None = None


@dataclass
class ParameterDB:
    """Full coefficient database: scenario tables plus correlations."""

    version: str
    entries: dict[tuple[str, str], ScenarioEntry]
    correlations: dict[tuple[str, str], np.ndarray]
    base_scenario: dict[str, str] = field(default_factory=dict)

    def scenario_names(self) -> list[str]:
        return sorted({k[0] for k in self.entries})

    def entry(self, scenario: str, state: str) -> ScenarioEntry:
        try:
            return self.entries[(scenario, state)]
        except KeyError:
            raise KeyError(f"no parameter entry for ({scenario}, {state})") from None

    def correlation(self, scenario: str, state: str) -> np.ndarray:
        """Correlation matrix; resimulation columns fall back to their base."""
        key = (scenario, state)
        if key not in self.correlations and scenario in self.base_scenario:
            base = self.base_scenario[scenario]
            log.info("correlations for %s fall back to %s", scenario, base)
            key = (base, state)
        return self.correlations[key]

    def structure(self, scenario: str, state: str) -> ScenarioEntry:
        """Entry whose cluster structure (L, delay factor) is populated.

        Resimulation columns carry no delay factor; they fall back to
        the base scenario they were derived from.
        """
        entry = self.entry(scenario, state)
        if entry.delay_factor is None and scenario in self.base_scenario:
            base = self.base_scenario[scenario]
            log.info("cluster structure for %s falls back to %s", scenario, base)
            return self.entry(base, state)
        return entry

    def decorr_dist(self, scenario: str, state: str, lsp: str) -> float | None:
        """Decorrelation distance with base-scenario fallback for resim columns."""
        lam = self.entry(scenario, state).lsps[lsp].decorr_dist_m
        if lam is None and scenario in self.base_scenario:
            base = self.base_scenario[scenario]
            lam = self.entry(base, state).lsps[lsp].decorr_dist_m
        return lam


def default_params_path() -> Path:
    return Path(str(resources.files("ntn_gscm").joinpath("data/sat_lsp_params.json")))


def load_parameter_table(path: str | Path | None = None) -> ParameterDB:
    """Load the bundled coefficient database or a user override."""
    raw = json.loads(Path(path or default_params_path()).read_text())
    entries: dict[tuple[str, str], ScenarioEntry] = {}
    base: dict[str, str] = {}
    for scen, states in raw["scenarios"].items():
        for state, blob in states.items():
            if state == "base_scenario":
                base[scen] = blob
                continue
            lsps = {
                name: LspCoefficients(**coeffs)
                for name, coeffs in blob["lsps"].items()
            }
            entries[(scen, state)] = ScenarioEntry(
                scenario=scen,
                state=state,
                lsps=lsps,
                n_clusters=blob.get("n_clusters"),
                delay_factor=blob.get("delay_factor"),
                cluster_ds_ns_mu=blob.get("cluster_ds_ns_mu"),
                cluster_ds_ns_freq_dep=blob.get("cluster_ds_ns_freq_dep"),
                cluster_asa_deg=blob.get("cluster_asa_deg"),
                cluster_esa_deg=blob.get("cluster_esa_deg"),
            )
    order = tuple(raw["correlations"]["lsp_order"])
    if order != LSP_ORDER:
        raise ValueError(f"unexpected correlation order {order}")
    corrs = {
        (scen, state): np.asarray(mats[state], dtype=float)
        for scen, mats in raw["correlations"].items()
        if scen != "lsp_order"
        for state in ("los", "nlos")
    }
    for key, mat in corrs.items():
        if mat.shape != (7, 7) or not np.allclose(mat, mat.T) or not np.allclose(np.diag(mat), 1.0):
            raise ValueError(f"correlation matrix for {key} is not symmetric with unit diagonal")
    return ParameterDB(raw["version"], entries, corrs, base)


def _validate_covariates(d_m, f_ghz, alpha_rad):
    d = np.asarray(d_m, dtype=float)
    f = np.asarray(f_ghz, dtype=float)
    a = np.asarray(alpha_rad, dtype=float)
    if np.any(d <= 0) or np.any(f <= 0) or np.any(a <= 0):
        raise ValueError("covariates d, f, alpha must be positive")
    if np.any(a > math.pi / 2):
        raise ValueError("elevation above pi/2")
    return d, f, a


def eval_mean(c: LspCoefficients, d_m, f_ghz, alpha_rad):
    """Mean-model value at the given covariates."""
    d, f, a = _validate_covariates(d_m, f_ghz, alpha_rad)
    return (
        c.mu
        + c.dist_dep * np.log10(d)
        + c.freq_dep * np.log10(f)
        + c.elev_dep * np.log10(a)
    )


def eval_std(c: LspCoefficients, f_ghz, alpha_rad):
    """Standard-deviation model, clamped at zero (clamping is logged)."""
    f = np.asarray(f_ghz, dtype=float)
    a = np.asarray(alpha_rad, dtype=float)
    if np.any(f <= 0) or np.any(a <= 0):
        raise ValueError("covariates f, alpha must be positive")
    raw = c.std + c.std_freq_dep * np.log10(f) + c.std_elev_dep * np.log10(a)
    if np.any(raw < 0):
        log.warning("negative model STD clamped to 0 (min %.3f)", float(np.min(raw)))
    return np.maximum(raw, 0.0)


# --- Spatially correlated Gaussian fields -------------------------------

#: Positions farther apart than this many decorrelation distances are
#: treated as independent (exp(-8) < 4e-4 residual correlation).
_CLUSTER_CUTOFF = 8.0
_GRID_STEP_FRACTION = 1.0 / 8.0
_GRID_PAD = 4.0


def _field_grid(extent_x, extent_y, lam, rng):
    """White-noise grid filtered so the field autocorrelation is exp(-r/lam).

    The filter transfer function is the square root of the power
    spectrum of the exponential correlation sampled on the grid, which
    (unlike convolving with the exponential kernel itself) reproduces
    the exponential decay of the field correlation.
    """
    step = lam * _GRID_STEP_FRACTION
    pad = lam * _GRID_PAD
    nx = max(int(math.ceil((extent_x + 2 * pad) / step)) + 1, 8)
    ny = max(int(math.ceil((extent_y + 2 * pad) / step)) + 1, 8)
    if nx * ny > 4e7:
        raise ValueError(
            f"field grid of {nx}x{ny} cells is too large; positions span "
            f"{extent_x:.0f}x{extent_y:.0f} m at lambda={lam:.0f} m"
        )
    ix = np.arange(nx)
    iy = np.arange(ny)
    # Circulant distances so the target ACF is sampled symmetrically.
    dx = np.minimum(ix, nx - ix) * step
    dy = np.minimum(iy, ny - iy) * step
    r = np.hypot(dx[:, None], dy[None, :])
    spectrum = np.fft.rfft2(np.exp(-r / lam)).real
    transfer = np.sqrt(np.maximum(spectrum, 0.0))
    white = rng.standard_normal((nx, ny))
    grid = np.fft.irfft2(np.fft.rfft2(white) * transfer, s=(nx, ny))
    grid /= grid.std()
    return grid, step, pad


def _bilinear(grid, step, x, y):
    nx, ny = grid.shape
    gx = np.clip(x / step, 0.0, nx - 1.000001)
    gy = np.clip(y / step, 0.0, ny - 1.000001)
    ix = gx.astype(int)
    iy = gy.astype(int)
    fx = gx - ix
    fy = gy - iy
    return (
        grid[ix, iy] * (1 - fx) * (1 - fy)
        + grid[ix + 1, iy] * fx * (1 - fy)
        + grid[ix, iy + 1] * (1 - fx) * fy
        + grid[ix + 1, iy + 1] * fx * fy
    )


def _proximity_clusters(positions: np.ndarray, cutoff: float) -> list[np.ndarray]:
    """Groups such that positions within ``cutoff`` share a group.

    Positions are hashed to cells of side ``cutoff`` and occupied cells
    are merged with their 8 neighbors (union-find).  This can merge
    points farther apart than the cutoff, which is harmless: a shared
    field grid is correct at every separation, grouping only bounds the
    grid extent.
    """
    cell = np.floor(positions / cutoff).astype(np.int64)
    cells = {tuple(c) for c in cell}
    parent: dict[tuple[int, int], tuple[int, int]] = {c: c for c in cells}

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    for cx, cy in cells:
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                neighbor = (cx + ox, cy + oy)
                if neighbor in parent:
                    parent[find((cx, cy))] = find(neighbor)

    groups: dict[tuple[int, int], list[int]] = {}
    for i, c in enumerate(map(tuple, cell)):
        groups.setdefault(find(c), []).append(i)
    # Deterministic order: by smallest member index.
    return [np.array(g) for g in sorted(groups.values(), key=min)]


def correlated_field(
    positions_m, decorr_dist_m: float, rng: np.random.Generator
) -> np.ndarray:
    """Zero-mean unit-variance Gaussian field with exp(-d/lambda) correlation.

    Positions are (n, 2) meters.  Nearby positions are evaluated on a
    shared filtered white-noise grid with bilinear interpolation;
    positions separated by more than 8 lambda are independent, so the
    grid only ever spans the extent of each nearby group.
    """
    if decorr_dist_m <= 0:
        raise ValueError("decorrelation distance must be positive")
    positions = np.atleast_2d(np.asarray(positions_m, dtype=float))
    values = np.empty(len(positions))
    for idx in _proximity_clusters(positions, _CLUSTER_CUTOFF * decorr_dist_m):
        pts = positions[idx]
        if len(idx) == 1:
            values[idx] = rng.standard_normal()
            continue
        lo = pts.min(axis=0)
        extent = pts.max(axis=0) - lo
        grid, step, pad = _field_grid(extent[0], extent[1], decorr_dist_m, rng)
        values[idx] = _bilinear(grid, step, pts[:, 0] - lo[0] + pad, pts[:, 1] - lo[1] + pad)
    return values


def corr_matrix_sqrt(corr: np.ndarray) -> np.ndarray:
    """Symmetric square root with non-PSD repair.

    Negative eigenvalues are clipped to zero and the diagonal
    renormalized to one; a warning reports the smallest eigenvalue when
    repair changes anything.
    """
    corr = np.asarray(corr, dtype=float)
    eigval, eigvec = np.linalg.eigh(corr)
    if eigval.min() < -1e-12:
        log.warning(
            "correlation matrix not positive semidefinite (min eigenvalue "
            "%.4f); clipping", float(eigval.min()),
        )
        rebuilt = (eigvec * np.clip(eigval, 0.0, None)) @ eigvec.T
        d = np.sqrt(np.diag(rebuilt))
        corr = rebuilt / np.outer(d, d)
        eigval, eigvec = np.linalg.eigh(corr)
    return (eigvec * np.sqrt(np.clip(eigval, 0.0, None))) @ eigvec.T


@dataclass
class LspSampleBatch:
    """Realized LSPs for a batch of links (column arrays).

    ``pl`` is the realized path loss (mean + shadow fading), ``sf`` the
    shadow-fading deviation; ``kf`` is NaN for NLOS states; ``ds`` is
    log10(seconds) and the angular spreads log10(degrees).
    """

    scenario: str
    state: str
    d_m: np.ndarray
    f_ghz: np.ndarray
    alpha_rad: np.ndarray
    pl: np.ndarray
    sf: np.ndarray
    kf: np.ndarray
    ds: np.ndarray
    asa: np.ndarray
    asd: np.ndarray
    esa: np.ndarray
    esd: np.ndarray
    xpr: np.ndarray

    def __len__(self) -> int:
        return len(self.d_m)

    def column(self, lsp: str) -> np.ndarray:
        return getattr(self, lsp.lower())


def sample_lsps(
    entry: ScenarioEntry,
    corr: np.ndarray,
    d_m,
    f_ghz,
    alpha_rad,
    fields: dict[str, np.ndarray],
    decorr: dict[str, float | None] | None = None,
) -> LspSampleBatch:
    """Draw cross-correlated LSPs for a batch of links.

    ``fields`` maps each name in LSP_ORDER plus "XPR" to unit-variance
    Gaussian field values at the link positions (spatially correlated if
    the caller used :func:`correlated_field`).  The seven mixing fields
    are combined with the symmetric square root of the correlation
    matrix; XPR stays independent.  PL uses the SF mixing component for
    its random part.
    """
    d, f, a = _validate_covariates(d_m, f_ghz, alpha_rad)
    xi = np.stack([np.asarray(fields[name], dtype=float) for name in LSP_ORDER])
    mixed = corr_matrix_sqrt(corr) @ xi
    x = {name: mixed[i] for i, name in enumerate(LSP_ORDER)}

    def realize(name: str, x_val: np.ndarray) -> np.ndarray:
        c = entry.lsps[name]
        return eval_mean(c, d, f, a) + eval_std(c, f, a) * x_val

    sf = eval_std(entry.lsps["SF"], f, a) * x["SF"]
    pl = eval_mean(entry.lsps["PL"], d, f, a) + sf
    if entry.state == "los":
        kf = realize("KF", x["KF"])
    else:
        kf = np.full(len(np.atleast_1d(d)), np.nan)
    return LspSampleBatch(
        scenario=entry.scenario,
        state=entry.state,
        d_m=np.atleast_1d(d).astype(float),
        f_ghz=np.broadcast_to(np.asarray(f, dtype=float), np.atleast_1d(d).shape).copy(),
        alpha_rad=np.atleast_1d(a).astype(float),
        pl=np.atleast_1d(pl),
        sf=np.atleast_1d(sf),
        kf=np.atleast_1d(kf),
        ds=np.atleast_1d(realize("DS", x["DS"])),
        asa=np.atleast_1d(realize("ASA", x["ASA"])),
        asd=np.atleast_1d(realize("ASD", x["ASD"])),
        esa=np.atleast_1d(realize("ESA", x["ESA"])),
        esd=np.atleast_1d(realize("ESD", x["ESD"])),
        xpr=np.atleast_1d(realize("XPR", np.asarray(fields["XPR"], dtype=float))),
    )
