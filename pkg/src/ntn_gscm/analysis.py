"""Channel statistics extraction, multilinear fitting, and resimulation.

Turns per-link path sets into large-scale parameter samples (path loss,
K-factor, RMS delay spread, four angular spreads, XPR), fits the
seven-coefficient log-linear model to each parameter, regenerates
synthetic links from the fitted table with a cluster-based generator,
and reports fitted-versus-reference coefficient tables.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import lsp
from .constellation import LinkTable
from .environment import PathSet, PathTable
from .lsp import LspCoefficients, LspSampleBatch, ParameterDB, ScenarioEntry

__all__ = [
    "FitResult",
    "ComparisonRow",
    "ComparisonReport",
    "DEFAULT_TOLERANCES",
    "rms_delay_spread",
    "angular_spread",
    "delay_spread_core",
    "angular_spread_core",
    "k_factor",
    "extract_state",
    "extract_all",
    "fit_multilinear",
    "fit_states",
    "fitted_parameter_db",
    "resimulate",
    "compare",
    "write_fit_report",
    "read_fit_report",
    "write_samples_csv",
    "read_samples_csv",
    "write_comparison_csv",
]

log = logging.getLogger(__name__)

SAMPLES_CSV_HEADER = (
    "scenario,state,d_m,f_ghz,alpha_rad,pl_db,sf_db,kf_db,"
    "ds_log10s,asa_log10deg,asd_log10deg,esa_log10deg,esd_log10deg,xpr_db"
)
COMPARISON_CSV_HEADER = "scenario,state,lsp,coeff,fitted,reference,delta,pass"

_MEAN_REGRESSORS = ("mu", "dist_dep", "freq_dep", "elev_dep")
_STD_REGRESSORS = ("std", "std_freq_dep", "std_elev_dep")


# --- Per-link statistics -------------------------------------------------

def delay_spread_core(delay_s, power, axis: int = -1):
    """RMS delay spread: sqrt of the second central moment of the PDP.

    Delays are shifted by their minimum along ``axis`` first; the
    statistic is translation invariant and the shift avoids catastrophic
    cancellation between millisecond absolute delays and nanosecond
    spreads.
    """
    tau = np.asarray(delay_s, dtype=float)
    p = np.asarray(power, dtype=float)
    total = p.sum(axis=axis, keepdims=True)
    if np.any(total <= 0):
        raise ValueError("total power must be positive")
    w = p / total
    tau = tau - tau.min(axis=axis, keepdims=True)
    m1 = (w * tau).sum(axis=axis, keepdims=True)
    m2 = (w * tau * tau).sum(axis=axis, keepdims=True)
    return np.sqrt(np.maximum(m2 - m1 * m1, 0.0)).squeeze(axis)


def angular_spread_core(angle_rad, power, axis: int = -1):
    """Power-weighted circular RMS spread in degrees.

    Angles are wrapped around the power-weighted circular mean before
    taking the second central moment, so the result is invariant under a
    global rotation and saturates near the uniform-circle limit of about
    104 degrees.  Applied unchanged to elevation angles, where the wrap
    never triggers.
    """
    theta = np.asarray(angle_rad, dtype=float)
    p = np.asarray(power, dtype=float)
    total = p.sum(axis=axis, keepdims=True)
    if np.any(total <= 0):
        raise ValueError("total power must be positive")
    w = p / total
    mean_dir = np.angle((w * np.exp(1j * theta)).sum(axis=axis, keepdims=True))
    dev = np.angle(np.exp(1j * (theta - mean_dir)))
    m1 = (w * dev).sum(axis=axis, keepdims=True)
    m2 = (w * dev * dev).sum(axis=axis, keepdims=True)
    return np.degrees(np.sqrt(np.maximum(m2 - m1 * m1, 0.0))).squeeze(axis)


def rms_delay_spread(ps: PathSet) -> float:
    """RMS delay spread of one path set, in seconds."""
    return float(delay_spread_core(ps.delay_s, ps.power))


_ANGLE_FIELDS = {
    "aoa_az": "aoa_az_rad",
    "aod_az": "aod_az_rad",
    "aoa_el": "aoa_el_rad",
    "aod_el": "aod_el_rad",
}


def angular_spread(ps: PathSet, which: str) -> float:
    """Circular angular spread of one path set, in degrees."""
    return float(angular_spread_core(getattr(ps, _ANGLE_FIELDS[which]), ps.power))


def k_factor(ps: PathSet) -> float:
    """Direct-to-scattered power ratio in dB; requires a direct path."""
    if not np.any(ps.is_los):
        raise ValueError("K-factor requires a line-of-sight path")
    p_los = float(ps.power[ps.is_los].sum())
    p_rest = float(ps.power[~ps.is_los].sum())
    return 10.0 * math.log10(p_los / p_rest)


# --- Extraction ----------------------------------------------------------

def extract_state(table: PathTable, state: str) -> LspSampleBatch:
    """One LSP sample per link for the requested channel state.

    "los" uses every path; "nlos" drops the direct path.  Shadow fading
    is left NaN here; it is the residual of the path loss around the
    fitted mean and is filled during the regression pass.
    """
    if state not in ("los", "nlos"):
        raise ValueError(f"state must be 'los' or 'nlos', got {state!r}")
    view = table if state == "los" else table.nlos_view()
    if state == "los" and not table.has_los:
        raise ValueError("path table has no direct path")
    n = len(view)
    power = view.power
    pl = -10.0 * np.log10(power.sum(axis=1))
    ds = delay_spread_core(view.delay_s, power)
    spreads = {
        key: angular_spread_core(getattr(view, fieldname), power)
        for key, fieldname in _ANGLE_FIELDS.items()
    }
    if state == "los":
        # A set with no scattered paths has infinite K; kept as inf and
        # skipped by the regression's finite-value filter.
        with np.errstate(divide="ignore"):
            kf = 10.0 * np.log10(power[:, 0] / power[:, 1:].sum(axis=1))
    else:
        kf = np.full(n, np.nan)
    xpr = view.xpr_db.mean(axis=1)
    with np.errstate(divide="ignore"):
        log_ds = np.log10(ds)
        as_log = {k: np.log10(v) for k, v in spreads.items()}
    return LspSampleBatch(
        scenario=table.scenario,
        state=state,
        d_m=view.d_m.copy(),
        f_ghz=np.full(n, table.f_ghz),
        alpha_rad=view.alpha_rad.copy(),
        pl=pl,
        sf=np.full(n, np.nan),
        kf=kf,
        ds=log_ds,
        asa=as_log["aoa_az"],
        asd=as_log["aod_az"],
        esa=as_log["aoa_el"],
        esd=as_log["aod_el"],
        xpr=xpr,
    )


def extract_all(tables: list[PathTable]) -> list[LspSampleBatch]:
    """Both channel states for every path table, concatenated per state.

    Tables of the same scenario (different frequencies) are merged into
    a single batch per state so one regression sees all frequencies.
    """
    groups: dict[tuple[str, str], list[LspSampleBatch]] = {}
    for table in tables:
        for state in ("los", "nlos"):
            groups.setdefault((table.scenario, state), []).append(
                extract_state(table, state)
            )
    return [_concat_batches(parts) for _, parts in sorted(groups.items())]


def _concat_batches(parts: list[LspSampleBatch]) -> LspSampleBatch:
    first = parts[0]
    if len(parts) == 1:
        return first
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
    return LspSampleBatch(
        scenario=first.scenario,
        state=first.state,
        **{
            name: cat(name)
            for name in (
                "d_m", "f_ghz", "alpha_rad", "pl", "sf", "kf",
                "ds", "asa", "asd", "esa", "esd", "xpr",
            )
        },
    )


# --- Multilinear fit -----------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    """Fitted coefficients for one LSP of one (scenario, state)."""

    scenario: str
    state: str
    lsp: str
    coeffs: LspCoefficients
    residual_rms: float
    n: int
    covariate_ranges: dict[str, tuple[float, float]]
    dropped: tuple[str, ...] = ()


_SPAN_FLOOR = 1e-9


def _ols(design: np.ndarray, y: np.ndarray) -> np.ndarray:
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    return beta


def _fit_columns(y, regs: list[np.ndarray], names: list[str]):
    """Least squares with degenerate-column dropping.

    Columns whose regressor spans less than _SPAN_FLOOR are removed and
    their coefficient reported as 0; the names of dropped columns are
    returned for flagging.
    """
    keep = [i for i, r in enumerate(regs) if np.ptp(r) > _SPAN_FLOOR]
    dropped = [names[i] for i in range(len(regs)) if i not in keep]
    design = np.column_stack([np.ones_like(y)] + [regs[i] for i in keep])
    beta = _ols(design, y)
    coeffs = dict.fromkeys(names, 0.0)
    for slot, i in enumerate(keep):
        coeffs[names[i]] = float(beta[slot + 1])
    resid = y - design @ beta
    return float(beta[0]), coeffs, resid, dropped


def fit_multilinear(samples: LspSampleBatch, lsp_name: str) -> FitResult:
    """Fit the seven-coefficient model to one extracted LSP.

    The mean model is ordinary least squares on [1, log10 d, log10 f,
    log10 alpha]; the standard-deviation model is a second least squares
    of sqrt(pi/2)*|residual| (the half-normal mean correction) on
    [1, log10 f, log10 alpha].
    """
    y = samples.column(lsp_name)
    ok = np.isfinite(y)
    y = y[ok]
    if len(y) < 10 * 4:
        raise ValueError(
            f"{lsp_name}: {len(y)} samples is fewer than 10x the regressor count"
        )
    ld = np.log10(samples.d_m[ok])
    lf = np.log10(samples.f_ghz[ok])
    la = np.log10(samples.alpha_rad[ok])
    mu, mean_coeffs, resid, dropped_mean = _fit_columns(
        y, [ld, lf, la], ["dist_dep", "freq_dep", "elev_dep"]
    )
    std0, std_coeffs, _, dropped_std = _fit_columns(
        np.abs(resid) * math.sqrt(math.pi / 2.0),
        [lf, la],
        ["std_freq_dep", "std_elev_dep"],
    )
    dropped = tuple(dropped_mean) + tuple(f"std:{d}" for d in dropped_std)
    if dropped:
        log.info("%s %s %s: degenerate regressors dropped: %s",
                 samples.scenario, samples.state, lsp_name, dropped)
    return FitResult(
        scenario=samples.scenario,
        state=samples.state,
        lsp=lsp_name,
        coeffs=LspCoefficients(
            mu=mu,
            dist_dep=mean_coeffs["dist_dep"],
            freq_dep=mean_coeffs["freq_dep"],
            elev_dep=mean_coeffs["elev_dep"],
            std=std0,
            std_freq_dep=std_coeffs["std_freq_dep"],
            std_elev_dep=std_coeffs["std_elev_dep"],
        ),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        n=len(y),
        covariate_ranges={
            "d_m": (float(samples.d_m[ok].min()), float(samples.d_m[ok].max())),
            "f_ghz": (float(samples.f_ghz[ok].min()), float(samples.f_ghz[ok].max())),
            "alpha_rad": (
                float(samples.alpha_rad[ok].min()),
                float(samples.alpha_rad[ok].max()),
            ),
        },
        dropped=dropped,
    )


def fit_states(batches: list[LspSampleBatch]) -> list[FitResult]:
    """Fit every LSP of every extracted batch.

    Path loss and shadow fading are two halves of one quantity: the PL
    fit keeps the mean coefficients, its residuals define the per-link
    shadow fading (written back into the batch), and the SF entry
    carries the standard-deviation coefficients.
    """
    results: list[FitResult] = []
    for batch in batches:
        pl_fit = fit_multilinear(batch, "PL")
        mean_pl = (
            pl_fit.coeffs.mu
            + pl_fit.coeffs.dist_dep * np.log10(batch.d_m)
            + pl_fit.coeffs.freq_dep * np.log10(batch.f_ghz)
            + pl_fit.coeffs.elev_dep * np.log10(batch.alpha_rad)
        )
        batch.sf = batch.pl - mean_pl
        results.append(
            replace(pl_fit, coeffs=replace(
                pl_fit.coeffs, std=0.0, std_freq_dep=0.0, std_elev_dep=0.0))
        )
        results.append(
            FitResult(
                scenario=batch.scenario,
                state=batch.state,
                lsp="SF",
                coeffs=LspCoefficients(
                    std=pl_fit.coeffs.std,
                    std_freq_dep=pl_fit.coeffs.std_freq_dep,
                    std_elev_dep=pl_fit.coeffs.std_elev_dep,
                ),
                residual_rms=pl_fit.residual_rms,
                n=pl_fit.n,
                covariate_ranges=pl_fit.covariate_ranges,
                dropped=pl_fit.dropped,
            )
        )
        names = ["DS", "ASA", "ASD", "ESA", "ESD", "XPR"]
        if batch.state == "los":
            names.insert(0, "KF")
        for name in names:
            results.append(fit_multilinear(batch, name))
    return results


def fitted_parameter_db(results: list[FitResult], version: str = "fitted") -> ParameterDB:
    """Assemble fit results into a parameter database (no correlations).

    Cluster structure and decorrelation distances are not estimable from
    this pipeline; resimulation takes them from a reference table.
    """
    grouped: dict[tuple[str, str], dict[str, LspCoefficients]] = {}
    for res in results:
        grouped.setdefault((res.scenario, res.state), {})[res.lsp] = res.coeffs
    entries = {
        key: ScenarioEntry(scenario=key[0], state=key[1], lsps=lsps)
        for key, lsps in grouped.items()
    }
    return ParameterDB(version, entries, correlations={})


# --- Resimulation --------------------------------------------------------

def _wrapped_spread_with_scale(center, g, scale, w_center, w_cluster):
    """Spread (radians) of clusters at center + scale*g plus the center path."""
    ang = center[:, None] + scale[:, None] * g
    full = np.concatenate([center[:, None], ang], axis=1)
    w = np.concatenate([w_center[:, None], w_cluster], axis=1)
    w = w / w.sum(axis=1, keepdims=True)
    mean_dir = np.angle((w * np.exp(1j * full)).sum(axis=1, keepdims=True))
    dev = np.angle(np.exp(1j * (full - mean_dir)))
    m1 = (w * dev).sum(axis=1)
    m2 = (w * dev * dev).sum(axis=1)
    return np.sqrt(np.maximum(m2 - m1 * m1, 0.0))


def _wrapped_spread_of(angles, w):
    w = w / w.sum(axis=1, keepdims=True)
    mean_dir = np.angle((w * np.exp(1j * angles)).sum(axis=1, keepdims=True))
    dev = np.angle(np.exp(1j * (angles - mean_dir)))
    m1 = (w * dev).sum(axis=1)
    m2 = (w * dev * dev).sum(axis=1)
    return np.sqrt(np.maximum(m2 - m1 * m1, 0.0))


_OFFSET_CAP_RAD = 2.85
_OFFSET_FAN_STD = 0.3


def _match_angles(center, g, targets_rad, w_center, w_cluster):
    """Cluster angles whose extracted spread equals the target.

    A centered fan is scaled by bisection (spread is monotone in the
    scale up to the wrap plateau).  Targets above the centered plateau,
    which happens when the drawn spread is larger than a direct-path-
    dominated composite can show, are instead met by displacing a tight
    fan away from the direct path and bisecting the displacement; what
    exceeds even that cap saturates there.
    """
    n = len(center)
    lo = np.zeros(n)
    hi = np.full(n, 64.0)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        spread = _wrapped_spread_with_scale(center, g, mid, w_center, w_cluster)
        grow = spread < targets_rad
        lo = np.where(grow, mid, lo)
        hi = np.where(grow, hi, mid)
    scale = 0.5 * (lo + hi)
    angles = center[:, None] + scale[:, None] * g

    # Displaced-fan fallback for saturated links with a dominant center
    # path (without one, displacement cannot add spread).
    short = (_wrapped_spread_of(
        np.concatenate([center[:, None], angles], axis=1),
        np.concatenate([w_center[:, None], w_cluster], axis=1),
    ) < targets_rad - 1e-9) & (w_center > 1e-9)
    if np.any(short):
        idx = np.flatnonzero(short)
        c_s = center[idx]
        g_s = _OFFSET_FAN_STD * g[idx]
        w_c_s = w_center[idx]
        w_k_s = w_cluster[idx]
        t_s = targets_rad[idx]
        lo = np.zeros(len(idx))
        hi = np.full(len(idx), _OFFSET_CAP_RAD)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            cand = c_s[:, None] + mid[:, None] + g_s
            spread = _wrapped_spread_of(
                np.concatenate([c_s[:, None], cand], axis=1),
                np.concatenate([w_c_s[:, None], w_k_s], axis=1),
            )
            grow = spread < t_s
            lo = np.where(grow, mid, lo)
            hi = np.where(grow, hi, mid)
        angles[idx] = c_s[:, None] + (0.5 * (lo + hi))[:, None] + g_s
    return angles


def resimulate(
    fitted: ParameterDB,
    reference: ParameterDB,
    links: LinkTable,
    scenario: str,
    state: str,
    f_ghz: float,
    rng: np.random.Generator,
) -> LspSampleBatch:
    """Draw LSPs from a fitted table and re-extract from synthetic paths.

    Per link: cluster delays are exponential with the reference delay
    factor, cluster powers follow the single-slope profile, the direct
    path is injected with the drawn K-factor, then delays and angles are
    rescaled so the extracted delay/angular spreads equal the drawn
    values.  The returned batch is what :func:`extract_state` would see,
    closing the generation-extraction loop.
    """
    entry = fitted.entry(scenario, state)
    structure = reference.structure(scenario, state)
    n_clusters = structure.n_clusters
    r_ds = structure.delay_factor
    if n_clusters is None or r_ds is None:
        raise ValueError(f"cluster count / delay factor missing for {scenario} {state}")
    corr = reference.correlation(scenario, state)

    n = len(links)
    d_m = links.distance_m
    alpha = links.elevation_rad
    # Terminals are globally scattered (separations far beyond every
    # decorrelation distance), so the per-link field values are
    # independent standard normals.
    fields = {name: rng.standard_normal(n) for name in (*lsp.LSP_ORDER, "XPR")}
    drawn = lsp.sample_lsps(entry, corr, d_m, f_ghz, alpha, fields)

    ds_lin = 10.0 ** drawn.ds
    has_los = state == "los"
    k_lin = 10.0 ** (drawn.kf / 10.0) if has_los else np.zeros(n)

    u = rng.uniform(0.0, 1.0, (n, n_clusters))
    tau = np.sort(-r_ds * ds_lin[:, None] * np.log(u), axis=1)
    tau -= tau[:, 0:1]
    prof = np.exp(-tau * (r_ds - 1.0) / (r_ds * ds_lin[:, None]))
    prof /= prof.sum(axis=1, keepdims=True)

    w_los = k_lin / (1.0 + k_lin)
    w_cluster = prof / (1.0 + k_lin)[:, None]

    delays = np.concatenate([np.zeros((n, 1)), tau], axis=1)
    weights = np.concatenate([w_los[:, None], w_cluster], axis=1)
    ds_now = delay_spread_core(delays, weights)
    scale = np.where(ds_now > 0, ds_lin / np.maximum(ds_now, 1e-300), 1.0)
    delays *= scale[:, None]

    def cluster_angles(center, target_log10deg):
        g = rng.standard_normal((n, n_clusters))
        target = np.radians(10.0 ** target_log10deg)
        return _match_angles(center, g, target, w_los, w_cluster)

    aoa_az = cluster_angles(np.zeros(n), drawn.asa)
    aod_az = cluster_angles(np.full(n, math.pi), drawn.asd)
    aoa_el = cluster_angles(alpha, drawn.esa)
    aod_el = cluster_angles(-alpha, drawn.esd)

    total = 10.0 ** (-drawn.pl / 10.0)
    powers = weights * total[:, None]

    full = lambda center, clusters: np.concatenate([center[:, None], clusters], axis=1)
    synthetic = PathTable(
        scenario=scenario,
        f_ghz=f_ghz,
        has_los=has_los,
        term_id=links.term_id.copy(),
        sat_id=links.sat_id.copy(),
        t_s=links.t_s.copy(),
        d_m=d_m.copy(),
        alpha_rad=alpha.copy(),
        delay_s=delays,
        power=powers,
        aoa_az_rad=full(np.zeros(n), aoa_az),
        aoa_el_rad=full(alpha, aoa_el),
        aod_az_rad=full(np.full(n, math.pi), aod_az),
        aod_el_rad=full(-alpha, aod_el),
        xpr_db=np.repeat(drawn.xpr[:, None], n_clusters + 1, axis=1),
    )
    if not has_los:
        # Drop the placeholder center path: NLOS sets are clusters only.
        synthetic = replace(
            synthetic,
            delay_s=delays[:, 1:],
            power=powers[:, 1:] * (total / powers[:, 1:].sum(axis=1))[:, None],
            aoa_az_rad=aoa_az,
            aoa_el_rad=aoa_el,
            aod_az_rad=aod_az,
            aod_el_rad=aod_el,
            xpr_db=np.repeat(drawn.xpr[:, None], n_clusters, axis=1),
        )
        return extract_state(synthetic, "nlos")
    return extract_state(synthetic, "los")


# --- Comparison ----------------------------------------------------------

#: Default gated coefficients; everything else is reported ungated.
DEFAULT_TOLERANCES: dict[str, float] = {
    "DS.mu": 0.15,
    "KF.mu": 1.5,
    "PL.freq_dep": 1.5,
}

_COEFF_FIELDS = (
    "mu", "dist_dep", "freq_dep", "elev_dep", "std", "std_freq_dep", "std_elev_dep",
)


@dataclass(frozen=True)
class ComparisonRow:
    scenario: str
    state: str
    lsp: str
    coeff: str
    fitted: float
    reference: float
    delta: float
    passed: bool | None  # None = not gated


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    missing: list[str] = field(default_factory=list)

    @property
    def n_failures(self) -> int:
        return sum(1 for r in self.rows if r.passed is False)


def compare(
    fitted: ParameterDB,
    reference: ParameterDB,
    tolerances: dict[str, float] | None = None,
) -> ComparisonReport:
    """Coefficient-by-coefficient deltas between two parameter tables.

    Rows cover every coefficient of every LSP present in the fitted
    table; reference entries that are absent are listed in ``missing``
    rather than failing.  A row is gated pass/fail only when a tolerance
    is configured for its "LSP.coeff" key.
    """
    tol = dict(DEFAULT_TOLERANCES if tolerances is None else tolerances)
    rows: list[ComparisonRow] = []
    missing: list[str] = []
    for (scenario, state), entry in sorted(fitted.entries.items()):
        try:
            ref_entry = reference.entry(scenario, state)
        except KeyError:
            missing.append(f"{scenario}/{state}")
            continue
        for lsp_name in sorted(entry.lsps):
            if lsp_name not in ref_entry.lsps:
                missing.append(f"{scenario}/{state}/{lsp_name}")
                continue
            fit_c = entry.lsps[lsp_name]
            ref_c = ref_entry.lsps[lsp_name]
            for coeff_name in _COEFF_FIELDS:
                fitted_v = getattr(fit_c, coeff_name)
                ref_v = getattr(ref_c, coeff_name)
                delta = fitted_v - ref_v
                key = f"{lsp_name}.{coeff_name}"
                passed = abs(delta) <= tol[key] if key in tol else None
                rows.append(
                    ComparisonRow(
                        scenario, state, lsp_name, coeff_name,
                        fitted_v, ref_v, delta, passed,
                    )
                )
    return ComparisonReport(rows, missing)


# --- File formats --------------------------------------------------------

def write_fit_report(path: str | Path, results: list[FitResult]) -> None:
    records = [
        {
            "scenario": r.scenario,
            "state": r.state,
            "lsp": r.lsp,
            "coeffs": {name: getattr(r.coeffs, name) for name in _COEFF_FIELDS},
            "residual_rms": r.residual_rms,
            "n": r.n,
            "covariates": {k: list(v) for k, v in r.covariate_ranges.items()},
            "dropped": list(r.dropped),
        }
        for r in results
    ]
    Path(path).write_text(json.dumps(records, indent=1, sort_keys=True) + "\n")


def read_fit_report(path: str | Path) -> list[FitResult]:
    records = json.loads(Path(path).read_text())
    return [
        FitResult(
            scenario=rec["scenario"],
            state=rec["state"],
            lsp=rec["lsp"],
            coeffs=LspCoefficients(**rec["coeffs"]),
            residual_rms=rec["residual_rms"],
            n=rec["n"],
            covariate_ranges={k: tuple(v) for k, v in rec["covariates"].items()},
            dropped=tuple(rec.get("dropped", ())),
        )
        for rec in records
    ]


def write_samples_csv(path: str | Path, batches: list[LspSampleBatch]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLES_CSV_HEADER.split(","))
        for b in batches:
            for i in range(len(b)):
                writer.writerow(
                    [b.scenario, b.state]
                    + [
                        f"{getattr(b, name)[i]:.9g}"
                        for name in (
                            "d_m", "f_ghz", "alpha_rad", "pl", "sf", "kf",
                            "ds", "asa", "asd", "esa", "esd", "xpr",
                        )
                    ]
                )


def read_samples_csv(path: str | Path) -> list[LspSampleBatch]:
    rows = list(csv.reader(open(path, newline="")))
    header, body = rows[0], rows[1:]
    if ",".join(header) != SAMPLES_CSV_HEADER:
        raise ValueError(f"unexpected samples CSV header: {header}")
    groups: dict[tuple[str, str], list[list[str]]] = {}
    for row in body:
        groups.setdefault((row[0], row[1]), []).append(row[2:])
    batches = []
    names = ["d_m", "f_ghz", "alpha_rad", "pl", "sf", "kf",
             "ds", "asa", "asd", "esa", "esd", "xpr"]
    for (scenario, state), recs in sorted(groups.items()):
        arr = np.array(recs, dtype=float)
        batches.append(
            LspSampleBatch(
                scenario=scenario,
                state=state,
                **{name: arr[:, i] for i, name in enumerate(names)},
            )
        )
    return batches


def write_comparison_csv(path: str | Path, report: ComparisonReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARISON_CSV_HEADER.split(","))
        for r in report.rows:
            writer.writerow(
                [
                    r.scenario, r.state, r.lsp, r.coeff,
                    f"{r.fitted:.6g}", f"{r.reference:.6g}", f"{r.delta:.6g}",
                    "" if r.passed is None else int(r.passed),
                ]
            )
