"""Pipeline driver: run every stage from one configuration file.

Stages communicate only through files in the output directory, so any
stage can be re-run from its inputs and reproduces downstream outputs
byte-identically.  Per-stage randomness comes from streams derived from
(master seed, stage, scenario index, frequency index), which makes
results independent of the worker count.

Exit codes: 0 success, 1 configuration error, 2 runtime fault,
3 comparison failures beyond tolerance.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, constellation, environment, frames, lsp, orbit
from .config import STAGES, ConfigError, RunConfig, load_config
from .constellation import LinkTable, WalkerSpec
from .frames import TerminalLocation

log = logging.getLogger(__name__)

TERMINALS_CSV_HEADER = "term_id,lon_deg,lat_deg,height_m"

# Stage tags for derived random streams.
_TAG_TERMINALS = 1
_TAG_ENVIRONMENT = 2
_TAG_RESIM = 3


def _stage_rng(cfg: RunConfig, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((cfg.seed, *tags)))


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _shell_tag(spec: WalkerSpec) -> str:
    return f"h{int(round(spec.altitude_km))}"


def _named_constellation(cfg: RunConfig) -> list[tuple[str, orbit.OrbitalElements]]:
    if cfg.elements_file is not None:
        return orbit.load_elements_json(cfg.elements_file)
    named = []
    for spec in cfg.shells:
        names = constellation.walker_names(spec, _shell_tag(spec))
        named.extend(zip(names, constellation.walker_delta(spec)))
    return named


# --- Stages --------------------------------------------------------------

def stage_propagate(cfg: RunConfig) -> None:
    named = _named_constellation(cfg)
    orbit.save_elements_json(cfg.out / "elements.json", named)
    tracks_dir = cfg.out / "tracks"
    tracks_dir.mkdir(parents=True, exist_ok=True)
    times = cfg.times_s()
    for name, el in named:
        orbit.write_track_csv(
            tracks_dir / f"{name}.csv", orbit.propagate_arrays(el, times)
        )
    log.info("propagated %d satellites over %d samples", len(named), len(times))


def _write_terminals_csv(path: Path, terminals: list[TerminalLocation]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TERMINALS_CSV_HEADER.split(","))
        for i, t in enumerate(terminals):
            writer.writerow(
                [
                    i,
                    f"{math.degrees(t.lon_rad):.9f}",
                    f"{math.degrees(t.lat_rad):.9f}",
                    f"{t.height_m:.3f}",
                ]
            )


def _read_terminals_csv(path: Path) -> list[TerminalLocation]:
    rows = list(csv.reader(open(path, newline="")))
    if ",".join(rows[0]) != TERMINALS_CSV_HEADER:
        raise ValueError(f"unexpected terminals CSV header: {rows[0]}")
    return [
        TerminalLocation(
            lon_rad=math.radians(float(r[1])),
            lat_rad=math.radians(float(r[2])),
            height_m=float(r[3]),
        )
        for r in rows[1:]
    ]


def stage_links(cfg: RunConfig) -> None:
    named = orbit.load_elements_json(cfg.out / "elements.json")
    term_seed = cfg.terminal_seed
    rng = (
        np.random.default_rng(np.random.SeedSequence((term_seed,)))
        if term_seed is not None
        else _stage_rng(cfg, _TAG_TERMINALS)
    )
    terminals = constellation.sample_terminals(
        cfg.terminal_count,
        rng,
        math.radians(cfg.terminal_lat_limit_deg),
        cfg.terminal_height_m,
    )
    _write_terminals_csv(cfg.out / "terminals.csv", terminals)
    links = constellation.enumerate_links(
        [el for _, el in named],
        terminals,
        cfg.times_s(),
        math.radians(cfg.min_elev_deg),
    )
    if cfg.max_links is not None and len(links) > cfg.max_links:
        links = _head_links(links, cfg.max_links)
    constellation.write_link_csv(cfg.out / "links.csv", links)
    if len(links) == 0:
        log.warning("no visible links for this configuration")
    else:
        log.info("enumerated %d links", len(links))
    names = [n for n, _ in named]
    for term_id, sat_id in cfg.pass_tables:
        _emit_pass_table(cfg, named, terminals, term_id, sat_id, names[sat_id])


def _head_links(links: LinkTable, n: int) -> LinkTable:
    from dataclasses import replace

    return replace(
        links,
        term_id=links.term_id[:n],
        sat_id=links.sat_id[:n],
        t_s=links.t_s[:n],
        distance_m=links.distance_m[:n],
        elevation_rad=links.elevation_rad[:n],
        sat_azimuth_rad=links.sat_azimuth_rad[:n],
        heading_rad=links.heading_rad[:n],
    )


def _emit_pass_table(cfg, named, terminals, term_id, sat_id, sat_name) -> None:
    times = cfg.times_s()
    el = named[sat_id][1]
    u = terminals[term_id]
    track = orbit.propagate_arrays(el, times)
    track_next = orbit.propagate_arrays(el, times + frames.DIRECTION_STEP_S)
    pos = frames.sph_to_cart(track.lon_rad, track.lat_rad, track.radius_km)
    pos_next = frames.sph_to_cart(
        track_next.lon_rad, track_next.lat_rad, track_next.radius_km
    )
    q, alpha, bank, heading, tilt = frames.mt_frame_states(pos, pos_next, u)
    frames.write_pass_table(
        cfg.out / f"pass_t{term_id}_{sat_name}.csv", times, q, alpha, bank, heading, tilt
    )


def _load_links(cfg: RunConfig) -> LinkTable:
    terminals = _read_terminals_csv(cfg.out / "terminals.csv")
    return constellation.read_link_csv(cfg.out / "links.csv", terminals)


def _path_file(cfg: RunConfig, scenario: str, f_ghz: float) -> Path:
    return cfg.out / f"paths_{scenario}_{f_ghz:g}GHz.csv"


def stage_environment(cfg: RunConfig) -> None:
    links = _load_links(cfg)
    db = lsp.load_parameter_table(cfg.params)
    jobs = []
    for si, scenario in enumerate(cfg.scenarios):
        for fi, f_ghz in enumerate(cfg.frequencies_ghz):
            jobs.append((si, scenario, fi, f_ghz))

    def run_one(job):
        si, scenario, fi, f_ghz = job
        rng = _stage_rng(cfg, _TAG_ENVIRONMENT, si, fi)
        entries = {
            "los": db.entry(scenario, "los"),
            "nlos": db.entry(scenario, "nlos"),
        }
        table = environment.synthesize_paths(links, scenario, f_ghz, entries, rng)
        environment.write_path_csv(_path_file(cfg, scenario, f_ghz), table)
        return scenario, f_ghz, len(table)

    for scenario, f_ghz, n in _map_jobs(run_one, jobs, cfg.jobs):
        log.info("environment %s @%g GHz: %d links", scenario, f_ghz, n)


def stage_extract(cfg: RunConfig) -> None:
    tables = [
        environment.read_path_csv(_path_file(cfg, scenario, f_ghz))
        for scenario in cfg.scenarios
        for f_ghz in cfg.frequencies_ghz
    ]
    batches = analysis.extract_all(tables)
    analysis.write_samples_csv(cfg.out / "samples.csv", batches)
    log.info("extracted %d sample batches", len(batches))


def stage_fit(cfg: RunConfig) -> None:
    batches = analysis.read_samples_csv(cfg.out / "samples.csv")
    results = analysis.fit_states(batches)
    analysis.write_fit_report(cfg.out / "fit-report.json", results)
    if cfg.emit_plotdata:
        _emit_plotdata(cfg, analysis.fitted_parameter_db(results))
    log.info("fitted %d LSP tables", len(results))


def stage_resimulate(cfg: RunConfig) -> None:
    links = _load_links(cfg)
    fitted = analysis.fitted_parameter_db(
        analysis.read_fit_report(cfg.out / "fit-report.json")
    )
    reference = lsp.load_parameter_table(cfg.params)
    jobs = []
    for si, scenario in enumerate(cfg.scenarios):
        for fi, f_ghz in enumerate(cfg.frequencies_ghz):
            for sti, state in enumerate(("los", "nlos")):
                jobs.append((si, scenario, fi, f_ghz, sti, state))

    def run_one(job):
        si, scenario, fi, f_ghz, sti, state = job
        rng = _stage_rng(cfg, _TAG_RESIM, si, fi, sti)
        return analysis.resimulate(fitted, reference, links, scenario, state, f_ghz, rng)

    resim_batches = _map_jobs(run_one, jobs, cfg.jobs)
    merged: dict[tuple[str, str], list] = {}
    for b in resim_batches:
        merged.setdefault((b.scenario, b.state), []).append(b)
    combined = [analysis._concat_batches(v) for _, v in sorted(merged.items())]
    analysis.write_samples_csv(cfg.out / "resim-samples.csv", combined)
    resim_fit = analysis.fit_states(combined)
    analysis.write_fit_report(cfg.out / "resim-fit-report.json", resim_fit)
    log.info("resimulated %d batches", len(combined))


def stage_compare(cfg: RunConfig) -> int:
    reference = lsp.load_parameter_table(cfg.params)
    fitted = analysis.fitted_parameter_db(
        analysis.read_fit_report(cfg.out / "fit-report.json")
    )
    report = analysis.compare(fitted, reference, cfg.tolerances)
    analysis.write_comparison_csv(cfg.out / "comparison.csv", report)
    resim_path = cfg.out / "resim-fit-report.json"
    if resim_path.exists():
        resim_fit = analysis.fitted_parameter_db(analysis.read_fit_report(resim_path))
        resim_report = analysis.compare(resim_fit, fitted, cfg.tolerances)
        analysis.write_comparison_csv(cfg.out / "resim-comparison.csv", resim_report)
    if report.missing:
        log.warning("reference rows missing: %s", ", ".join(report.missing))
    if report.n_failures:
        log.error("%d comparison rows beyond tolerance", report.n_failures)
        return 3
    return 0


def _emit_plotdata(cfg: RunConfig, fitted) -> None:
    plot_dir = cfg.out / "plotdata"
    plot_dir.mkdir(parents=True, exist_ok=True)
    alt_km = cfg.shells[0].altitude_km if cfg.shells else 550.0
    elev_deg = np.arange(5.0, 90.1, 5.0)
    d_m = constellation.slant_range_km(np.radians(elev_deg), alt_km) * 1000.0
    for (scenario, state), entry in sorted(fitted.entries.items()):
        for lsp_name, coeffs in sorted(entry.lsps.items()):
            out = plot_dir / f"{scenario}_{state}_{lsp_name}.csv"
            with open(out, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["elev_deg", "f_ghz", "d_m", "mean", "std"])
                for f_ghz in cfg.frequencies_ghz:
                    mean = lsp.eval_mean(coeffs, d_m, f_ghz, np.radians(elev_deg))
                    std = lsp.eval_std(coeffs, f_ghz, np.radians(elev_deg))
                    std = np.broadcast_to(std, mean.shape)
                    for e, d, m, s in zip(elev_deg, d_m, mean, std):
                        writer.writerow(
                            [f"{e:g}", f"{f_ghz:g}", f"{d:.3f}", f"{m:.9g}", f"{s:.9g}"]
                        )


_STAGE_FNS = {
    "propagate": stage_propagate,
    "links": stage_links,
    "environment": stage_environment,
    "extract": stage_extract,
    "fit": stage_fit,
    "resimulate": stage_resimulate,
    "compare": stage_compare,
}


def run(cfg: RunConfig) -> int:
    """Execute the configured stages in pipeline order."""
    cfg.write_echo()
    status = 0
    for stage in STAGES:
        if stage not in cfg.stages:
            continue
        log.info("stage %s", stage)
        result = _STAGE_FNS[stage](cfg)
        if stage == "compare" and result:
            status = result
    return status


# --- Command line --------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ntn-gscm",
        description="Satellite channel parameter pipeline "
        "(propagate -> links -> environment -> extract -> fit -> resimulate -> compare)",
    )
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "run"):
        p = sub.add_parser(name, help=f"{name} stage" if name != "run" else "all stages")
        p.add_argument("--config", "-c", help="run configuration JSON")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--params", help="override the LSP parameter database")
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, help="worker count (results are identical for any value)")
        p.add_argument("--emit-plotdata", action="store_true", default=None,
                       help="write per-figure CSV curves during the fit stage")
        if name == "run":
            p.add_argument("--stages", help="comma-separated subset of stages to run")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        stages = None
        if args.command != "run":
            stages = [args.command]
        elif getattr(args, "stages", None):
            stages = [s.strip() for s in args.stages.split(",") if s.strip()]
        cfg = load_config(
            args.config,
            seed_override=args.seed,
            out_override=args.out,
            params_override=args.params,
            jobs_override=args.jobs,
            stages_override=stages,
            emit_plotdata=args.emit_plotdata,
        )
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        return run(cfg)
    except Exception as exc:  # noqa: BLE001 - fault barrier for exit code 2
        log.exception("runtime fault: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
