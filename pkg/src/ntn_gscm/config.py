"""Run configuration: schema, defaults, validation, and echo file.

A single JSON file drives the whole pipeline.  Keys:

- ``seed``: master seed; the ``NTN_GSCM_SEED`` environment variable and
  the ``--seed`` flag override it (flag wins).
- ``walker``: one object or a list of objects
  ``{total, planes, phasing, altitude_km, inc_deg}`` (one per shell);
  alternatively ``elements_file`` points at an element JSON.
- ``terminals``: ``{count, lat_limit_deg, seed, height_m}``.
- ``links``: ``{min_elev_deg, t_start_s, t_end_s, t_step_s}``.
- ``scenarios``, ``frequencies_ghz``, ``out``, ``params``, ``stages``,
  ``jobs``, ``max_links``, ``tolerances``, ``pass_tables``,
  ``emit_plotdata``.

The resolved configuration (defaults filled in) is echoed to
``config.resolved.json`` next to the outputs of every run.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .constellation import WalkerSpec

__all__ = ["RunConfig", "ConfigError", "load_config", "STAGES", "SEED_ENV_VAR"]

log = logging.getLogger(__name__)

SEED_ENV_VAR = "NTN_GSCM_SEED"

STAGES = (
    "propagate",
    "links",
    "environment",
    "extract",
    "fit",
    "resimulate",
    "compare",
)

#: Frequency band the coefficient tables were built for (GHz).
SUPPORTED_BAND_GHZ = (2.0, 40.0)

_DEFAULT_SHELLS = [
    {"total": 60, "planes": 6, "phasing": 1, "altitude_km": 550.0, "inc_deg": 53.0},
    {"total": 60, "planes": 6, "phasing": 1, "altitude_km": 2000.0, "inc_deg": 61.0},
    {"total": 60, "planes": 6, "phasing": 1, "altitude_km": 20200.0, "inc_deg": 63.0},
]


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 1)."""


@dataclass
class RunConfig:
    seed: int = 1
    out: Path = Path("ntn-gscm-out")
    params: Path | None = None
    shells: list[WalkerSpec] = field(default_factory=list)
    elements_file: Path | None = None
    terminal_count: int = 30
    terminal_lat_limit_deg: float = 53.0
    terminal_seed: int | None = None
    terminal_height_m: float = 1.5
    min_elev_deg: float = 10.0
    t_start_s: float = 0.0
    t_end_s: float = 5400.0
    t_step_s: float = 30.0
    scenarios: list[str] = field(default_factory=lambda: ["DenseUrban", "Rural"])
    frequencies_ghz: list[float] = field(default_factory=lambda: [2.0, 20.0])
    stages: list[str] = field(default_factory=lambda: list(STAGES))
    jobs: int = 1
    max_links: int | None = None
    tolerances: dict[str, float] | None = None
    pass_tables: list[tuple[int, int]] = field(default_factory=list)
    emit_plotdata: bool = False

    def times_s(self):
        import numpy as np

        n = int(math.floor((self.t_end_s - self.t_start_s) / self.t_step_s)) + 1
        return self.t_start_s + self.t_step_s * np.arange(n)

    def echo_dict(self) -> dict:
        return {
            "seed": self.seed,
            "out": str(self.out),
            "params": None if self.params is None else str(self.params),
            "walker": [
                {
                    "total": s.total,
                    "planes": s.planes,
                    "phasing": s.phasing,
                    "altitude_km": s.altitude_km,
                    "inc_deg": math.degrees(s.inc_rad),
                }
                for s in self.shells
            ],
            "elements_file": None if self.elements_file is None else str(self.elements_file),
            "terminals": {
                "count": self.terminal_count,
                "lat_limit_deg": self.terminal_lat_limit_deg,
                "seed": self.terminal_seed,
                "height_m": self.terminal_height_m,
            },
            "links": {
                "min_elev_deg": self.min_elev_deg,
                "t_start_s": self.t_start_s,
                "t_end_s": self.t_end_s,
                "t_step_s": self.t_step_s,
            },
            "scenarios": self.scenarios,
            "frequencies_ghz": self.frequencies_ghz,
            "stages": self.stages,
            "jobs": self.jobs,
            "max_links": self.max_links,
            "tolerances": self.tolerances,
            "pass_tables": [list(p) for p in self.pass_tables],
            "emit_plotdata": self.emit_plotdata,
        }

    def write_echo(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "config.resolved.json").write_text(
            json.dumps(self.echo_dict(), indent=1, sort_keys=True) + "\n"
        )


def _walker_specs(raw) -> list[WalkerSpec]:
    if isinstance(raw, dict):
        raw = [raw]
    specs = []
    for shell in raw:
        try:
            specs.append(
                WalkerSpec(
                    total=int(shell["total"]),
                    planes=int(shell["planes"]),
                    phasing=int(shell["phasing"]),
                    altitude_km=float(shell["altitude_km"]),
                    inc_rad=math.radians(float(shell["inc_deg"])),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid walker shell {shell}: {exc}") from exc
    return specs


def load_config(
    path: str | Path | None,
    seed_override: int | None = None,
    out_override: str | None = None,
    params_override: str | None = None,
    jobs_override: int | None = None,
    stages_override: list[str] | None = None,
    emit_plotdata: bool | None = None,
) -> RunConfig:
    """Parse and validate a configuration file plus CLI/env overrides."""
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    cfg = RunConfig()
    if "seed" in raw:
        cfg.seed = int(raw["seed"])
    if SEED_ENV_VAR in os.environ:
        cfg.seed = int(os.environ[SEED_ENV_VAR])
    if seed_override is not None:
        cfg.seed = int(seed_override)

    cfg.out = Path(out_override or raw.get("out", cfg.out))
    params = params_override or raw.get("params")
    cfg.params = None if params is None else Path(params)
    cfg.shells = _walker_specs(raw.get("walker", _DEFAULT_SHELLS))
    if raw.get("elements_file"):
        cfg.elements_file = Path(raw["elements_file"])

    term = raw.get("terminals", {})
    cfg.terminal_count = int(term.get("count", cfg.terminal_count))
    cfg.terminal_lat_limit_deg = float(term.get("lat_limit_deg", cfg.terminal_lat_limit_deg))
    cfg.terminal_seed = term.get("seed")
    cfg.terminal_height_m = float(term.get("height_m", cfg.terminal_height_m))

    links = raw.get("links", {})
    cfg.min_elev_deg = float(links.get("min_elev_deg", cfg.min_elev_deg))
    cfg.t_start_s = float(links.get("t_start_s", cfg.t_start_s))
    cfg.t_end_s = float(links.get("t_end_s", cfg.t_end_s))
    cfg.t_step_s = float(links.get("t_step_s", cfg.t_step_s))

    cfg.scenarios = list(raw.get("scenarios", cfg.scenarios))
    cfg.frequencies_ghz = [float(f) for f in raw.get("frequencies_ghz", cfg.frequencies_ghz)]
    cfg.stages = list(raw.get("stages", cfg.stages))
    if stages_override is not None:
        cfg.stages = list(stages_override)
    cfg.jobs = int(jobs_override if jobs_override is not None else raw.get("jobs", 0)) or (
        os.cpu_count() or 1
    )
    cfg.max_links = raw.get("max_links")
    if cfg.max_links is not None:
        cfg.max_links = int(cfg.max_links)
    cfg.tolerances = raw.get("tolerances")
    cfg.pass_tables = [tuple(int(v) for v in p) for p in raw.get("pass_tables", [])]
    if emit_plotdata is not None:
        cfg.emit_plotdata = emit_plotdata
    else:
        cfg.emit_plotdata = bool(raw.get("emit_plotdata", False))

    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    unknown = [s for s in cfg.stages if s not in STAGES]
    if unknown:
        raise ConfigError(f"unknown stages {unknown}; valid: {list(STAGES)}")
    if cfg.t_step_s <= 0 or cfg.t_end_s < cfg.t_start_s:
        raise ConfigError("time grid requires t_step_s > 0 and t_end_s >= t_start_s")
    if not cfg.shells and cfg.elements_file is None:
        raise ConfigError("need a walker shell list or an elements_file")
    if not cfg.scenarios:
        raise ConfigError("at least one scenario is required")
    if not cfg.frequencies_ghz:
        raise ConfigError("at least one frequency is required")
    lo, hi = SUPPORTED_BAND_GHZ
    for f in cfg.frequencies_ghz:
        if f <= 0:
            raise ConfigError(f"frequency {f} GHz is not positive")
        if not lo <= f <= hi:
            log.warning(
                "frequency %.3g GHz outside the supported %g-%g GHz band; "
                "coefficients are extrapolated", f, lo, hi,
            )
    if not 0.0 <= cfg.min_elev_deg < 90.0:
        raise ConfigError("min_elev_deg must be in [0, 90)")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
