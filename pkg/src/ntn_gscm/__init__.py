"""Satellite channel modeling toolkit.

Propagates non-geostationary orbits into a terminal-centric frame,
synthesizes a simplified single-bounce scattering environment, and fits
the log-linear large-scale parameter model that drives geometry-based
stochastic channel simulations.
"""

from .constants import EARTH, SPEED_OF_LIGHT_M_S, EarthConstants
from .orbit import GeoState, InertialState, OrbitalElements, propagate
from .frames import MtFrameState, TerminalLocation
from .constellation import LinkTable, WalkerSpec, enumerate_links, sample_terminals, walker_delta
from .environment import SCENARIOS, PathSet, PathTable, ScenarioParams, fspl_db
from .lsp import (
    LspCoefficients,
    LspSampleBatch,
    ParameterDB,
    correlated_field,
    eval_mean,
    eval_std,
    load_parameter_table,
    sample_lsps,
)
from .analysis import (
    FitResult,
    angular_spread,
    compare,
    extract_all,
    fit_multilinear,
    k_factor,
    resimulate,
    rms_delay_spread,
)

__version__ = "0.1.0"

__all__ = [
    "EARTH",
    "SPEED_OF_LIGHT_M_S",
    "EarthConstants",
    "OrbitalElements",
    "InertialState",
    "GeoState",
    "propagate",
    "TerminalLocation",
    "MtFrameState",
    "WalkerSpec",
    "LinkTable",
    "walker_delta",
    "sample_terminals",
    "enumerate_links",
    "ScenarioParams",
    "SCENARIOS",
    "PathSet",
    "PathTable",
    "fspl_db",
    "LspCoefficients",
    "LspSampleBatch",
    "ParameterDB",
    "load_parameter_table",
    "eval_mean",
    "eval_std",
    "correlated_field",
    "sample_lsps",
    "FitResult",
    "rms_delay_spread",
    "angular_spread",
    "k_factor",
    "extract_all",
    "fit_multilinear",
    "resimulate",
    "compare",
    "__version__",
]
