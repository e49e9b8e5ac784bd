"""Monte Carlo jump unravelings of non-Markovian decay on discretized baths.

The package solves a small total system (atom plus a comb of bath modes)
exactly in the one-excitation sector, derives probability currents and
time-local rates from the solution, and runs two stochastic jump processes
on top of it: a property-state unraveling driven by the currents (gaw) and
a reduced-space unraveling with reverse jumps (nmqj). A harness writes
delimited bundles for the built-in scenarios and compares runs.
"""

from .bath import BathSpec, ModeGrid, build_grid, recurrence_time, spectral_density
from .dynamics import Trajectory, integrate, make_system
from .observables import (
    CurrentSeries,
    RateSeries,
    current_series,
    gaw_rates,
    mixed_density,
    nmqj_rate_factors,
    per_mode_current,
    projection_probabilities,
    rate_series,
    total_density,
    trace_distance,
)
from .harness import Scenario, builtin_scenarios, compare, load_scenario, run

__version__ = "0.1.0"

__all__ = [
    "BathSpec",
    "ModeGrid",
    "build_grid",
    "recurrence_time",
    "spectral_density",
    "Trajectory",
    "integrate",
    "make_system",
    "CurrentSeries",
    "RateSeries",
    "current_series",
    "rate_series",
    "gaw_rates",
    "nmqj_rate_factors",
    "per_mode_current",
    "projection_probabilities",
    "mixed_density",
    "total_density",
    "trace_distance",
    "Scenario",
    "builtin_scenarios",
    "load_scenario",
    "compare",
    "run",
    "__version__",
]
