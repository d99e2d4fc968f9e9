"""Numerical laboratory for a qubit coupled to a highly excited cavity mode.

Layers: `floquet` solves the classical-drive precession problem; `resonances`
locates the drive-strength-dependent shifts of seven resonance criteria;
`semiclassics` promotes the Floquet data to wave-packet predictions
(collapse, entanglement, splitting); `oracle` provides exact truncated
Fock-space evolution for cross-validation; `cli` exposes everything as a
command-line tool with CSV/JSON export.
"""

__version__ = "0.1.0"

from . import errors
from .errors import RabiLabError, ValidationError

from . import floquet, oracle, resonances, semiclassics  # noqa: E402
from .floquet import FloquetParams, FloquetSolution, solve_floquet
from .oracle import FockConfig, evolve, fragment_analysis
from .resonances import ResonanceKind, find_resonance, fit_shift_coefficient
from .semiclassics import WavePacket, collapse_time, polarization_trace, splitting

__all__ = [
    "__version__",
    "errors",
    "floquet",
    "oracle",
    "resonances",
    "semiclassics",
    "RabiLabError",
    "ValidationError",
    "FloquetParams",
    "FloquetSolution",
    "solve_floquet",
    "FockConfig",
    "evolve",
    "fragment_analysis",
    "ResonanceKind",
    "find_resonance",
    "fit_shift_coefficient",
    "WavePacket",
    "collapse_time",
    "polarization_trace",
    "splitting",
]
