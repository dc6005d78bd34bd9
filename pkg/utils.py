import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from models import ConfigError

# Run configuration
DEFAULT_SEED = 0
DEFAULT_GRID_POINTS = 200
DEFAULT_MARGIN = 0.05
DEFAULT_FD_STEP = 1e-5
DEFAULT_SPAN = 3.0  # sampled width of half-infinite coordinate ranges
TOLERANCE_ENV_VAR = "CALABI_LAB_TOLERANCES"
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

DEFAULT_TOLERANCES: Dict[str, float] = {
    "structure": 1e-8,
    "j_squared": 1e-10,
    "einstein": 1e-10,
    "ricci": 1e-5,
    "laplacian": 1e-5,
    "kappa_ode": 1e-8,
    "hym": 1e-8,
    "reduced": 1e-8,
    "killing": 1e-8,
    "levi_civita": 1e-6,
    "energy_rel": 1e-6,
    "dhym": 1e-8,
    "dhym_cubic": 1e-12,
    "calibration": 1e-9,
    "involutivity": 1e-9,
    "deformation": 1e-6,
    "flat_restriction": 1e-10,
}

logger = logging.getLogger(__name__)


def setup_logging(level: int = logging.INFO, log_file: Optional[str] = None) -> None:
    """
    Configure root logging once for scripts and the CLI.

    Args:
        level: Logging level for the root logger
        log_file: Optional file that receives a copy of every record
    """
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.insert(0, logging.FileHandler(log_file))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def load_tolerances(path: Optional[str] = None) -> Dict[str, float]:
    """
    Merge the default tolerances with an optional JSON override file.

    Args:
        path: JSON file mapping check names to tolerances. Falls back to
            the file named by the CALABI_LAB_TOLERANCES environment variable.

    Returns:
        Dictionary of tolerances keyed by check name
    """
    tolerances = dict(DEFAULT_TOLERANCES)
    path = path or os.environ.get(TOLERANCE_ENV_VAR)
    if not path:
        return tolerances

    try:
        overrides = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Could not read tolerance file {path}: {e}") from e

    if not isinstance(overrides, dict):
        raise ConfigError("Tolerance file must contain a JSON object")
    for key, value in overrides.items():
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"Unknown tolerance: {key}")
        if not isinstance(value, (int, float)) or value <= 0:
            raise ConfigError(f"Tolerance {key} must be a positive number")
        tolerances[key] = float(value)
    logger.debug(f"Loaded {len(overrides)} tolerance overrides from {path}")
    return tolerances


def _sampling_interval(lo: float, hi: float, margin: float, periodic: bool) -> Tuple[float, float]:
    if math.isinf(lo) and math.isinf(hi):
        lo, hi = -DEFAULT_SPAN, DEFAULT_SPAN
    elif math.isinf(hi):
        hi = lo + DEFAULT_SPAN
    elif math.isinf(lo):
        lo = hi - DEFAULT_SPAN
    if periodic:
        return lo, hi
    width = hi - lo
    return lo + margin * width, hi - margin * width


def sample_points(chart, n: int = DEFAULT_GRID_POINTS, seed: int = DEFAULT_SEED,
                  margin: float = DEFAULT_MARGIN,
                  bounds: Optional[Dict[str, Tuple[float, float]]] = None) -> np.ndarray:
    """
    Draw reproducible interior sample points of a chart.

    Args:
        chart: Chart with coord_names, ranges and periodic attributes
        n: Number of points
        seed: Seed of the numpy generator
        margin: Fraction of each finite range kept away from its ends
        bounds: Optional explicit sampling interval per coordinate name

    Returns:
        Array of shape (n, dim)
    """
    rng = np.random.default_rng(seed)
    bounds = bounds or {}
    columns = []
    for name, (lo, hi), periodic in zip(chart.coord_names, chart.ranges, chart.periodic):
        if name in bounds:
            lo, hi = bounds[name]
        else:
            lo, hi = _sampling_interval(lo, hi, margin, periodic)
        columns.append(rng.uniform(lo, hi, size=n))
    return np.column_stack(columns)


def line_grid(lo: float, hi: float, n: int = DEFAULT_GRID_POINTS, margin: float = DEFAULT_MARGIN) -> np.ndarray:
    """Evenly spaced interior grid of a one-dimensional interval."""
    lo, hi = _sampling_interval(lo, hi, margin, periodic=False)
    return np.linspace(lo, hi, n)


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats for JSON output."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, complex):
        return {"real": to_jsonable(value.real), "imag": to_jsonable(value.imag)}
    return value


def write_report(results: Any, path) -> Path:
    """
    Write results deterministically as JSON (default) or CSV.

    Args:
        results: A dict, a list of flat dicts, or a pandas DataFrame
        path: Output path; a .csv suffix selects CSV

    Returns:
        The path written
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if isinstance(results, pd.DataFrame):
            frame = results
        else:
            frame = pd.DataFrame(to_jsonable(results))
            frame = frame.reindex(sorted(frame.columns), axis=1)
        frame.to_csv(path, index=False, float_format="%.17g")
    else:
        text = json.dumps(to_jsonable(results), indent=2, sort_keys=True)
        path.write_text(text + "\n", encoding="utf-8")
    return path


def render_report(results: Any) -> str:
    """Deterministic JSON text for stdout."""
    return json.dumps(to_jsonable(results), indent=2, sort_keys=True)


def format_sci(value: float) -> str:
    """Format a residual for console tables."""
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return str(value)
    return f"{value:.3e}"


def print_banner(title: str, width: int = 60) -> None:
    print("\n" + "=" * width)
    print(title)
    print("=" * width)
