"""
Calabi Lab Data Models

Dataclasses for backgrounds, run configuration and verification reports,
plus the exception hierarchy shared by every module.

Usage:
    from models import BackgroundSpec, ResidualReport, ReportCollector

    with ReportCollector("report.json") as reports:
        reports.add(verify_su3_structure(structure, grid))
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class GeometryError(Exception):
    """Base class for every domain error raised by the library."""


class ChartDomainError(GeometryError):
    """A point (or a finite-difference stencil) lies outside the chart."""


class ChartMismatchError(GeometryError):
    """Two objects living on different charts were combined."""


class DegreeError(GeometryError):
    """A form degree is out of range for the operation."""


class SingularMetricError(GeometryError):
    """The metric is degenerate at the evaluation point."""


class InconsistentStructureError(GeometryError):
    """Metric and Kähler form do not define an almost complex structure."""


class ParameterLockError(GeometryError):
    """A family was requested with parameters violating its locks."""


class PositivityWindowError(GeometryError):
    """aH + b > |pH + q| fails somewhere on the requested H range."""


class SpecialFunctionDomainError(GeometryError):
    """A special function was evaluated outside its convergent domain."""


class NoGlobalSolutionError(GeometryError):
    """No globally defined profile exists for the requested eigenvalue."""


class QuadratureError(GeometryError):
    """Adaptive quadrature failed to reach the requested accuracy."""


class SpectrumError(GeometryError):
    """The requested manifold has no discrete spectrum catalog."""


class DependentGeneratorsError(GeometryError):
    """Distribution generators are linearly dependent at a point."""


class ConfigError(GeometryError):
    """Malformed configuration or tolerance file."""


class PrecisionWarning(UserWarning):
    """A series evaluation hit its term cap before converging."""


# ---------------------------------------------------------------------------
# Backgrounds
# ---------------------------------------------------------------------------

FAMILIES = (
    "flat_C3",
    "canonical_CP2",
    "canonical_S2xS2",
    "CP3_type",
    "negative_KE_dual",
    "hyperkahler_base",
    "T4_nilmanifold",
    "conti_salamon",
)


@dataclass
class BackgroundSpec:
    """Parameters of one S¹-invariant Kähler–Einstein background.

    ``cone_param`` is the resolution parameter C of the canonical bundles
    (C_cone); ``C_einstein`` is the Einstein constant C of the base.
    """

    family: str
    a: float = 0.0
    b: float = 0.0
    p: float = 0.0
    q: float = 0.0
    C_einstein: float = 0.0
    lam: float = 0.0
    cone_param: float = 0.0
    H_range: Tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterLockError(f"Unknown family: {self.family}")
        self.H_range = (float(self.H_range[0]), float(self.H_range[1]))

    @property
    def base_chart(self) -> str:
        """Name of the 4D base chart the family is fibred over."""
        return {
            "flat_C3": "T4",
            "canonical_CP2": "CP2",
            "canonical_S2xS2": "S2xS2",
            "CP3_type": "CP2",
            "negative_KE_dual": "H2xH2",
            "hyperkahler_base": "T4",
            "T4_nilmanifold": "T4",
            "conti_salamon": "T4",
        }[self.family]

    @property
    def is_canonical(self) -> bool:
        return self.family in ("canonical_CP2", "canonical_S2xS2")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["H_range"] = [_encode_float(v) for v in self.H_range]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BackgroundSpec":
        data = dict(data)
        if "H_range" in data:
            data["H_range"] = tuple(_decode_float(v) for v in data["H_range"])
        return cls(**data)


@dataclass
class DeformationData:
    """Deformation G = v(H)·F + H⁴/12 of the flat-base potential: ΔF = μF, v'' = μHv."""

    mu: float
    F: Any
    v: Any


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class ResidualReport:
    """Outcome of one residual check over a sample grid."""

    check: str
    grid_size: int
    sup_residual: float
    mean_residual: float
    flags: List[str] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_samples(cls, check: str, samples, flags: Optional[List[str]] = None,
                     **details) -> "ResidualReport":
        """Build a report from per-point residual magnitudes."""
        values = [float(s) for s in samples]
        if not values:
            return cls(check, 0, math.nan, math.nan, list(flags or []) + ["empty_grid"], details)
        return cls(
            check=check,
            grid_size=len(values),
            sup_residual=max(values),
            mean_residual=sum(values) / len(values),
            flags=list(flags or []),
            details=details,
        )

    def passed(self, tolerance: float) -> bool:
        return math.isfinite(self.sup_residual) and self.sup_residual <= tolerance

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EnergyResult:
    """Yang–Mills energy of an instanton with its tail diagnostics."""

    value: float
    extrapolated: float
    tail_exponent: float
    divergent: bool
    vol_base: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RunConfig:
    """Everything a CLI subcommand needs to run reproducibly."""

    command: str
    background: Optional[BackgroundSpec] = None
    grid_points: int = 200
    seed: int = 0
    tolerances: Dict[str, float] = field(default_factory=dict)
    output: Optional[str] = None
    options: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Malformed run configuration: {e}") from e
        if not isinstance(data, dict) or "command" not in data:
            raise ConfigError("Run configuration must be an object with a 'command' key")
        background = data.pop("background", None)
        if background is not None:
            data["background"] = BackgroundSpec.from_dict(background)
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Unknown run configuration field: {e}") from e


def _encode_float(value: float):
    if math.isfinite(value):
        return value
    return str(value)


def _decode_float(value) -> float:
    return float(value)


class ReportCollector:
    """Collects reports during a run and writes them when the block exits.

    A DataFrame assigned to ``table`` is written instead of the records.
    """

    def __init__(self, output_path: Optional[str] = None):
        self.output_path = Path(output_path) if output_path else None
        self.records: List[Dict[str, Any]] = []
        self.table = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is None and self.output_path is not None:
            # Imported lazily: utils imports models.
            from utils import write_report
            write_report(self.table if self.table is not None else self.records, self.output_path)
            logger.info(f"Wrote {len(self.records)} records to {self.output_path}")

    def add(self, record) -> None:
        if hasattr(record, "to_dict"):
            record = record.to_dict()
        self.records.append(record)

    def all_passed(self, tolerance: Optional[float] = None) -> bool:
        """Records carrying a "passed" verdict use it; others are compared against tolerance."""
        for record in self.records:
            if "passed" in record:
                if not record["passed"]:
                    return False
                continue
            sup = record.get("sup_residual")
            if tolerance is not None and sup is not None and not (math.isfinite(sup) and sup <= tolerance):
                return False
        return True
