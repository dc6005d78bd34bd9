"""Subcommand handlers. Each takes (config, collector) and returns True when every check passed."""

import logging
from typing import Iterable, Optional

import numpy as np

from geometry import preset
from models import BackgroundSpec, ReportCollector, ResidualReport, RunConfig
from utils import DEFAULT_TOLERANCES, sample_points

logger = logging.getLogger(__name__)


def tolerance(config: RunConfig, key: str) -> float:
    """--tolerance overrides every check; otherwise the configured value for key."""
    override = config.options.get("tolerance")
    if override is not None:
        return float(override)
    return float(config.tolerances.get(key, DEFAULT_TOLERANCES[key]))


def background(config: RunConfig, default_family: str) -> BackgroundSpec:
    if config.background is not None:
        return config.background
    overrides = {}
    if config.options.get("cone_param") is not None:
        overrides["cone_param"] = float(config.options["cone_param"])
    return preset(config.options.get("family") or default_family, **overrides)


def chart_grid(chart, config: RunConfig, cap: Optional[int] = None) -> np.ndarray:
    n = config.grid_points if cap is None else min(config.grid_points, cap)
    return sample_points(chart, n, seed=config.seed, margin=0.1)


def record(collector: ReportCollector, reports: Iterable[ResidualReport], tol: float,
           control: bool = False) -> bool:
    """
    Add reports with their verdict.

    Controls are expected to fail: they pass when the residual exceeds tol.
    """
    passed = True
    for report in reports:
        row = report.to_dict()
        within = report.passed(tol)
        row["tolerance"] = tol
        row["control"] = control
        row["passed"] = (not within) if control else within
        passed = passed and row["passed"]
        status = "✅" if row["passed"] else "⚠️"
        logger.info(f"{status} {report.check}: sup {report.sup_residual:.3e} (tolerance {tol:.1e})")
        collector.add(row)
    return passed
