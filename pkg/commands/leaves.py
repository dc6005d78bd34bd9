"""slag {verify, metric}."""

import logging
import math

from commands import background, record, tolerance
from geometry import build_structure
from instantons import elementary_connections
from models import ReportCollector, RunConfig
from slag import (
    SLagLeafSpec,
    build_distribution,
    flat_restriction_check,
    induced_metric,
    involutivity_control,
    leaf_points,
    verify_calibration,
    verify_involutivity,
)

logger = logging.getLogger(__name__)

LEAF_POINTS = 60


def _leaf(config: RunConfig, family: str) -> SLagLeafSpec:
    options = config.options
    if family == "canonical_CP2":
        return SLagLeafSpec(family, {"y": float(options.get("y") or 0.0)})
    if options.get("theta_diff") is not None:
        return SLagLeafSpec(family, {"theta_diff": float(options["theta_diff"]), "y": float(options.get("y") or 0.0)})
    return SLagLeafSpec(family, {"family": int(options.get("leaf_family") or 1)})


def verify(config: RunConfig, collector: ReportCollector) -> bool:
    spec = background(config, "canonical_CP2")
    S = build_structure(spec)
    leaf = _leaf(config, spec.family)
    grid = leaf_points(leaf, S, min(config.grid_points, LEAF_POINTS), seed=config.seed)
    passed = record(collector, verify_calibration(leaf, S, grid), tolerance(config, "calibration"))
    passed = record(collector, [verify_involutivity(build_distribution(leaf, S), grid)],
                    tolerance(config, "involutivity")) and passed
    if spec.family == "canonical_CP2":
        flat_tol = tolerance(config, "flat_restriction")
        connections = elementary_connections(S)
        passed = record(collector, [flat_restriction_check(connections["r^-4 theta"][0], leaf, S, grid)],
                        flat_tol) and passed
        # the σ₂ control restricts to t⁻²cos(3y)·dt∧(leaf direction)
        if abs(math.cos(3 * leaf.y)) > 0.1:
            passed = record(collector, [flat_restriction_check(connections["(1-t^-1) sigma2"][0], leaf, S, grid)],
                            flat_tol, control=True) and passed
        passed = record(collector, [verify_involutivity(involutivity_control(S), grid)],
                        tolerance(config, "involutivity"), control=True) and passed
    return passed


def metric(config: RunConfig, collector: ReportCollector) -> bool:
    spec = background(config, "canonical_CP2")
    S = build_structure(spec)
    leaf = _leaf(config, spec.family)
    coordinates = config.options.get("coords") or ("s" if spec.family == "canonical_CP2" else "t")
    for p in leaf_points(leaf, S, min(config.grid_points, 5), seed=config.seed):
        collector.add({"check": "induced_metric", "point": p, "coordinates": coordinates,
                       "gram": induced_metric(leaf, S, p, coordinates=coordinates)})
    return True
