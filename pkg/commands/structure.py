"""verify-structure, einstein-check and deformation-check."""

import logging

from commands import background, chart_grid, record, tolerance
from geometry import (
    BASE_EINSTEIN,
    airy_deformation,
    base_chart,
    build_structure,
    curvature_relation_residual,
    deformation_chart,
    einstein_defect,
    einstein_residuals,
    lie_rotation_residual,
    positivity_window,
    symplectic_independence_residual,
    verify_base_einstein,
    verify_nonconstant_deformation,
    verify_su3_structure,
)
from models import ReportCollector, ResidualReport, RunConfig
from utils import line_grid, sample_points

logger = logging.getLogger(__name__)

# Ricci checks differentiate the metric twice, so they run on fewer points.
RICCI_POINTS = 12


def verify_structure(config: RunConfig, collector: ReportCollector) -> bool:
    spec = background(config, "canonical_CP2")
    S = build_structure(spec)
    grid = chart_grid(S.chart, config)
    reports = verify_su3_structure(S, grid)
    if spec.family == "canonical_CP2":
        reports.append(lie_rotation_residual(S, grid))
    if spec.is_canonical:
        reports.append(symplectic_independence_residual(spec, grid))
    else:
        reports.append(curvature_relation_residual(spec, grid))
    tol = tolerance(config, "structure")
    return record(collector, reports, tol)


def einstein_check(config: RunConfig, collector: ReportCollector) -> bool:
    spec = background(config, "CP3_type")
    tol = tolerance(config, "einstein")
    if spec.is_canonical:
        S = build_structure(spec)
        grid = chart_grid(S.chart, config, cap=RICCI_POINTS)
        defects = einstein_defect(S.metric, 0.0, grid)
        report = ResidualReport.from_samples("ricci_flat", defects, family=spec.family)
        return record(collector, [report], tolerance(config, "ricci"))

    lo, hi = positivity_window(spec)
    H_grid = line_grid(lo, hi, n=config.grid_points)
    report = ResidualReport.from_samples("einstein_profile", einstein_residuals(spec, H_grid),
                                         family=spec.family, lam=spec.lam)
    passed = record(collector, [report], tol)
    if spec.base_chart in BASE_EINSTEIN and spec.base_chart != "T4":
        chart = base_chart(spec.base_chart)
        base_grid = sample_points(chart, min(config.grid_points, RICCI_POINTS), seed=config.seed, margin=0.1)
        passed = record(collector, [verify_base_einstein(spec.base_chart, base_grid)],
                        tolerance(config, "ricci")) and passed
    return passed


def deformation_check(config: RunConfig, collector: ReportCollector) -> bool:
    mu = float(config.options.get("mu") or 1.0)
    data = airy_deformation(mu)
    chart = deformation_chart()
    grid = sample_points(chart, config.grid_points, seed=config.seed, margin=0.1)
    return record(collector, verify_nonconstant_deformation(data, grid), tolerance(config, "deformation"))
