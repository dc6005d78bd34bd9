"""spectrum and solve-kappa."""

import logging

from commands import background, record, tolerance
from instantons import kappa_ode_residual, polynomial_solution, solve_kappa
from models import ReportCollector, ResidualReport, RunConfig
from spectra import (
    catalog_table,
    cp2_eigenfunctions_mu12,
    laplacian_residual,
    s2xs2_eigenfunctions_k1,
    spectral_metric,
)
from utils import line_grid

logger = logging.getLogger(__name__)


def spectrum(config: RunConfig, collector: ReportCollector) -> bool:
    manifold = config.options.get("manifold") or "CP2"
    table = catalog_table(manifold, int(config.options.get("k_max") or 10),
                          int(config.options.get("k_min") or 0),
                          bool(config.options.get("polynomial_only")))
    for row in table.to_dict(orient="records"):
        collector.add(row)
    if not config.options.get("check_eigenfunctions"):
        return True

    # the catalogued μ = 12 eigenfunctions, checked against the Laplacian of the catalog metric
    functions = cp2_eigenfunctions_mu12() if manifold == "CP2" else s2xs2_eigenfunctions_k1()
    g4 = spectral_metric(manifold)
    n = min(config.grid_points, 20)
    residuals = [laplacian_residual(F, 12.0, g4, n=n, seed=config.seed) for F in functions]
    report = ResidualReport.from_samples("laplacian_eigenfunctions", residuals, manifold=manifold, mu=12.0)
    return record(collector, [report], tolerance(config, "laplacian"))


def solve(config: RunConfig, collector: ReportCollector) -> bool:
    spec = background(config, "canonical_CP2")
    options = config.options
    if options.get("polynomial"):
        sol = polynomial_solution(spec, int(options["k"]))
    else:
        k = options.get("k")
        sol = solve_kappa(spec, k=None if k is None else int(k),
                          mu=None if options.get("mu") is None else float(options["mu"]),
                          c1=float(options.get("c1", 1.0)), c2=float(options.get("c2", 0.0)),
                          require_global=bool(options.get("require_global")))
    collector.add({"solution": sol.to_dict()})
    lo, hi = sol.domain
    grid = line_grid(lo, hi if hi < float("inf") else lo + 5.0, n=config.grid_points)
    return record(collector, [kappa_ode_residual(sol, grid)], tolerance(config, "kappa_ode"))
