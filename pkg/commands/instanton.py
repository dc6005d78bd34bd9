"""verify-instanton, ym-energy, killing-check and levi-civita-check."""

import logging

import sympy as sp

from commands import background, chart_grid, record, tolerance
from geometry import build_structure
from instantons import (
    assemble_connection,
    cp2_levi_civita_control,
    curvature_closed_form,
    elementary_connections,
    elementary_norm_residual,
    killing_dual_check,
    killing_fields,
    polynomial_solution,
    solve_kappa,
    verify_hym,
    verify_levi_civita,
    verify_reduced_equations,
    yang_mills_energy,
)
from models import ConfigError, ReportCollector, ResidualReport, RunConfig
from spectra import cp2_eigenfunctions_mu12, s2xs2_eigenfunctions_k1

logger = logging.getLogger(__name__)

# Connection checks wedge forms point by point, so they run on fewer points.
CONNECTION_POINTS = 40
# c = (F∧ω²)/ω³ of the catalogued Killing fields
KILLING_C = {"d_y": 2.0, "dual_sigma1": -4.0 / 3.0, "d_x3": 0.0, "right_sin": 0.0, "right_cos": 0.0}


def _eigenfunction(spec, k: int, index: int):
    if k == 0:
        return sp.Integer(1)
    if k != 1:
        raise ConfigError(f"No eigenfunction catalogued for k = {k}; use k = 0 or 1")
    functions = cp2_eigenfunctions_mu12() if spec.family == "canonical_CP2" else s2xs2_eigenfunctions_k1()
    if not 0 <= index < len(functions):
        raise ConfigError(f"Eigenfunction index {index} outside 0..{len(functions) - 1}")
    return functions[index].expr


def build_instanton(config: RunConfig):
    """The connection selected by --k, --c1/--c2 and --eigenfunction on the chosen background."""
    spec = background(config, "canonical_CP2")
    S = build_structure(spec)
    k = int(config.options.get("k") or 0)
    if k == 0:
        kappa = solve_kappa(spec, mu=0.0, c1=float(config.options.get("c1", 1.0)),
                            c2=float(config.options.get("c2", 0.0)))
    else:
        kappa = polynomial_solution(spec, k)
    F = _eigenfunction(spec, k, int(config.options.get("eigenfunction") or 0))
    return S, assemble_connection(kappa, F, S)


def verify_instanton(config: RunConfig, collector: ReportCollector) -> bool:
    S, conn = build_instanton(config)
    grid = chart_grid(S.chart, config, cap=CONNECTION_POINTS)
    passed = record(collector, verify_hym(conn, S, 0.0, grid), tolerance(config, "hym"))
    reports = verify_reduced_equations(conn, grid) + [curvature_closed_form(conn, grid)]
    return record(collector, reports, tolerance(config, "reduced")) and passed


def ym_energy(config: RunConfig, collector: ReportCollector) -> bool:
    name = config.options.get("connection")
    if name:
        spec = background(config, "canonical_CP2")
        S = build_structure(spec)
        catalog = elementary_connections(S)
        if name not in catalog:
            raise ConfigError(f"Unknown elementary connection {name!r}; choose from {sorted(catalog)}")
        A = catalog[name][0]
    else:
        S, A = build_instanton(config)
    result = yang_mills_energy(A, S, float(config.options.get("r_max") or 10.0))
    row = result.to_dict()
    row.update({"check": "ym_energy", "connection": name or "instanton", "passed": True})
    collector.add(row)
    if name and S.spec.family == "canonical_CP2":
        grid = chart_grid(S.chart, config, cap=CONNECTION_POINTS)
        return record(collector, elementary_norm_residual(S, grid), tolerance(config, "energy_rel"))
    return True


def killing_check(config: RunConfig, collector: ReportCollector) -> bool:
    spec = background(config, "canonical_CP2")
    S = build_structure(spec)
    grid = chart_grid(S.chart, config, cap=CONNECTION_POINTS)
    tol = tolerance(config, "killing")
    passed = True
    for name, X in killing_fields(S).items():
        c, spread, hym = killing_dual_check(X, S, grid)
        expected = ResidualReport.from_samples("killing_c", [abs(c - KILLING_C[name])], field=name, c=c)
        passed = record(collector, [expected, spread, hym], tol) and passed
    return passed


def levi_civita_check(config: RunConfig, collector: ReportCollector) -> bool:
    spec = background(config, "canonical_CP2")
    S = build_structure(spec)
    grid = chart_grid(S.chart, config, cap=CONNECTION_POINTS)
    tol = tolerance(config, "levi_civita")
    passed = record(collector, verify_levi_civita(spec.cone_param, grid), tol)
    return record(collector, [cp2_levi_civita_control(spec.cone_param, grid)], tol, control=True) and passed
