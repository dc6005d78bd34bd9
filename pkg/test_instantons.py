#!/usr/bin/env python3
"""
Tests for κ profiles, abelian instantons, energies and the Killing/Levi-Civita checks (instantons.py)
"""

import math

import numpy as np
import pytest
import sympy as sp

from forms import coordinate_symbol, exterior_derivative
from geometry import build_structure, preset
from instantons import (
    TAIL_CONVERGENCE,
    anchor_radius,
    assemble_connection,
    base_integral,
    base_volume,
    candidate_profile,
    cp2_levi_civita_control,
    curvature_closed_form,
    elementary_connections,
    elementary_norm_residual,
    kappa_ode_residual,
    killing_dual_check,
    killing_fields,
    polynomial_solution,
    singularity_probe,
    solve_kappa,
    verify_hym,
    verify_levi_civita,
    verify_reduced_equations,
    yang_mills_energy,
)
from models import InconsistentStructureError, NoGlobalSolutionError, ParameterLockError, QuadratureError
from spectra import cp2_eigenfunctions_mu12
from utils import DEFAULT_TOLERANCES, sample_points

HYM_TOL = DEFAULT_TOLERANCES["hym"]
R_GRID = np.linspace(1.1, 10.0, 40)


@pytest.fixture(scope="module")
def cp2():
    return build_structure(preset("canonical_CP2", cone_param=1.0))


@pytest.fixture(scope="module")
def cp2_grid(cp2):
    return sample_points(cp2.chart, 6, seed=4, margin=0.1)


def _values(expr, xs):
    r = coordinate_symbol("r")
    return np.broadcast_to(sp.lambdify(r, expr, modules="numpy")(xs), np.shape(xs))


# κ profiles ----------------------------------------------------------------

@pytest.mark.parametrize("k", [0, 1, 3, 4])
def test_cp2_polynomial_profiles_solve_the_ode(k):
    """🧪 Terminating κ for k = 0, 1, 3, 4 on the CP² bundle"""
    sol = polynomial_solution(preset("canonical_CP2", cone_param=1.0), k)
    assert sol.polynomial
    assert kappa_ode_residual(sol, R_GRID).sup_residual < DEFAULT_TOLERANCES["kappa_ode"]


def test_cp2_closed_forms():
    """🧪 k = 3 gives r⁶ − C and k = 4 gives (r⁶ − C)(C − 7r⁶)/r⁴"""
    spec = preset("canonical_CP2", cone_param=2.0)
    r = coordinate_symbol("r")
    k3 = polynomial_solution(spec, 3)
    k4 = polynomial_solution(spec, 4)
    assert np.allclose(_values(k3.expr, R_GRID), _values(r ** 6 - 2, R_GRID))
    assert np.allclose(_values(k4.expr, R_GRID), _values((r ** 6 - 2) * (2 - 7 * r ** 6) / r ** 4, R_GRID))


def test_s2xs2_k6_profile():
    """🧪 k = 6 on S²×S²: 2κ = (r⁶ − C)(65r¹² − 40Cr⁶ + 2C²)/r⁴"""
    sol = polynomial_solution(preset("canonical_S2xS2", cone_param=1.0), 6)
    r = coordinate_symbol("r")
    expected = (r ** 6 - 1) * (65 * r ** 12 - 40 * r ** 6 + 2) / r ** 4
    assert np.allclose(2 * _values(sol.expr, R_GRID), _values(expected, R_GRID), rtol=1e-10)
    assert kappa_ode_residual(sol, R_GRID).sup_residual < DEFAULT_TOLERANCES["kappa_ode"] * 252


K15_SIGN_FLIPPED = ("(r**6 + C)*(C**5 + 23*C**4*r**6 + 299*C**3*r**12/2 + 8671*C**2*r**18/22"
               " + 34684*C*r**24/77 + 34684*r**30/187)")
K15_CORRECTED = ("(r**6 - C)*(C**5 - 23*C**4*r**6 + 299*C**3*r**12/2 - 8671*C**2*r**18/22"
                 " + 34684*C*r**24/77 - 34684*r**30/187)")


def test_s2xs2_k15_candidates():
    """🧪 k = 15: the (r⁶ + C) form fails the ODE, the alternating (r⁶ − C) form solves it"""
    spec = preset("canonical_S2xS2", cone_param=1.0)
    tol = DEFAULT_TOLERANCES["kappa_ode"] * 1440
    flipped = candidate_profile(spec, K15_SIGN_FLIPPED, 1440.0)
    corrected = candidate_profile(spec, K15_CORRECTED, 1440.0)
    assert flipped.provenance == "candidate"
    assert kappa_ode_residual(flipped, R_GRID).sup_residual > 1.0
    assert kappa_ode_residual(corrected, R_GRID).sup_residual < tol


def test_singularity_probe():
    """🧪 H⁻³ blows up toward H = 0; c₁r⁻⁴ + c₂ stays bounded at r = C^{1/6}"""
    blowing = solve_kappa(preset("CP3_type"), mu=12.0, c1=1.0, c2=1.0)
    assert "blow_up" in singularity_probe(blowing).flags
    bounded = solve_kappa(preset("canonical_CP2", cone_param=1.0), mu=0.0, c1=1.0, c2=1.0)
    assert "blow_up" not in singularity_probe(bounded).flags


def test_non_terminating_branch_is_local():
    """🧪 k = 2 on CP² has no global profile"""
    spec = preset("canonical_CP2", cone_param=1.0)
    with pytest.raises(NoGlobalSolutionError):
        polynomial_solution(spec, 2)
    with pytest.raises(NoGlobalSolutionError):
        solve_kappa(spec, mu=32.0, require_global=True)
    local = solve_kappa(spec, mu=32.0)
    assert local.domain == (0.0, 1.0)


def test_cone_power_law():
    """🧪 C = 0 gives r^{−2 ± s}"""
    sol = solve_kappa(preset("canonical_CP2", cone_param=0.0), mu=12.0, c1=1.0, c2=0.5)
    assert sol.provenance == "power_law"
    assert kappa_ode_residual(sol, np.linspace(0.3, 5.0, 20)).sup_residual < 1e-9


@pytest.mark.parametrize("family,mu,domain,tol", [
    ("CP3_type", 12.0, (0.1, 0.9), 1e-8),
    ("flat_C3", 2.0, (0.1, 3.0), 1e-8),
    ("hyperkahler_base", 1.0, (0.2, 3.0), 1e-6),
])
def test_moment_map_families(family, mu, domain, tol):
    """🧪 κ on the H-chart families solves its ODE"""
    sol = solve_kappa(preset(family), mu=mu, c1=1.0, c2=0.0)
    report = kappa_ode_residual(sol, np.linspace(*domain, 25))
    assert report.sup_residual < tol


def test_exactly_one_of_k_and_mu():
    """🧪 k and μ are alternatives"""
    spec = preset("canonical_CP2", cone_param=1.0)
    with pytest.raises(ParameterLockError):
        solve_kappa(spec)
    with pytest.raises(ParameterLockError):
        solve_kappa(spec, k=1, mu=12.0)


# connections ---------------------------------------------------------------

def test_anchor_radius():
    """🧪 r_a = (2C)^{1/6}"""
    assert anchor_radius(preset("canonical_CP2", cone_param=4.0)) == pytest.approx(8 ** (1 / 6))
    assert anchor_radius(preset("canonical_CP2", cone_param=0.0)) == 1.0


@pytest.mark.parametrize("index", [0, 1, 2])
def test_mu12_instantons(cp2, cp2_grid, index):
    """🧪 κFθ̂ − I d^cF is HYM for each μ = 12 eigenfunction"""
    conn = assemble_connection(polynomial_solution(cp2.spec, 1), cp2_eigenfunctions_mu12()[index], cp2)
    # (4κ + rκ')/μ = r²/2, so I(r) = r²/2 exactly
    assert conn.integration_constant == pytest.approx(2 ** (1 / 3) / 2)
    assert np.allclose(_values(conn.radial_integral, R_GRID), R_GRID ** 2 / 2, rtol=1e-10)
    for report in verify_hym(conn, cp2, 0.0, cp2_grid):
        assert report.sup_residual < HYM_TOL, report.check
    for report in verify_reduced_equations(conn, cp2_grid) + [curvature_closed_form(conn, cp2_grid)]:
        assert report.sup_residual < DEFAULT_TOLERANCES["reduced"], report.check


def test_mu12_instantons_are_distinct(cp2, cp2_grid):
    """🧪 Different eigenfunctions with the same μ give different curvatures"""
    kappa = polynomial_solution(cp2.spec, 1)
    curvatures = [exterior_derivative(assemble_connection(kappa, F, cp2).total).values(cp2_grid)
                  for F in cp2_eigenfunctions_mu12()]
    for i in range(3):
        for j in range(i + 1, 3):
            assert np.max(np.abs(curvatures[i] - curvatures[j])) > 1e-6


def test_quadrature_backed_instanton(cp2, cp2_grid):
    """🧪 The second μ = 12 solution needs a numeric radial integral"""
    kappa = solve_kappa(cp2.spec, mu=12.0, c1=0.0, c2=1.0)
    conn = assemble_connection(kappa, cp2_eigenfunctions_mu12()[2], cp2)
    for report in verify_hym(conn, cp2, 0.0, cp2_grid[:3]):
        assert report.sup_residual < 1e-6, report.check


def test_mu0_connection_is_hym(cp2, cp2_grid):
    """🧪 c₁r⁻⁴θ + c₂θ − 2c₂β̂ is HYM"""
    conn = assemble_connection(solve_kappa(cp2.spec, mu=0.0, c1=1.0, c2=1.0), 1, cp2)
    for report in verify_hym(conn, cp2, 0.0, cp2_grid):
        assert report.sup_residual < HYM_TOL, report.check


def test_wrong_eigenfunction_is_rejected(cp2):
    """🧪 Pairing κ with a function of another eigenvalue fails the anchor equation"""
    t = cp2.chart.symbol("t")
    with pytest.raises(InconsistentStructureError):
        assemble_connection(polynomial_solution(cp2.spec, 1), t ** 2, cp2)
    with pytest.raises(InconsistentStructureError):
        assemble_connection(solve_kappa(cp2.spec, mu=0.0), t, cp2)


# energy --------------------------------------------------------------------

@pytest.mark.parametrize("C", [0.5, 1.0, 2.0])
def test_energy_of_radial_connection(C):
    """🧪 E(r⁻⁴θ)·C = (8π/3)·vol(CP²), with the base volume from the same quadrature"""
    S = build_structure(preset("canonical_CP2", cone_param=C))
    result = yang_mills_energy(elementary_connections(S)["r^-4 theta"][0], S, r_max=10.0)
    assert result.tail_exponent == pytest.approx(12.0, abs=1e-6)
    assert not result.divergent
    assert result.vol_base == pytest.approx(math.pi ** 2 / 2, rel=1e-6)
    assert result.extrapolated * C / result.vol_base == pytest.approx(8 * math.pi / 3, rel=1e-3)


def test_base_volumes():
    """🧪 vol(CP²) = π²/2 and vol(⅔·S²×S²) = (2/3)²π² by the base cubature"""
    assert base_volume(build_structure(preset("canonical_CP2", cone_param=1.0))) == \
        pytest.approx(math.pi ** 2 / 2, rel=1e-6)
    assert base_volume(build_structure(preset("canonical_S2xS2", cone_param=1.0))) == \
        pytest.approx(4 * math.pi ** 2 / 9, rel=1e-6)


def test_mu12_instanton_energy_diverges(cp2):
    """🧪 The μ = 12 instanton has ρ(r) ~ r⁵, so its energy is flagged divergent"""
    conn = assemble_connection(polynomial_solution(cp2.spec, 1), cp2_eigenfunctions_mu12()[2], cp2)
    result = yang_mills_energy(conn, cp2, r_max=8.0)
    assert result.divergent
    assert result.tail_exponent < TAIL_CONVERGENCE
    assert math.isinf(result.extrapolated)


def test_base_integral_of_oscillating_density(cp2):
    """🧪 Periodic coordinates are refined until the trapezoid sums agree"""
    x1, x2 = (cp2.chart.index(c) for c in ("x1", "x2"))

    def density(points):
        return np.cos(6 * points[:, x1 - 2]) ** 2 * np.sin(points[:, x2 - 2])

    value, nodes = base_integral(cp2, density, [x1, x2])
    # t ∈ (0, 1) and x3 ∈ (0, 2π) are constant directions; ∫cos²6x1 = 2π, ∫sin x2 = 2
    assert value == pytest.approx(2 * math.pi * 2 * 2 * math.pi, rel=1e-8)
    assert nodes > 8


def test_base_integral_gives_up(cp2):
    """🧪 A step in a periodic direction never settles and raises QuadratureError"""
    x1 = cp2.chart.index("x1")
    # only the node x1 = 0 sees the step, so each doubling halves the sum
    with pytest.raises(QuadratureError):
        base_integral(cp2, lambda points: (points[:, x1 - 2] < math.pi / 64).astype(float), [x1])


def test_elementary_curvature_norms(cp2, cp2_grid):
    """🧪 ‖F‖² of the elementary connections matches the closed forms"""
    for report in elementary_norm_residual(cp2, cp2_grid):
        assert report.sup_residual < 1e-8, report.check


def test_energy_on_the_cone_raises():
    """🧪 C = 0 has no finite energy"""
    S = build_structure(preset("canonical_CP2", cone_param=0.0))
    with pytest.raises(QuadratureError):
        yang_mills_energy(elementary_connections(S)["r^-4 theta"][0], S, r_max=5.0)


# Killing fields and Levi-Civita -------------------------------------------

@pytest.mark.parametrize("name,expected", [
    ("d_y", 2.0), ("dual_sigma1", -4.0 / 3.0), ("d_x3", 0.0), ("right_sin", 0.0), ("right_cos", 0.0),
])
def test_killing_duals_are_hym(cp2, cp2_grid, name, expected):
    """🧪 dX♭ is (1,1) with constant (F∧ω²)/ω³"""
    c, spread, hym = killing_dual_check(killing_fields(cp2)[name], cp2, cp2_grid)
    assert c == pytest.approx(expected, abs=1e-8)
    assert spread.sup_residual < DEFAULT_TOLERANCES["killing"]
    assert hym.sup_residual < DEFAULT_TOLERANCES["killing"]


def test_killing_catalog_is_cp2_only():
    """🧪 No Killing catalog on S²×S²"""
    with pytest.raises(ParameterLockError):
        killing_fields(build_structure(preset("canonical_S2xS2", cone_param=1.0)))


def test_levi_civita_on_the_cone_is_flat():
    """🧪 At C = 0 the Levi-Civita connection has F ≡ 0"""
    S = build_structure(preset("canonical_CP2", cone_param=0.0))
    grid = sample_points(S.chart, 4, seed=7, margin=0.1)
    for report in verify_levi_civita(0.0, grid):
        assert report.sup_residual < DEFAULT_TOLERANCES["levi_civita"], report.check


def test_base_levi_civita_control_is_not_hym(cp2, cp2_grid):
    """🧪 The pulled-back u(2) connection of CP² has F∧ω² ≠ 0"""
    assert cp2_levi_civita_control(1.0, cp2_grid).sup_residual > 1e-3


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
