#!/usr/bin/env python3
"""
Tests for the special Lagrangian leaves (slag.py)
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geometry import build_structure, preset
from instantons import elementary_connections
from models import ParameterLockError
from slag import (
    SLagLeafSpec,
    build_distribution,
    flat_restriction_check,
    induced_metric,
    involutivity_control,
    leaf_metric_limits,
    leaf_points,
    verify_calibration,
    verify_involutivity,
)
from utils import DEFAULT_TOLERANCES

CALIBRATION_TOL = DEFAULT_TOLERANCES["calibration"]
INVOLUTIVITY_TOL = DEFAULT_TOLERANCES["involutivity"]


@pytest.fixture(scope="module")
def cp2():
    return build_structure(preset("canonical_CP2", cone_param=1.0))


@pytest.fixture(scope="module")
def s2xs2():
    return build_structure(preset("canonical_S2xS2", cone_param=1.0))


def _assert_special_lagrangian(leaf, S, n=8, seed=0):
    grid = leaf_points(leaf, S, n, seed=seed)
    for report in verify_calibration(leaf, S, grid):
        assert report.sup_residual < CALIBRATION_TOL, report.check
    assert verify_involutivity(build_distribution(leaf, S), grid).sup_residual < INVOLUTIVITY_TOL


@pytest.mark.parametrize("y", list(np.linspace(0.0, 2 * math.pi / 3, 12, endpoint=False)))
def test_cp2_leaves(cp2, y):
    """🧪 ⟨∂r, ∂t, cos3y E₂ − sin3y E₃⟩ is calibrated by Ω⁺ at every fixed y"""
    _assert_special_lagrangian(SLagLeafSpec("canonical_CP2", {"y": y}), cp2)


@pytest.mark.parametrize("family", [1, 2])
def test_s2xs2_leaf_families(s2xs2, family):
    """🧪 Both S²×S² families are special Lagrangian"""
    _assert_special_lagrangian(SLagLeafSpec("canonical_S2xS2", {"family": family}), s2xs2)


def test_s2xs2_wrong_phase_is_not_calibrated(s2xs2):
    """🧪 θ₁ = θ₂ with y = 0 is Lagrangian but has phase −i"""
    leaf = SLagLeafSpec("canonical_S2xS2", {"theta_diff": 0.0, "y": 0.0})
    reports = {r.check: r for r in verify_calibration(leaf, s2xs2, leaf_points(leaf, s2xs2, 6))}
    assert reports["slag_omega"].sup_residual < CALIBRATION_TOL
    assert reports["slag_calibration"].sup_residual > 0.5


def test_involutivity_control(cp2):
    """🧪 ⟨∂r, E₂, E₃⟩ does not integrate"""
    leaf = SLagLeafSpec("canonical_CP2", {"y": 0.0})
    grid = leaf_points(leaf, cp2, 6)
    assert verify_involutivity(involutivity_control(cp2), grid).sup_residual > 1e-3


def test_flat_restriction(cp2):
    """🧪 r⁻⁴θ is flat on the leaves; (1 − t⁻¹)σ₂ is not"""
    leaf = SLagLeafSpec("canonical_CP2", {"y": 0.3})
    grid = leaf_points(leaf, cp2, 6)
    connections = elementary_connections(cp2)
    flat = flat_restriction_check(connections["r^-4 theta"][0], leaf, cp2, grid)
    assert flat.sup_residual < DEFAULT_TOLERANCES["flat_restriction"]
    control = flat_restriction_check(connections["(1-t^-1) sigma2"][0], leaf, cp2, grid)
    assert control.sup_residual > 1e-3


def test_induced_metric_in_s_coordinates(cp2):
    """🧪 diag(r⁶/(r⁶ − C), r², r²cos²s) with t = cos²s"""
    r, s = 1.7, 0.6
    leaf = SLagLeafSpec("canonical_CP2", {"y": 0.4})
    p = np.array([r, 0.4, math.cos(s) ** 2, 1.0, 1.2, 2.0])
    gram = induced_metric(leaf, cp2, p, coordinates="s")
    expected = np.diag([r ** 6 / (r ** 6 - 1.0), r ** 2, r ** 2 * math.cos(s) ** 2])
    assert np.allclose(gram, expected, atol=1e-10)


def test_leaf_metric_tends_to_the_cone():
    """🧪 The radial entry r⁶/(r⁶ − C) of the CP² leaf metric falls monotonically to the cone value as C → 0"""
    cone_params = (1.0, 0.1, 0.01, 0.0)
    S_by_C = {C: build_structure(preset("canonical_CP2", cone_param=C)) for C in cone_params}
    limits = leaf_metric_limits(S_by_C, r=2.0, s=0.5)
    assert limits[0.0][0, 0] == pytest.approx(1.0)
    assert limits[1.0][0, 0] == pytest.approx(64.0 / 63.0)
    gaps = [float(np.max(np.abs(limits[C] - limits[0.0]))) for C in cone_params[:-1]]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] == pytest.approx(64.0 / (64.0 - 0.01) - 1.0, abs=1e-9)
    for C in cone_params[:-1]:
        assert np.allclose(limits[C][1:, 1:], limits[0.0][1:, 1:])


def test_leaf_parameters_are_validated():
    """🧪 Unknown backgrounds, families and out-of-range y are rejected"""
    with pytest.raises(ParameterLockError):
        SLagLeafSpec("flat_C3", {})
    with pytest.raises(ParameterLockError):
        SLagLeafSpec("canonical_CP2", {"y": 3.0})
    with pytest.raises(ParameterLockError):
        SLagLeafSpec("canonical_S2xS2", {"family": 3})
    with pytest.raises(ParameterLockError):
        SLagLeafSpec("canonical_S2xS2", {"y": 0.0})


def test_leaf_must_match_background(s2xs2):
    """🧪 A CP² leaf cannot be checked on the S²×S² bundle"""
    with pytest.raises(ParameterLockError):
        build_distribution(SLagLeafSpec("canonical_CP2", {"y": 0.0}), s2xs2)
    with pytest.raises(ParameterLockError):
        induced_metric(SLagLeafSpec("canonical_S2xS2", {"family": 1}), s2xs2,
                       np.array([1.5, 0.0, 1.0, 1.0, 1.0, 1.0]), coordinates="s")


@settings(max_examples=8, deadline=None)
@given(st.floats(0.0, 2.0))
def test_every_cp2_leaf_is_lagrangian(y):
    """🧪 ω vanishes on the leaf for any y"""
    cp2 = build_structure(preset("canonical_CP2", cone_param=1.0))
    leaf = SLagLeafSpec("canonical_CP2", {"y": y})
    reports = {r.check: r for r in verify_calibration(leaf, cp2, leaf_points(leaf, cp2, 3, seed=1))}
    assert reports["slag_omega"].sup_residual < CALIBRATION_TOL
    assert reports["slag_calibration"].sup_residual < CALIBRATION_TOL


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
