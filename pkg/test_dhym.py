#!/usr/bin/env python3
"""
Tests for the dHYM cubic, its branches and the six-dimensional check (dhym.py)
"""

import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dhym import (
    BRANCHES,
    brute_force_branch_count,
    count_global_branches,
    cubic_residual,
    cubic_roots,
    dhym_ode_residual,
    dhym_structure,
    emit_branch_samples,
    solve_cubic_branches,
    threshold,
    verify_dhym_6d,
)
from geometry import build_structure, preset
from models import ParameterLockError
from utils import DEFAULT_TOLERANCES, sample_points

DHYM_TOL = DEFAULT_TOLERANCES["dhym"]


def _branch(branches, name):
    return next(b for b in branches if b.branch == name)


def test_roots_at_c_zero():
    """🧪 c = 0: κ ∈ {√3H, 0, −√3H}"""
    assert np.allclose(cubic_roots(0.0, 2.0), [2 * math.sqrt(3), 0.0, -2 * math.sqrt(3)], atol=1e-12)


def test_roots_at_the_discriminant_zero():
    """🧪 c = 8, H = 1: κ ∈ {2, −1, −1}"""
    assert np.allclose(cubic_roots(8.0, 1.0), [2.0, -1.0, -1.0], atol=1e-12)


def test_single_real_root_below_threshold():
    """🧪 |c| > 8H³ leaves one real root, of the sign of c"""
    for c in (8.0, -8.0):
        roots = cubic_roots(c, 0.5)
        assert len(roots) == 1
        assert math.copysign(1.0, roots[0]) == math.copysign(1.0, c)
        assert cubic_residual(c, 0.5, roots)[0] < 1e-14
    assert cubic_roots(4.0, 0.0) == pytest.approx([1.0])
    with pytest.raises(ParameterLockError):
        cubic_roots(1.0, -1.0)


def test_branch_domains_and_flags():
    """🧪 Middle and lower branches start at H = (|c|/8)^(1/3)"""
    branches = solve_cubic_branches(1.0, (0.1, 5.0))
    assert [b.branch for b in branches] == list(BRANCHES)
    assert threshold(1.0) == pytest.approx(0.5)
    upper, middle, lower = branches
    assert upper.domain == (0.1, 5.0)
    assert "crosses_discriminant_zero" in upper.flags
    assert middle.domain[0] == pytest.approx(0.5)
    assert "split_at_discriminant_zero" in lower.flags


def test_negative_c_reflects_the_branches():
    """🧪 c < 0 is κ → −κ of |c|, with upper and lower exchanged"""
    branches = solve_cubic_branches(-1.0, (0.1, 5.0))
    lower = _branch(branches, "lower")
    assert lower.domain == (0.1, 5.0)
    assert "crosses_discriminant_zero" in lower.flags
    upper = _branch(branches, "upper")
    assert float(upper([2.0])[0]) == pytest.approx(-float(_branch(solve_cubic_branches(1.0, (0.1, 5.0)),
                                                                  "lower")([2.0])[0]))


@pytest.mark.parametrize("c", [0.0, 1.0, 8.0])
def test_branches_solve_the_ode(c):
    """🧪 κ'(κ² − H²) = 2Hκ along every branch"""
    for branch in solve_cubic_branches(c, (0.05, 6.0)):
        lo, hi = branch.domain
        grid = np.linspace(lo + 0.05, hi - 0.05, 40)
        report = dhym_ode_residual(branch, grid)
        assert report.sup_residual < DHYM_TOL, branch.branch
        values = branch(grid)
        assert np.max(cubic_residual(c, grid, values)) < 1e-12


def test_hym_limit_in_six_dimensions():
    """🧪 c = 0 upper branch: F = −√3ω, dHYM and HYM with C₀ = 3√3"""
    S = dhym_structure(1.0)
    branch = _branch(solve_cubic_branches(0.0, (0.1, 20.0)), "upper")
    grid = sample_points(S.chart, 6, seed=8, margin=0.1)
    for report in verify_dhym_6d(branch, S, grid):
        assert report.sup_residual < DHYM_TOL, report.check


def test_dhym_is_not_hym_for_nonzero_c():
    """🧪 c = 1 upper branch solves dHYM but F∧ω²/vol varies"""
    S = dhym_structure(1.0)
    branch = _branch(solve_cubic_branches(1.0, (0.1, 20.0)), "upper")
    grid = sample_points(S.chart, 6, seed=8, margin=0.1)
    reports = {r.check: r for r in verify_dhym_6d(branch, S, grid)}
    assert reports["dhym_6d"].sup_residual < DHYM_TOL
    assert reports["dhym_F_wedge_Omega_plus"].sup_residual < DHYM_TOL
    assert reports["hym_trace_variation"].sup_residual > 1e-3


def test_six_dimensional_check_needs_cp2():
    """🧪 The reduction uses ω = dH∧θ + 2Hω̂ of the CP² bundle"""
    S = build_structure(preset("canonical_S2xS2", cone_param=1.0))
    branch = solve_cubic_branches(0.0, (0.1, 5.0))[0]
    with pytest.raises(ParameterLockError):
        verify_dhym_6d(branch, S, sample_points(S.chart, 2, seed=0, margin=0.1))


@pytest.mark.parametrize("c,C,expected", [(1.0, 0.0, 1), (1.0, 8.0, 3), (7.9, 8.0, 3), (9.0, 8.0, 1)])
def test_global_branch_count(c, C, expected):
    """🧪 Three global branches exactly when c ≤ C on the CP² bundle"""
    assert count_global_branches(c, preset("canonical_CP2", cone_param=C)) == expected


@pytest.mark.parametrize("c,C", [(1.0, 0.0), (1.0, 8.0), (0.5, 8.0), (20.0, 8.0)])
def test_brute_force_agrees_with_count(c, C):
    """🧪 numpy root counting on a dense grid matches the closed criterion"""
    assert brute_force_branch_count(c, C) == count_global_branches(c, preset("canonical_CP2", cone_param=C))


@settings(max_examples=50, deadline=None)
@given(st.floats(-30.0, 30.0), st.floats(0.0, 30.0))
def test_brute_force_agrees_on_random_pairs(c, C):
    """🧪 Dense-grid root counting and the c ≤ C criterion agree away from |c| = C"""
    assume(abs(abs(c) - C) > 0.05 * max(1.0, C))
    expected = 3 if abs(c) <= C else 1
    assert count_global_branches(c, preset("canonical_CP2", cone_param=C)) == expected
    assert brute_force_branch_count(c, C) == expected


def test_branch_samples_table(tmp_path):
    """🧪 (c, H, branch, κ) rows with reflected labels for c < 0"""
    output = tmp_path / "branches.csv"
    frame = emit_branch_samples([-8.0, 0.0, 8.0], [1.0, 2.0], output=str(output))
    assert list(frame.columns) == ["c", "H", "branch", "kappa"]
    assert len(frame) == 18
    row = frame[(frame["c"] == -8.0) & (frame["H"] == 1.0) & (frame["branch"] == "lower")]
    assert row["kappa"].item() == pytest.approx(-2.0)
    assert np.max(cubic_residual(frame["c"].to_numpy(), frame["H"].to_numpy(), frame["kappa"].to_numpy())) < 1e-12
    assert list(pd.read_csv(output).columns) == ["c", "H", "branch", "kappa"]


@settings(max_examples=60, deadline=None)
@given(st.floats(-20.0, 20.0), st.floats(0.01, 5.0))
def test_root_count_follows_the_discriminant(c, H):
    """🧪 Three real roots iff 8H³ ≥ |c|, all satisfying the cubic"""
    ratio = abs(c) / (8 * H ** 3)
    assume(abs(ratio - 1.0) > 1e-6)
    roots = cubic_roots(c, H)
    assert len(roots) == (3 if ratio < 1 else 1)
    assert np.all(np.diff(roots) <= 0)
    assert np.max(cubic_residual(c, H, roots)) < 1e-10


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
