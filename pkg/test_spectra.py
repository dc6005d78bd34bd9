#!/usr/bin/env python3
"""
Tests for the Laplacian spectra and the polynomial-profile search (spectra.py)
"""

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from forms import ScalarField
from models import SpectrumError
from spectra import (
    catalog_table,
    cp2_eigenfunctions_mu12,
    enumerate_polynomial_k,
    laplacian_residual,
    polynomial_branch,
    s2xs2_eigenfunctions_k1,
    spectral_metric,
    spectrum,
    sum_of_four_squares,
)

S2XS2_POLYNOMIAL_K = {0, 1, 6, 15, 64, 153, 638, 1519, 6320, 15041, 62566, 148895, 619344}


@pytest.mark.parametrize("manifold,k,mu,multiplicity", [
    ("CP2", 0, 0, 1),
    ("CP2", 1, 12, 32),
    ("CP2", 3, 60, 256),
    ("S2xS2", 1, 12, 6),
    ("S2xS2", 6, 252, 26),
    ("T4", 1, 1, 8),
    ("T4", 2, 2, 24),
])
def test_catalog_values(manifold, k, mu, multiplicity):
    """🧪 Eigenvalues and multiplicities from the catalog"""
    entry = spectrum(manifold, k)
    assert entry.mu == mu
    assert entry.multiplicity == multiplicity


def test_unsupported_spectra():
    """🧪 R⁴ has no discrete spectrum; negative k is rejected"""
    with pytest.raises(SpectrumError):
        spectrum("R4", 1)
    with pytest.raises(SpectrumError):
        spectrum("CP2", -1)
    with pytest.raises(SpectrumError):
        enumerate_polynomial_k("T4", 10)


def test_sum_of_four_squares():
    """🧪 Jacobi's count r₄ for small k"""
    assert [sum_of_four_squares(k) for k in range(6)] == [1, 8, 24, 32, 24, 48]


def test_polynomial_branch_labels():
    """🧪 μ = 0 constant, μ = 12 and 96 second branch, μ = 60 first branch"""
    assert polynomial_branch(0) == "constant"
    assert polynomial_branch(12) == "c2"
    assert polynomial_branch(60) == "c1"
    assert polynomial_branch(96) == "c2"
    assert polynomial_branch(32) is None
    assert polynomial_branch(-8) is None


def test_cp2_polynomial_indices():
    """🧪 On CP² every k ≢ 2 (mod 3) gives a polynomial profile"""
    assert enumerate_polynomial_k("CP2", 10) == [0, 1, 3, 4, 6, 7, 9, 10]


def test_s2xs2_polynomial_indices():
    """🧪 The Pell-type search up to k = 650000"""
    assert set(enumerate_polynomial_k("S2xS2", 650000)) == S2XS2_POLYNOMIAL_K


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 3000), st.integers(1, 3000))
def test_chunked_search_matches_full_run(k_min, width):
    """🧪 Splitting the k range gives the same union"""
    k_max = k_min + width
    split = k_min + width // 2
    chunks = enumerate_polynomial_k("S2xS2", split, k_min) + enumerate_polynomial_k("S2xS2", k_max, split + 1)
    assert chunks == enumerate_polynomial_k("S2xS2", k_max, k_min)


def test_catalog_table_columns():
    """🧪 CSV-ready table with the polynomial flag"""
    table = catalog_table("S2xS2", 6)
    assert list(table.columns) == ["manifold", "k", "mu", "multiplicity", "polynomial_kappa"]
    assert table.loc[table["k"] == 6, "polynomial_kappa"].item()
    assert not table.loc[table["k"] == 2, "polynomial_kappa"].item()
    assert list(catalog_table("S2xS2", 20, polynomial_only=True)["k"]) == [0, 1, 6, 15]


def test_cp2_eigenfunctions():
    """🧪 The three μ = 12 functions on (CP², g_FS)"""
    g4 = spectral_metric("CP2")
    for F in cp2_eigenfunctions_mu12():
        assert laplacian_residual(F, 12.0, g4, n=4, seed=5) < 1e-4


def test_s2xs2_eigenfunctions():
    """🧪 Coordinate functions of the spheres have μ = 12 for ⅔g"""
    g4 = spectral_metric("S2xS2")
    for F in s2xs2_eigenfunctions_k1()[:3]:
        assert laplacian_residual(F, 12.0, g4, n=4, seed=6) < 1e-4


def test_laplacian_residual_is_second_order():
    """🧪 Halving the step divides the eigenfunction residual by about four"""
    g4 = spectral_metric("S2xS2")
    F = s2xs2_eigenfunctions_k1()[0]
    grid = np.array([[0.7, 1.0, 1.3, 2.0], [1.5, 0.3, 0.6, 4.0]])
    residuals = [laplacian_residual(F, 12.0, g4, grid=grid, h=h) for h in (0.04, 0.02, 0.01)]
    for coarse, fine in zip(residuals, residuals[1:]):
        assert 3.0 < coarse / fine < 5.0


def test_wrong_eigenvalue_is_detected():
    """🧪 A μ = 12 function is not a μ = 32 eigenfunction"""
    g4 = spectral_metric("CP2")
    F = cp2_eigenfunctions_mu12()[0]
    assert laplacian_residual(F, 32.0, g4, n=4, seed=5) > 1e-2


def test_constants_are_harmonic():
    """🧪 ΔF = 0 for constant F on the torus"""
    g4 = spectral_metric("T4")
    F = ScalarField(g4.chart, sp.Integer(3))
    assert laplacian_residual(F, 0.0, g4, grid=np.array([[1.0, 2.0, 3.0, 4.0]])) < 1e-12


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
