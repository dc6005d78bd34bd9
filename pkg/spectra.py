"""
Laplacian spectra of the four-dimensional bases.

Eigenvalues and multiplicities come from closed-form catalogs. Laplacians
are the positive Laplace–Beltrami operator Δf = −(1/√g)∂_i(√g g^{ij}∂_j f),
evaluated by divergence-form central differences.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
import sympy as sp

from forms import MetricField, ScalarField, metric_inverse
from geometry import base_chart, catalog_metric
from models import SpectrumError
from utils import sample_points

logger = logging.getLogger(__name__)

MANIFOLDS = ("CP2", "S2xS2", "T4", "R4")
LAPLACIAN_STEP = 1e-3

# The S²×S² catalog is for the metric ⅔·g on the product of spheres of radius ½.
S2XS2_SCALE = sp.Rational(2, 3)


@dataclass
class EigenvalueEntry:
    """One eigenvalue of the Laplacian with its multiplicity."""

    manifold: str
    k: int
    mu: float
    multiplicity: int

    def to_dict(self):
        return {"manifold": self.manifold, "k": self.k, "mu": self.mu, "multiplicity": self.multiplicity}


def sum_of_four_squares(k: int) -> int:
    """r₄(k) = 8·Σ_{d | k, 4 ∤ d} d, with r₄(0) = 1."""
    if k == 0:
        return 1
    total = 0
    for d in range(1, math.isqrt(k) + 1):
        if k % d:
            continue
        for divisor in {d, k // d}:
            if divisor % 4:
                total += divisor
    return 8 * total


def spectrum(manifold: str, k: int) -> EigenvalueEntry:
    """
    The k-th eigenvalue of the Laplacian and its multiplicity.

    Args:
        manifold: "CP2", "S2xS2" (metric ⅔g) or "T4" (period 2π)
        k: Index k ≥ 0

    Returns:
        EigenvalueEntry; the k = 0 entry is the constants with multiplicity 1

    Raises:
        SpectrumError: unknown manifold or one with continuous spectrum
    """
    if k < 0:
        raise SpectrumError(f"k must be non-negative, got {k}")
    if manifold == "CP2":
        mu, mult = 4 * k * (k + 2), 4 * (k + 1) ** 3
    elif manifold == "S2xS2":
        mu, mult = 6 * k * (k + 1), 2 * (2 * k + 1)
    elif manifold == "T4":
        # T4 eigenvalues are |n|² for n in Z⁴; every k ≥ 0 occurs
        mu, mult = k, sum_of_four_squares(k)
    elif manifold == "R4":
        raise SpectrumError("R4 has continuous spectrum")
    else:
        raise SpectrumError(f"Unsupported manifold: {manifold}")
    if k == 0:
        mult = 1
    return EigenvalueEntry(manifold, k, float(mu), int(mult))


def spectral_metric(manifold: str) -> MetricField:
    """The metric the catalog of ``manifold`` refers to."""
    if manifold not in ("CP2", "S2xS2", "T4"):
        raise SpectrumError(f"No spectral metric for {manifold}")
    _, g = catalog_metric(manifold)
    if manifold == "S2xS2":
        return MetricField(g.chart, g.matrix * S2XS2_SCALE)
    return g


def cp2_eigenfunctions_mu12() -> Tuple[ScalarField, ScalarField, ScalarField]:
    """Three eigenfunctions of the Fubini–Study Laplacian with μ = 12."""
    chart = base_chart("CP2")
    t, x1, x2, x3 = chart.symbols
    F1 = t * (sp.cos(x3) * sp.cos(x1) - sp.sin(x3) * sp.sin(x1) * sp.cos(x2))
    F2 = t * (sp.sin(x3) * sp.cos(x1) + sp.cos(x3) * sp.sin(x1) * sp.cos(x2))
    F3 = -t * sp.sin(x1) * sp.sin(x2)
    return ScalarField(chart, F1), ScalarField(chart, F2), ScalarField(chart, F3)


def s2xs2_eigenfunctions_k1() -> List[ScalarField]:
    """Coordinate functions of each sphere factor: μ = 12 for the metric ⅔g."""
    chart = base_chart("S2xS2")
    r1, th1, r2, th2 = chart.symbols
    functions = []
    for r, th in ((r1, th1), (r2, th2)):
        denom = 1 + r ** 2
        functions.extend([
            (1 - r ** 2) / denom,
            2 * r * sp.cos(th) / denom,
            2 * r * sp.sin(th) / denom,
        ])
    return [ScalarField(chart, f) for f in functions]


def laplace_beltrami(F: ScalarField, g4: MetricField, p, h: float = LAPLACIAN_STEP) -> float:
    """Positive Laplace–Beltrami of F at p by divergence-form central differences."""
    chart = g4.chart
    p = chart.validate(np.asarray(p, dtype=float), pad=1.5 * h)
    n = chart.dim
    eye = np.eye(n)

    def flux(q: np.ndarray, i: int) -> float:
        grad = np.array([(float(F(q + 0.5 * h * eye[j])) - float(F(q - 0.5 * h * eye[j]))) / h
                         for j in range(n)])
        ginv, det = metric_inverse(g4.at(q))
        return math.sqrt(abs(det)) * float(ginv[i] @ grad)

    divergence = sum((flux(p + 0.5 * h * eye[i], i) - flux(p - 0.5 * h * eye[i], i)) / h
                     for i in range(n))
    _, det = metric_inverse(g4.at(p))
    return -divergence / math.sqrt(abs(det))


def laplacian_residual(F: ScalarField, mu: float, g4: MetricField,
                       grid: Optional[np.ndarray] = None, n: int = 40, seed: int = 0,
                       h: float = LAPLACIAN_STEP) -> float:
    """
    sup over a grid of |ΔF − μF| / max(1, |F|).

    Args:
        F: Function on the metric's chart
        mu: Candidate eigenvalue
        g4: Metric
        grid: Points to test; sampled from the chart when omitted
        n: Number of sampled points
        seed: Sampling seed
        h: Finite-difference step

    Returns:
        The worst relative residual
    """
    if grid is None:
        grid = sample_points(g4.chart, n, seed=seed, margin=0.1)
    worst = 0.0
    for p in np.atleast_2d(grid):
        value = float(F(p))
        residual = abs(laplace_beltrami(F, g4, p, h) - mu * value) / max(1.0, abs(value))
        worst = max(worst, residual)
    return worst


# ---------------------------------------------------------------------------
# Polynomial profiles
# ---------------------------------------------------------------------------

def polynomial_branch(mu: int) -> Optional[str]:
    """
    Which branch of the canonical κ-ODE terminates for the integer eigenvalue μ.

    With s² = 4 + μ a perfect square: "c1" when (8 − s)/6 is a non-positive
    integer, "c2" when (4 − s)/6 is, "constant" for s = 2 (μ = 0).
    None when no branch is a polynomial.
    """
    square = 4 + int(mu)
    if square < 0:
        return None
    s = math.isqrt(square)
    if s * s != square:
        return None
    if s == 2:
        return "constant"
    if s >= 8 and (8 - s) % 6 == 0:
        return "c1"
    if s >= 4 and (4 - s) % 6 == 0:
        return "c2"
    return None


def enumerate_polynomial_k(manifold: str, k_max: int, k_min: int = 0) -> List[int]:
    """
    Indices k in [k_min, k_max] whose eigenvalue gives a polynomial κ.

    Integer arithmetic throughout, so chunked runs union to the full run.
    """
    if manifold not in ("CP2", "S2xS2"):
        raise SpectrumError(f"No canonical bundle profile catalog for {manifold}")
    if manifold == "CP2":
        return [k for k in range(k_min, k_max + 1) if k % 3 != 2]
    return [k for k in range(k_min, k_max + 1) if polynomial_branch(6 * k * (k + 1)) is not None]


def catalog_table(manifold: str, k_max: int, k_min: int = 0, polynomial_only: bool = False) -> pd.DataFrame:
    """Spectrum rows with a polynomial_kappa flag, ready for CSV."""
    if polynomial_only:
        ks = enumerate_polynomial_k(manifold, k_max, k_min)
    else:
        ks = range(k_min, k_max + 1)
    rows = []
    for k in ks:
        entry = spectrum(manifold, k)
        row = entry.to_dict()
        row["mu"] = int(entry.mu)
        row["polynomial_kappa"] = (manifold in ("CP2", "S2xS2")
                                   and polynomial_branch(int(entry.mu)) is not None)
        rows.append(row)
    logger.info(f"Catalogued {len(rows)} eigenvalues of {manifold}")
    return pd.DataFrame(rows, columns=["manifold", "k", "mu", "multiplicity", "polynomial_kappa"])
