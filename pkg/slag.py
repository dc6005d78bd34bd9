"""
Special Lagrangian leaves of the canonical bundles.

CP² leaves are the integral manifolds of ⟨∂r, ∂t, cos(3y)E₂ − sin(3y)E₃⟩ at
fixed y; S²×S² leaves are those of ⟨∂r, ∂r₁, ∂r₂⟩ at fixed (y, θ₁ − θ₂).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import sympy as sp

from forms import Distribution, KForm, VectorField, exterior_derivative, involutivity_defect, restrict_to_distribution
from geometry import SU3Structure
from models import ParameterLockError, ResidualReport
from utils import DEFAULT_FD_STEP, sample_points

logger = logging.getLogger(__name__)

LEAF_FAMILIES = ("canonical_CP2", "canonical_S2xS2")

# (θ₁ − θ₂, y, swap ∂r₁ and ∂r₂ so that Ω⁺ is positive)
S2XS2_FAMILIES = {1: (0.0, math.pi / 8, False), 2: (math.pi / 2, 0.0, True)}


@dataclass
class SLagLeafSpec:
    """A leaf family: {"y": y0} on CP², {"family": 1 | 2} or {"theta_diff", "y"} on S²×S²."""

    background: str
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.background not in LEAF_FAMILIES:
            raise ParameterLockError(f"No leaves on {self.background}")
        if self.background == "canonical_CP2":
            y = float(self.parameters.get("y", 0.0))
            if not 0 <= y < 2 * math.pi / 3:
                raise ParameterLockError(f"y = {y} outside [0, 2π/3)")
        elif "family" in self.parameters:
            if self.parameters["family"] not in S2XS2_FAMILIES:
                raise ParameterLockError(f"Unknown S²×S² leaf family {self.parameters['family']}")
        elif not {"theta_diff", "y"} <= set(self.parameters):
            raise ParameterLockError("S²×S² leaves need a family or both theta_diff and y")

    @property
    def y(self) -> float:
        if "family" in self.parameters:
            return S2XS2_FAMILIES[self.parameters["family"]][1]
        return float(self.parameters.get("y", 0.0))

    @property
    def theta_diff(self) -> float:
        if "family" in self.parameters:
            return S2XS2_FAMILIES[self.parameters["family"]][0]
        return float(self.parameters.get("theta_diff", 0.0))

    @property
    def swapped(self) -> bool:
        return "family" in self.parameters and S2XS2_FAMILIES[self.parameters["family"]][2]


def build_distribution(leaf: SLagLeafSpec, S: SU3Structure) -> Distribution:
    """Generators of the leaf distribution, ∂r first."""
    if S.spec.family != leaf.background:
        raise ParameterLockError(f"Leaf on {leaf.background} checked against {S.spec.family}")
    chart = S.chart
    d_r = VectorField.coordinate(chart, "r")
    if leaf.background == "canonical_CP2":
        # frame.dual holds ∂r, the fibre field and the lifts of (∂t, E₁, E₂, E₃)
        E2, E3 = S.frame.dual[4], S.frame.dual[5]
        X = E2 * sp.cos(3 * sp.nsimplify(leaf.y)) - E3 * sp.sin(3 * sp.nsimplify(leaf.y))
        return Distribution(chart, [d_r, VectorField.coordinate(chart, "t"), X])
    d_r1, d_r2 = VectorField.coordinate(chart, "r1"), VectorField.coordinate(chart, "r2")
    return Distribution(chart, [d_r, d_r2, d_r1] if leaf.swapped else [d_r, d_r1, d_r2])


def leaf_points(leaf: SLagLeafSpec, S: SU3Structure, n: int, seed: int = 0) -> np.ndarray:
    """Sampled chart points lying on leaves of the family."""
    points = sample_points(S.chart, n, seed=seed, margin=0.1)
    points[:, S.chart.index("y")] = leaf.y
    if leaf.background == "canonical_S2xS2":
        th1 = S.chart.index("th1")
        points[:, S.chart.index("th2")] = np.mod(points[:, th1] - leaf.theta_diff, 2 * math.pi)
    return points


def verify_involutivity(D: Distribution, grid: np.ndarray, fd_step: float = DEFAULT_FD_STEP) -> ResidualReport:
    """Smallest singular value of the brackets' component outside span(D), per point."""
    grid = D.chart.validate(np.atleast_2d(grid))
    samples = [involutivity_defect(D.generators, p, fd_step) for p in grid]
    return ResidualReport.from_samples("involutivity", samples, rank=D.rank)


def gram_schmidt(vectors: List[np.ndarray], g: np.ndarray) -> List[np.ndarray]:
    """g-orthonormalize in the given order."""
    basis: List[np.ndarray] = []
    for v in vectors:
        w = np.array(v, dtype=float)
        for e in basis:
            w = w - (e @ g @ w) * e
        norm = math.sqrt(float(w @ g @ w))
        basis.append(w / norm)
    return basis


def verify_calibration(leaf: SLagLeafSpec, S: SU3Structure, grid: np.ndarray) -> List[ResidualReport]:
    """
    Lagrangian and calibration residuals on g-orthonormalized generators.

    Returns:
        Reports for sup |ω(eᵢ, eⱼ)|, |Ω⁻(e₁, e₂, e₃)| and |Ω⁺(e₁, e₂, e₃) − 1|
    """
    D = build_distribution(leaf, S)
    grid = S.chart.validate(np.atleast_2d(grid))
    omega, lagrangian, imaginary, calibration = [], [], [], []
    for p in grid:
        e = gram_schmidt(D.vectors_at(p), S.metric.at(p))
        om = S.omega.at(p)
        lagrangian.append(max(abs(om.evaluate([e[i], e[j]])) for i, j in ((0, 1), (0, 2), (1, 2))))
        imaginary.append(abs(S.om_minus.at(p).evaluate(e)))
        calibration.append(abs(S.om_plus.at(p).evaluate(e) - 1.0))
    details = {"family": leaf.background, "parameters": dict(leaf.parameters)}
    return [
        ResidualReport.from_samples("slag_omega", lagrangian, **details),
        ResidualReport.from_samples("slag_Omega_minus", imaginary, **details),
        ResidualReport.from_samples("slag_calibration", calibration, **details),
    ]


def induced_metric(leaf: SLagLeafSpec, S: SU3Structure, p, coordinates: str = "t") -> np.ndarray:
    """
    Gram matrix of the leaf generators at p.

    With coordinates="s" on CP² leaves the ∂t generator is replaced by
    ∂s for t = cos²s, giving diag(r⁶/(r⁶ − C), r², r²cos²s).
    """
    D = build_distribution(leaf, S)
    vectors = D.vectors_at(p)
    if coordinates == "s":
        if leaf.background != "canonical_CP2":
            raise ParameterLockError("The s coordinate exists on CP² leaves only")
        t = float(p[S.chart.index("t")])
        vectors[1] = vectors[1] * (-2.0 * math.sqrt(t * (1.0 - t)))
    elif coordinates != "t":
        raise ParameterLockError(f"Unknown leaf coordinates {coordinates}")
    V = np.column_stack(vectors)
    return V.T @ S.metric.at(p) @ V


def flat_restriction_check(conn: KForm, leaf: SLagLeafSpec, S: SU3Structure, grid: np.ndarray,
                           fd_step: float = DEFAULT_FD_STEP) -> ResidualReport:
    """sup over the grid of dA evaluated on all generator pairs."""
    D = build_distribution(leaf, S)
    F = exterior_derivative(conn, fd_step)
    grid = S.chart.validate(np.atleast_2d(grid))
    samples = [restrict_to_distribution(F, D, p).max_abs() for p in grid]
    return ResidualReport.from_samples("flat_restriction", samples, family=leaf.background)


def involutivity_control(S: SU3Structure) -> Distribution:
    """⟨∂r, E₂, E₃⟩ on the CP² bundle: not closed under the bracket."""
    chart = S.chart
    return Distribution(chart, [VectorField.coordinate(chart, "r"), S.frame.dual[4], S.frame.dual[5]])


def leaf_metric_limits(S_by_C: Dict[float, SU3Structure], r: float, s: float, x: Optional[List[float]] = None):
    """Induced CP²-leaf metric at fixed (r, s) for several cone parameters, keyed by C."""
    t = math.cos(s) ** 2
    rest = x or [1.0, 1.0, 1.0]
    leaf = SLagLeafSpec("canonical_CP2", {"y": 0.0})
    return {C: induced_metric(leaf, S, np.array([r, 0.0, t] + rest), coordinates="s")
            for C, S in S_by_C.items()}
