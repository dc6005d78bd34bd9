"""
Deformed Hermitian Yang–Mills connections κ(H)Θ.

On the b = p = q = 0 backgrounds the dHYM equation for A = κ(H)Θ reduces to
κ'(κ² − H²) = 2Hκ, whose solutions are the branches of the cubic
κ³ − 3H²κ − c/4 = 0. Branches are labelled by value (upper, middle, lower);
where only one real root exists it continues the upper branch for c > 0 and
the lower branch for c < 0.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import sympy as sp

from forms import ScalarField, coordinate_symbol, exterior_derivative
from geometry import SU3Structure, build_structure, form_values, positivity_window, preset
from instantons import line_chart
from models import BackgroundSpec, ParameterLockError, ResidualReport
from utils import write_report

logger = logging.getLogger(__name__)

BRANCHES = ("upper", "middle", "lower")
BRANCH_INDEX = {"upper": 0, "middle": 1, "lower": 2}  # k in 2H·cos(φ/3 − 2πk/3)
SAMPLE_COLUMNS = ["c", "H", "branch", "kappa"]


@dataclass
class CubicBranch:
    """One continuous root κ(H) of κ³ − 3H²κ − c/4 = 0."""

    c: float
    branch: str
    domain: Tuple[float, float]
    profile: ScalarField
    flags: List[str] = field(default_factory=list)

    @property
    def expr(self) -> sp.Expr:
        return self.profile.expr

    def __call__(self, H):
        return self.profile(np.reshape(np.asarray(H, dtype=float), (-1, 1)))


def threshold(c: float) -> float:
    """H at which the discriminant 108H⁶ − 27c²/16 vanishes."""
    return (abs(c) / 8.0) ** (1.0 / 3.0)


def discriminant(c: float, H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    return 108.0 * H ** 6 - 27.0 * c ** 2 / 16.0


def _polish(kappa: np.ndarray, c: float, H: float) -> np.ndarray:
    """One Newton step on the cubic; skipped next to a double root."""
    f = kappa ** 3 - 3 * H ** 2 * kappa - c / 4
    fp = 3 * kappa ** 2 - 3 * H ** 2
    safe = np.abs(fp) > 1e-8 * max(1.0, H ** 2)
    return np.where(safe, kappa - f / np.where(safe, fp, 1.0), kappa)


def cubic_roots(c: float, H: float) -> np.ndarray:
    """
    All real roots of κ³ − 3H²κ − c/4 at one H, sorted descending.

    Trigonometric form when the discriminant is non-negative, hyperbolic
    form otherwise.
    """
    if H < 0:
        raise ParameterLockError(f"H must be non-negative, got {H}")
    if H == 0:
        return np.array([math.copysign(abs(c / 4) ** (1.0 / 3.0), c)])
    ratio = c / (8 * H ** 3)
    if abs(ratio) <= 1.0:
        phi = math.acos(ratio)
        roots = np.array([2 * H * math.cos(phi / 3 - 2 * math.pi * k / 3) for k in range(3)])
    else:
        roots = np.array([math.copysign(2 * H * math.cosh(math.acosh(abs(ratio)) / 3), c)])
    return np.sort(_polish(roots, c, H))[::-1]


def cubic_residual(c: float, H, kappa) -> np.ndarray:
    """|κ³ − 3H²κ − c/4| relative to max(1, |κ|³)."""
    H, kappa = np.asarray(H, dtype=float), np.asarray(kappa, dtype=float)
    value = kappa ** 3 - 3 * H ** 2 * kappa - c / 4
    return np.abs(value) / np.maximum(1.0, np.abs(kappa) ** 3)


def _branch_expr(c: float, label: str, H: sp.Symbol) -> sp.Expr:
    """Closed form of a branch for c ≥ 0."""
    c_sym = sp.nsimplify(c)
    ratio = c_sym / (8 * H ** 3)
    k = BRANCH_INDEX[label]
    trig = 2 * H * sp.cos(sp.acos(ratio) / 3 - 2 * sp.pi * k / 3)
    if label != "upper" or c == 0:
        return trig
    hyperbolic = 2 * H * sp.cosh(sp.acosh(ratio) / 3)
    return sp.Piecewise((hyperbolic, H < sp.nsimplify(threshold(c))), (trig, True))


def solve_cubic_branches(c: float, H_range: Tuple[float, float]) -> List[CubicBranch]:
    """
    The continuous branches of the cubic on an H interval.

    Args:
        c: Integration constant; c < 0 is the reflection κ → −κ of |c|
        H_range: (lo, hi) with 0 ≤ lo < hi

    Returns:
        Branches with their domains; middle and lower exist only where
        H ≥ (|c|/8)^(1/3), and a range crossing that point is flagged
    """
    lo, hi = float(H_range[0]), float(H_range[1])
    if not 0 <= lo < hi:
        raise ParameterLockError(f"Bad H range {H_range}")
    H = coordinate_symbol("H")
    sign = -1 if c < 0 else 1
    H_star = threshold(c)
    branches = []
    for label in BRANCHES:
        flags: List[str] = []
        domain = (lo, hi)
        if label != "upper" and c != 0:
            if hi <= H_star:
                continue
            if lo < H_star:
                domain = (H_star, hi)
                flags.append("split_at_discriminant_zero")
        elif c != 0 and lo < H_star < hi:
            flags.append("crosses_discriminant_zero")
        expr = sign * _branch_expr(abs(c), label, H)
        # reflection reverses the order of the roots
        name = {"upper": "lower", "lower": "upper", "middle": "middle"}[label] if sign < 0 else label
        branches.append(CubicBranch(float(c), name, domain, ScalarField(line_chart("H", domain), expr), flags))
    for branch in branches:
        if branch.flags:
            logger.info(f"c = {c}: {branch.branch} branch on {branch.domain} ({', '.join(branch.flags)})")
    return branches


def dhym_ode_residual(branch: CubicBranch, grid: Sequence[float], min_gap: float = 1e-6) -> ResidualReport:
    """
    sup |κ'(κ² − H²) − 2Hκ| with κ' the analytic derivative of the branch.

    Points with κ² = H² are skipped and flagged.
    """
    H = coordinate_symbol("H")
    residual = sp.diff(branch.expr, H) * (branch.expr ** 2 - H ** 2) - 2 * H * branch.expr
    residual_fn = sp.lambdify(H, residual, modules="numpy")
    kappa_fn = sp.lambdify(H, branch.expr, modules="numpy")
    samples, flags = [], []
    for value in np.asarray(grid, dtype=float):
        kappa = float(kappa_fn(value))
        if abs(kappa ** 2 - value ** 2) < min_gap:
            if "kappa_squared_equals_H_squared" not in flags:
                flags.append("kappa_squared_equals_H_squared")
            continue
        samples.append(abs(float(residual_fn(value))) / max(1.0, abs(kappa) ** 3))
    return ResidualReport.from_samples("dhym_ode", samples, flags, c=branch.c, branch=branch.branch)


def verify_dhym_6d(branch: CubicBranch, S: SU3Structure, grid: np.ndarray) -> List[ResidualReport]:
    """
    Check A = κ(H)Θ in six dimensions, with Θ = −θ and H the moment map.

    Returns:
        Reports for ⅙F³ − ½F∧ω² (relative to the volume form), the (1,1)
        condition F∧Ω⁺, F∧ω² + 2C₀vol with C₀ = 3√3, and the variation of
        F∧ω²/vol over the grid (zero exactly for HYM solutions)
    """
    if S.spec.family != "canonical_CP2":
        raise ParameterLockError("The 6D dHYM check runs on canonical_CP2, where ω = dH∧θ + 2Hω̂")
    grid = S.chart.validate(np.atleast_2d(grid))
    H = coordinate_symbol("H")
    A = S.fibre_form * (-branch.expr.subs(H, S.moment))
    F = exterior_derivative(A)

    dhym, type_check, trace, ratios = [], [], [], []
    for Fp, om, Op in zip(form_values(F, grid), form_values(S.omega, grid), form_values(S.om_plus, grid)):
        om2 = om.wedge(om)
        vol = om2.wedge(om).top() / 6.0
        F_om2 = Fp.wedge(om2).top()
        top = Fp.wedge(Fp).wedge(Fp).top() / 6.0 - 0.5 * F_om2
        dhym.append(abs(top / vol))
        type_check.append(Fp.wedge(Op).max_abs())
        trace.append(abs(F_om2 / vol + 6.0 * math.sqrt(3.0)))
        ratios.append(float(np.real(F_om2 / vol)))
    variation = max(ratios) - min(ratios) if ratios else math.nan
    details = {"c": branch.c, "branch": branch.branch}
    return [
        ResidualReport.from_samples("dhym_6d", dhym, **details),
        ResidualReport.from_samples("dhym_F_wedge_Omega_plus", type_check, **details),
        ResidualReport.from_samples("dhym_hym_trace", trace, **details),
        ResidualReport.from_samples("hym_trace_variation", [variation], **details),
    ]


def _lower_moment(spec: BackgroundSpec) -> float:
    if spec.is_canonical:
        r_lo = spec.cone_param ** (1.0 / 6.0) if spec.cone_param > 0 else 0.0
        scale = 0.5 if spec.family == "canonical_CP2" else 2.0 / 3.0
        return scale * r_lo ** 2
    return positivity_window(spec)[0]


def count_global_branches(c: float, spec: BackgroundSpec) -> int:
    """
    Branches defined on the whole ray [H₀, ∞).

    Three when the discriminant is non-negative at H₀, i.e. 8H₀³ ≥ |c|;
    on canonical_CP2 with H₀ = C^(1/3)/2 this is c ≤ C.
    """
    H0 = _lower_moment(spec)
    return 3 if 8 * H0 ** 3 >= abs(c) else 1


def brute_force_branch_count(c: float, C: float, n: int = 400) -> int:
    """Minimum number of real roots over a dense H grid from C^(1/3)/2, by numpy root finding."""
    H0 = 0.5 * C ** (1.0 / 3.0) if C > 0 else 0.0
    H_max = 2.0 * max(H0, threshold(c), 1.0)
    fewest = 3
    for H in np.linspace(H0, H_max, n):
        roots = np.roots([1.0, 0.0, -3.0 * H ** 2, -c / 4.0])
        real = np.sum(np.abs(roots.imag) <= 1e-7 * np.maximum(1.0, np.abs(roots)))
        fewest = min(fewest, int(real))
    return fewest


def emit_branch_samples(c_values: Sequence[float], H_grid: Sequence[float],
                        output: Optional[str] = None) -> pd.DataFrame:
    """
    Rows (c, H, branch, kappa) for every real root at each grid point.

    Args:
        c_values: Constants, negative ones included
        H_grid: Non-negative H values
        output: Optional CSV path

    Returns:
        DataFrame with columns c, H, branch, kappa
    """
    rows = []
    for c in c_values:
        for H in H_grid:
            roots = cubic_roots(abs(c), float(H))
            labels = BRANCHES if len(roots) == 3 else ("upper",)
            if c < 0:
                roots = -roots[::-1]
                labels = tuple({"upper": "lower", "lower": "upper", "middle": "middle"}[x] for x in labels[::-1])
            for label, kappa in zip(labels, roots):
                rows.append({"c": float(c), "H": float(H), "branch": label, "kappa": float(kappa)})
    frame = pd.DataFrame(rows, columns=SAMPLE_COLUMNS)
    if output:
        write_report(frame, output)
        logger.info(f"Wrote {len(frame)} branch samples to {output}")
    return frame


def dhym_structure(C: float) -> SU3Structure:
    """canonical_CP2 with cone parameter C."""
    return build_structure(replace(preset("canonical_CP2"), cone_param=C))
