"""
S¹-invariant abelian instantons.

A separable connection κ·F·θ̂ − I·d^cF solves the Hermitian Yang–Mills
equations when F is a Laplacian eigenfunction on the base (ΔF = μF) and κ
solves a second-order ODE in the radial (or moment-map) variable. This module
solves that ODE per background, assembles the connections and checks them in
six dimensions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy import integrate

from forms import (
    Chart,
    ComplexForm,
    FormValue,
    KForm,
    MatrixForm,
    MetricField,
    ScalarField,
    VectorField,
    basis,
    coordinate_symbol,
    dx,
    exterior_derivative,
    matrix_curvature,
)
from geometry import (
    H_SYMBOL,
    SU3Structure,
    row_sup,
    build_structure,
    check_locks,
    form_values,
    preset,
    su2_dual,
    su2_forms,
    u_profile,
)
from models import (
    BackgroundSpec,
    EnergyResult,
    InconsistentStructureError,
    NoGlobalSolutionError,
    ParameterLockError,
    QuadratureError,
    ResidualReport,
    SpecialFunctionDomainError,
)
from specfun import Hyp2F1Params, bessel_expr, hyp2f1_expr
from spectra import laplace_beltrami, polynomial_branch, spectral_metric, spectrum
from utils import line_grid, sample_points

logger = logging.getLogger(__name__)

PROVENANCES = ("closed_form", "hypergeometric_series", "bessel", "power_law", "candidate")
KAPPA_ZERO_TOL = 1e-12


@dataclass
class KappaSolution:
    """A radial profile κ with the eigenvalue it was solved for."""

    background: BackgroundSpec
    mu: float
    c1: float
    c2: float
    profile: ScalarField
    provenance: str
    domain: Tuple[float, float]
    variable: str = "r"
    polynomial: bool = False
    flags: List[str] = field(default_factory=list)

    @property
    def expr(self) -> sp.Expr:
        return self.profile.expr

    @property
    def symbol(self) -> sp.Symbol:
        return coordinate_symbol(self.variable)

    def __call__(self, x):
        return self.profile(np.reshape(np.asarray(x, dtype=float), (-1, 1)))

    def to_dict(self) -> Dict:
        return {
            "family": self.background.family,
            "mu": self.mu,
            "c1": self.c1,
            "c2": self.c2,
            "provenance": self.provenance,
            "domain": list(self.domain),
            "variable": self.variable,
            "polynomial": self.polynomial,
            "profile": str(self.expr),
            "flags": list(self.flags),
        }


def line_chart(variable: str, domain: Tuple[float, float]) -> Chart:
    return Chart(f"{variable}-line", (variable,), (domain,), (False,))


def _make_solution(spec: BackgroundSpec, mu: float, c1: float, c2: float, expr, provenance: str,
                   domain: Tuple[float, float], variable: str, polynomial: bool = False) -> KappaSolution:
    chart = line_chart(variable, domain)
    return KappaSolution(spec, float(mu), float(c1), float(c2), ScalarField(chart, expr),
                         provenance, (float(domain[0]), float(domain[1])), variable, polynomial)


def _mu_from_k(spec: BackgroundSpec, k: int) -> float:
    manifold = {"canonical_CP2": "CP2", "canonical_S2xS2": "S2xS2", "CP3_type": "CP2",
                "hyperkahler_base": "T4", "T4_nilmanifold": "T4", "conti_salamon": "T4",
                "flat_C3": "T4"}.get(spec.family)
    if manifold is None:
        raise ParameterLockError(f"{spec.family} has no discrete spectrum; pass mu")
    return spectrum(manifold, k).mu


def _is_integer_value(x: float) -> bool:
    return abs(x - round(x)) < 1e-12


# canonical bundles ---------------------------------------------------------

def _canonical_mu12_second(r, C) -> sp.Expr:
    """Second solution at μ = 12, found by reduction of order from (r⁶ − C)/r⁴."""
    m = C ** sp.Rational(1, 3)
    v = r ** 2
    D = r ** 6 - C
    return D / r ** 4 * (2 * sp.sqrt(3) * sp.atan((2 * v / m + 1) / sp.sqrt(3))
                         + 3 * sp.log(v - m) - sp.log(D)) + 6 * m


def _canonical_branch(label: str, s: float, r, C) -> Tuple[sp.Expr, bool]:
    """One hypergeometric branch; polynomial branches are homogeneous in (r⁶, C)."""
    D = r ** 6 - C
    if label == "c1":
        params, prefactor = Hyp2F1Params((8 + s) / 6, (8 - s) / 6, 5.0 / 3.0), D
    else:
        params, prefactor = Hyp2F1Params((4 + s) / 6, (4 - s) / 6, 1.0 / 3.0), D / r ** 4
    z = r ** 6 / C
    if params.polynomial_degree is not None:
        poly = sp.expand(C ** params.polynomial_degree * hyp2f1_expr(params, z))
        return prefactor * poly, True
    return prefactor * hyp2f1_expr(params, z), False


def _solve_canonical(spec: BackgroundSpec, mu: float, c1: float, c2: float,
                     require_global: bool) -> KappaSolution:
    r = coordinate_symbol("r")
    C = sp.nsimplify(spec.cone_param)
    r_lo = spec.cone_param ** (1.0 / 6.0) if spec.cone_param > 0 else 0.0
    global_domain = (r_lo, math.inf)

    if mu == 0:
        return _make_solution(spec, mu, c1, c2, c1 / r ** 4 + c2, "closed_form", global_domain, "r", True)
    if mu < -4:
        raise SpecialFunctionDomainError(f"μ = {mu} < −4 has no real exponent s = √(4 + μ)")
    s = math.sqrt(4 + mu)
    if spec.cone_param == 0:
        expr = c1 * r ** (-2 + sp.nsimplify(s)) + c2 * r ** (-2 - sp.nsimplify(s))
        return _make_solution(spec, mu, c1, c2, expr, "power_law", global_domain, "r",
                              polynomial=_is_integer_value(s))
    if mu == 12 and spec.cone_param > 0:
        expr = c1 * (r ** 6 - C) / r ** 4 + c2 * _canonical_mu12_second(r, C)
        return _make_solution(spec, mu, c1, c2, expr, "closed_form", global_domain, "r", c2 == 0)

    terms, polynomial = [], True
    for label, coeff in (("c1", c1), ("c2", c2)):
        if coeff == 0:
            continue
        branch, is_poly = _canonical_branch(label, s, r, C)
        terms.append(coeff * branch)
        polynomial = polynomial and is_poly
    expr = sum(terms, sp.Integer(0))
    if polynomial:
        return _make_solution(spec, mu, c1, c2, expr, "hypergeometric_series", global_domain, "r", True)
    if require_global:
        raise NoGlobalSolutionError(
            f"μ = {mu}: the requested branch does not terminate, so κ is only defined for r < C^(1/6)")
    logger.warning(f"μ = {mu}: non-terminating branch restricted to the series disk r < C^(1/6)")
    return _make_solution(spec, mu, c1, c2, expr, "hypergeometric_series", (0.0, r_lo), "r", False)


# moment-map families -------------------------------------------------------

def _hyp_power_branch(sign: int, s: float, H, factor) -> Tuple[sp.Expr, bool]:
    """H^{−1∓s/2}·factor·₂F₁(∓s/2, 2∓s/2; 1∓s; H)."""
    half = sp.nsimplify(s / 2)
    params = Hyp2F1Params(sign * s / 2, 2 + sign * s / 2, 1 + sign * s)
    return H ** (-1 + sign * half) * factor * hyp2f1_expr(params, H), params.polynomial_degree is not None


def _solve_calabi(spec: BackgroundSpec, mu: float, c1: float, c2: float,
                  require_global: bool) -> KappaSolution:
    H = H_SYMBOL
    family = spec.family
    domain = spec.H_range

    if family == "CP3_type":
        s = math.sqrt(4 + mu)
        terms = []
        for sign, coeff in ((-1, c1), (1, c2)):
            if coeff:
                terms.append(coeff * _hyp_power_branch(sign, s, H, 1 - H)[0])
        global_ok = mu == 0 and c1 == 0
        if require_global and not global_ok:
            raise NoGlobalSolutionError("CP3_type profiles are singular at H = 0 or H = 1")
        return _make_solution(spec, mu, c1, c2, sum(terms, sp.Integer(0)), "hypergeometric_series",
                              (max(domain[0], 0.0), min(domain[1], 1.0)), "H", global_ok)

    if family == "negative_KE_dual":
        if mu > 4:
            raise SpecialFunctionDomainError("negative_KE_dual profiles need μ ≤ 4")
        s = math.sqrt(4 - mu)
        terms = []
        for sign, coeff in ((-1, c1), (1, c2)):
            if not coeff:
                continue
            branch, is_poly = _hyp_power_branch(sign, s, H, H - 1)
            if not is_poly:
                raise NoGlobalSolutionError(
                    f"μ = {mu}: the branch does not terminate and its series diverges for H > 1")
            terms.append(coeff * branch)
        return _make_solution(spec, mu, c1, c2, sum(terms, sp.Integer(0)), "hypergeometric_series",
                              (max(domain[0], 1.0), domain[1]), "H", True)

    if family in ("hyperkahler_base", "conti_salamon") or (
            family == "T4_nilmanifold" and spec.b == spec.p == spec.q == 0 and spec.a == 1):
        if mu == 0:
            return _make_solution(spec, mu, c1, c2, c1 + c2 / H ** 2, "closed_form", domain, "H", True)
        if family == "hyperkahler_base":
            order = 2.0
            x = 4 * sp.sqrt(sp.nsimplify(abs(mu) / (spec.a * spec.lam))) / sp.sqrt(H)
        else:
            order = 2.0 / 3.0
            x = 2 * sp.sqrt(sp.nsimplify(abs(mu))) * H ** sp.Rational(3, 2) / 3
        kinds = ("I", "K") if mu > 0 else ("J", "Y")
        expr = (c1 * bessel_expr(kinds[0], order, x) + c2 * bessel_expr(kinds[1], order, x)) / H
        return _make_solution(spec, mu, c1, c2, expr, "bessel", domain, "H", False)

    if family == "flat_C3":
        rate = sp.sqrt(sp.nsimplify(abs(mu) * spec.b))
        if mu > 0:
            expr = c1 * sp.exp(rate * H) + c2 * sp.exp(-rate * H)
        elif mu < 0:
            expr = c1 * sp.cos(rate * H) + c2 * sp.sin(rate * H)
        else:
            expr = c1 + c2 * H
        return _make_solution(spec, mu, c1, c2, expr, "closed_form", domain, "H", mu <= 0)

    raise ParameterLockError(f"No profile catalog for {family} with these parameters")


def solve_kappa(spec: BackgroundSpec, k: Optional[int] = None, mu: Optional[float] = None,
                c1: float = 1.0, c2: float = 0.0, require_global: bool = False) -> KappaSolution:
    """
    Solve the κ-ODE of a background for one eigenvalue.

    Args:
        spec: Background
        k: Spectral index on the base (alternative to mu)
        mu: Laplacian eigenvalue
        c1, c2: Coefficients of the two independent solutions
        require_global: Refuse solutions that are not defined on the whole chart

    Returns:
        KappaSolution with analytic derivatives

    Raises:
        NoGlobalSolutionError: require_global and only a local branch exists
    """
    check_locks(spec)
    if (k is None) == (mu is None):
        raise ParameterLockError("Pass exactly one of k and mu")
    if mu is None:
        mu = _mu_from_k(spec, k)
    mu = float(mu)
    if spec.is_canonical:
        solution = _solve_canonical(spec, mu, c1, c2, require_global)
    else:
        solution = _solve_calabi(spec, mu, c1, c2, require_global)
    logger.info(f"κ for {spec.family}, μ = {mu}: {solution.provenance}")
    return solution


def candidate_profile(spec: BackgroundSpec, expr, mu: float,
                      domain: Optional[Tuple[float, float]] = None) -> KappaSolution:
    """Wrap a closed-form candidate so it can be graded by kappa_ode_residual."""
    variable = "r" if spec.is_canonical else "H"
    if isinstance(expr, str):
        symbol = coordinate_symbol(variable)
        expr = sp.sympify(expr, locals={variable: symbol, "C": sp.nsimplify(spec.cone_param)})
    if domain is None:
        if spec.is_canonical:
            domain = (spec.cone_param ** (1.0 / 6.0) if spec.cone_param > 0 else 0.0, math.inf)
        else:
            domain = spec.H_range
    return _make_solution(spec, mu, 0.0, 0.0, expr, "candidate", domain, variable)


def _ode_lhs(sol: KappaSolution) -> sp.Expr:
    """The operator whose value should equal μ."""
    x = sol.symbol
    kappa = sol.expr
    k1, k2 = sp.diff(kappa, x), sp.diff(kappa, x, 2)
    spec = sol.background
    if spec.is_canonical:
        C = sp.nsimplify(spec.cone_param)
        return (x ** 6 - C) * (5 * k1 + x * k2) / (x ** 5 * kappa)
    a, b = sp.nsimplify(spec.a), sp.nsimplify(spec.b)
    u = u_profile(spec)
    return ((a * x + b) * k2 + 3 * a * k1) / (u ** 2 * kappa)


def kappa_ode_residual(sol: KappaSolution, grid: Optional[np.ndarray] = None) -> ResidualReport:
    """
    sup |LHS − μ| of the κ-ODE on a grid of the radial variable.

    Grid points where κ vanishes are skipped and flagged.
    """
    if grid is None:
        grid = line_grid(*sol.domain, n=100)
    grid = np.asarray(grid, dtype=float)
    x = sol.symbol
    lhs = sp.lambdify(x, _ode_lhs(sol), modules="numpy")
    kappa = sp.lambdify(x, sol.expr, modules="numpy")
    residuals, flags = [], []
    for value in grid:
        if abs(float(kappa(value))) < KAPPA_ZERO_TOL:
            if "kappa_zero" not in flags:
                flags.append("kappa_zero")
            continue
        residuals.append(abs(float(lhs(value)) - sol.mu))
    return ResidualReport.from_samples("kappa_ode", residuals, flags, family=sol.background.family,
                                       mu=sol.mu, provenance=sol.provenance)


def singularity_probe(sol: KappaSolution, n: int = 8, growth: float = 1e3) -> ResidualReport:
    """Sample |κ| on a geometric sequence toward the lower end of the domain and flag blow-up."""
    lo, hi = sol.domain
    start = lo + (min(hi, lo + 1.0) - lo) * 0.5
    points = [lo + (start - lo) * 10.0 ** (-j) for j in range(n)]
    kappa = sp.lambdify(sol.symbol, sol.expr, modules="numpy")
    values = [abs(float(kappa(p))) for p in points]
    flags = ["blow_up"] if values[-1] > growth * max(values[0], 1e-300) else []
    return ResidualReport.from_samples("singularity_probe", values, flags,
                                       points=points, family=sol.background.family)


def polynomial_solution(spec: BackgroundSpec, k: int) -> KappaSolution:
    """The terminating branch for index k on a canonical bundle, normalized homogeneously."""
    mu = _mu_from_k(spec, k)
    label = polynomial_branch(int(round(mu)))
    if label is None:
        raise NoGlobalSolutionError(f"k = {k} (μ = {mu}) has no terminating branch")
    if label == "constant":
        return solve_kappa(spec, mu=mu, c1=0.0, c2=1.0)
    # the μ = 12 closed form carries (r⁶ − C)/r⁴ on c1
    first = label == "c1" or (mu == 12 and spec.cone_param > 0)
    c1, c2 = (1.0, 0.0) if first else (0.0, 1.0)
    return solve_kappa(spec, mu=mu, c1=c1, c2=c2, require_global=True)


# ---------------------------------------------------------------------------
# Connections
# ---------------------------------------------------------------------------

ANCHOR_TOLERANCE = 1e-4
_integral_counter = [0]


@dataclass
class AbelianConnectionSpec:
    """A = κFθ̂ − I(r)d^cF, plus the background connection A₀ when μ = 0."""

    kappa: KappaSolution
    F: ScalarField
    integration_constant: float
    connection: KForm
    background_connection: KForm
    radial_integral: sp.Expr
    structure: SU3Structure
    horizontal: KForm

    @property
    def total(self) -> KForm:
        return self.connection + self.background_connection


def anchor_radius(spec: BackgroundSpec) -> float:
    """r_a = (2C)^{1/6}, or 1 on the cone."""
    return (2.0 * spec.cone_param) ** (1.0 / 6.0) if spec.cone_param > 0 else 1.0


def _quadrature_integral(integrand: sp.Expr, r: sp.Symbol, r_a: float, I0: float) -> sp.Expr:
    """I(r) = I0 + ∫_{r_a}^r integrand as a sympy function with dI/dr = integrand."""
    fn = sp.lambdify(r, integrand, modules="numpy")

    def scalar(x: float) -> float:
        value, error = integrate.quad(lambda s: float(fn(s)), r_a, float(x), epsabs=1e-13, epsrel=1e-11, limit=200)
        if error > 1e-8 * max(1.0, abs(value)):
            raise QuadratureError(f"Radial integral to r = {x} has error estimate {error:.2e}")
        return I0 + value

    impl = np.vectorize(scalar, otypes=[float])
    _integral_counter[0] += 1
    cls = type(f"radial_integral_{_integral_counter[0]}", (sp.Function,), {
        "_imp_": staticmethod(impl),
        "nargs": 1,
        "fdiff": lambda self, argindex=1: integrand.subs(r, self.args[0]),
    })
    return cls(r)


def _check_anchor(F_expr: sp.Expr, mu: float, spec: BackgroundSpec, n: int = 6, seed: int = 0) -> None:
    """The anchor equation (4κ + rκ')F = I·ΔF is solvable only when ΔF = μF."""
    g4 = spectral_metric(spec.base_chart)
    F4 = ScalarField(g4.chart, F_expr)
    for p in sample_points(g4.chart, n, seed=seed, margin=0.1):
        value = float(F4(p))
        defect = abs(laplace_beltrami(F4, g4, p) - mu * value) / max(1.0, abs(value))
        if defect > ANCHOR_TOLERANCE:
            raise InconsistentStructureError(
                f"Anchor equation inconsistent: ΔF ≠ {mu}·F (defect {defect:.2e}); wrong μ/F pairing")


def assemble_connection(kappa: KappaSolution, F, S: Optional[SU3Structure] = None) -> AbelianConnectionSpec:
    """
    Assemble κFθ̂ − I(r)d^cF on a canonical bundle.

    I(r) = I₀ + ∫_{r_a}^r r⁵κ/(r⁶ − C) dr, in closed form when the integrand
    is a polynomial and by adaptive quadrature otherwise. The constant I₀
    solves the ω-component equation 4κ + rκ' − μI = 0 at r_a.

    Args:
        kappa: Profile on a canonical family
        F: Eigenfunction (ScalarField or expression in the base coordinates)
        S: Structure to build on; built from the profile's background when omitted

    Raises:
        InconsistentStructureError: F is not an eigenfunction for κ's μ
        QuadratureError: the radial integral did not converge
    """
    spec = kappa.background
    if not spec.is_canonical:
        raise ParameterLockError("Connections are assembled on the canonical bundles")
    S = S or build_structure(spec)
    r = S.chart.symbol("r")
    F_expr = F.expr if isinstance(F, ScalarField) else sp.sympify(F)
    C = sp.nsimplify(spec.cone_param)
    D = r ** 6 - C
    vertical = S.fibre_form * (kappa.expr * F_expr)
    zero = KForm(S.chart, 1)

    if kappa.mu == 0:
        if F_expr.free_symbols:
            raise InconsistentStructureError("μ = 0 needs a constant F")
        A0 = S.base.beta1 * (-2 * sp.nsimplify(kappa.c2) * F_expr) if kappa.c2 else zero
        return AbelianConnectionSpec(kappa, ScalarField(S.chart, F_expr), 0.0, vertical, A0,
                                     sp.Integer(0), S, A0)

    _check_anchor(F_expr, kappa.mu, spec)
    r_a = anchor_radius(spec)
    anchor_expr = (4 * kappa.expr + r * sp.diff(kappa.expr, r)) / sp.nsimplify(kappa.mu)
    I0 = float(sp.lambdify(r, anchor_expr, modules="numpy")(r_a))
    integrand = sp.cancel(r ** 5 * kappa.expr / D)
    if integrand.is_polynomial(r):
        antiderivative = sp.integrate(sp.expand(integrand), r)
        radial = antiderivative - antiderivative.subs(r, r_a) + I0
    else:
        radial = _quadrature_integral(integrand, r, r_a, I0)
    horizontal = S.frame.dc(F_expr) * (-radial)
    logger.info(f"Assembled μ = {kappa.mu} connection with I(r_a) = {I0:.6g}")
    return AbelianConnectionSpec(kappa, ScalarField(S.chart, F_expr), I0, vertical + horizontal,
                                 zero, radial, S, horizontal)


def verify_hym(conn, S: SU3Structure, C0: float, grid: np.ndarray) -> List[ResidualReport]:
    """
    HYM residuals of an abelian connection: F∧Ω⁺ (or J-invariance of F) and
    F∧ω² + 2C₀·vol.

    Args:
        conn: Connection 1-form, or an AbelianConnectionSpec (its total is used)
        S: Background structure
        C0: Constant with F∧ω² = −2C₀·vol
        grid: Points on S.chart
    """
    if isinstance(conn, AbelianConnectionSpec):
        conn = conn.total
    grid = S.chart.validate(np.atleast_2d(grid))
    F = matrix_curvature(MatrixForm([[conn]]))[0, 0]
    curvature = form_values(F, grid)
    omegas = form_values(S.omega, grid)

    trace = []
    for Fp, om in zip(curvature, omegas):
        om2 = om.wedge(om)
        vol = om2.wedge(om).top() / 6.0
        trace.append(abs(Fp.wedge(om2).top() + 2.0 * C0 * vol))

    if S.Omega is not None:
        type_check = [Fp.wedge(Op).max_abs() for Fp, Op in zip(curvature, form_values(S.om_plus, grid))]
        name = "F_wedge_Omega_plus"
    else:
        type_check = []
        for Fp, p in zip(curvature, grid):
            J = S.J(p)
            M = _two_form_matrix(Fp)
            type_check.append(float(np.max(np.abs(J.T @ M @ J - M))))
        name = "F_J_invariance"
    return [
        ResidualReport.from_samples(name, type_check, family=S.spec.family),
        ResidualReport.from_samples("F_wedge_omega2", trace, family=S.spec.family, C0=C0),
    ]


def _two_form_matrix(value: FormValue) -> np.ndarray:
    M = np.zeros((value.dim, value.dim), dtype=value.values.dtype)
    for (i, j), v in value.items():
        M[i, j], M[j, i] = v, -v
    return M


def verify_reduced_equations(conn: AbelianConnectionSpec, grid: np.ndarray) -> List[ResidualReport]:
    """
    Residuals of the reduced instanton equations on a canonical bundle:

        ∂A/∂r + (r⁵κ/(r⁶ − C))·d^cF = 0,   2(F_A)_ω̂ + 4f + r∂f/∂r = 0,

    with f = κF, A the horizontal part of the connection and F_A its base curvature.
    """
    S = conn.structure
    grid = S.chart.validate(np.atleast_2d(grid))
    r = S.chart.symbol("r")
    C = sp.nsimplify(S.spec.cone_param)
    f = conn.kappa.expr * conn.F.expr

    evolution = conn.horizontal.map_components(lambda v: sp.diff(v, r)) \
        + S.frame.dc(conn.F.expr) * (r ** 5 * conn.kappa.expr / (r ** 6 - C))

    r_index, y_index = S.chart.index("r"), S.chart.index("y")
    base_curvature = exterior_derivative(conn.horizontal)
    base_curvature = KForm(S.chart, 2, {I: v for I, v in base_curvature.components.items()
                                        if r_index not in I and y_index not in I})
    omega_hat = S.base.omega1
    top = tuple(i for i in range(S.chart.dim) if i not in (r_index, y_index))
    numerator = base_curvature.wedge(omega_hat).components.get(top, sp.Integer(0))
    denominator = omega_hat.wedge(omega_hat).components[top]
    trace = 2 * numerator / denominator + 4 * f + r * sp.diff(f, r)
    trace_fn = sp.lambdify(S.chart.symbols, trace, modules="numpy")
    trace_values = np.broadcast_to(np.abs(np.asarray(trace_fn(*grid.T), dtype=float)), (len(grid),))

    evolution_values = evolution.values(grid) if evolution.components else np.zeros((len(grid), 0))
    return [
        ResidualReport.from_samples("reduced_evolution", row_sup(evolution_values), mu=conn.kappa.mu),
        ResidualReport.from_samples("reduced_trace", trace_values, mu=conn.kappa.mu),
    ]


def curvature_closed_form(conn: AbelianConnectionSpec, grid: np.ndarray) -> ResidualReport:
    """
    Compare dA with the closed-form curvature

        d(κF)∧θ̂ + 2κF·ω̂ − (r⁵κ/(r⁶ − C))·dr∧d^cF − I·dd^cF + dA₀.
    """
    S = conn.structure
    grid = S.chart.validate(np.atleast_2d(grid))
    r = S.chart.symbol("r")
    C = sp.nsimplify(S.spec.cone_param)
    kappa, F = conn.kappa.expr, conn.F.expr
    f_form = KForm.function(S.chart, kappa * F)
    expected = exterior_derivative(f_form).wedge(S.fibre_form) + S.base.omega1 * (2 * kappa * F)
    if conn.kappa.mu != 0:
        dcF = S.frame.dc(F)
        expected = expected - dx(S.chart, "r").wedge(dcF) * (r ** 5 * kappa / (r ** 6 - C)) \
            - exterior_derivative(dcF) * conn.radial_integral
    expected = expected + exterior_derivative(conn.background_connection) \
        if conn.background_connection.components else expected
    difference = exterior_derivative(conn.total) - expected
    values = difference.values(grid) if difference.components else np.zeros((len(grid), 0))
    return ResidualReport.from_samples("curvature_closed_form", row_sup(values), mu=conn.kappa.mu)


# ---------------------------------------------------------------------------
# Energy
# ---------------------------------------------------------------------------

QUAD_RTOL = 1e-6
PERIODIC_NODES = 8
MAX_PERIODIC_NODES = 64
TAIL_CONVERGENCE = 6.5


def base_dependence(S: SU3Structure, exprs) -> List[int]:
    """Chart indices of the base coordinates that occur in any of the expressions."""
    symbols = set()
    for expr in exprs:
        symbols |= sp.sympify(expr).free_symbols
    return [i for i in range(2, S.chart.dim) if S.chart.symbols[i] in symbols]


def _tensor_integrand(u, ranges, open_axes, half_lines, anchor, nodes, cyclic, coarse, weights, fn):
    """Trapezoid sums over the periodic nodes at each Gauss–Kronrod point, fine and coarse."""
    u = np.atleast_2d(u)
    m = len(u)
    x, jac = np.array(u, dtype=float), np.ones(m)
    for j, unbounded in enumerate(half_lines):
        if unbounded:
            x[:, j] = ranges[open_axes[j]][0] + u[:, j] / (1.0 - u[:, j])
            jac = jac / (1.0 - u[:, j]) ** 2
    points = np.tile(anchor, (m * len(nodes), 1))
    if open_axes:
        points[:, open_axes] = np.repeat(x, len(nodes), axis=0)
    if cyclic:
        points[:, cyclic] = np.tile(nodes, (m, 1))
    values = np.asarray(fn(points), dtype=float).reshape(m, len(nodes))
    w_fine, w_coarse = weights
    return np.column_stack([w_fine * values.sum(axis=1) * jac,
                            w_coarse * values[:, coarse].sum(axis=1) * jac])


def base_integral(S: SU3Structure, fn: Callable[[np.ndarray], np.ndarray], depends: Sequence[int],
                  rtol: float = QUAD_RTOL, nodes: int = PERIODIC_NODES) -> Tuple[float, int]:
    """
    Integrate ``fn`` over the base coordinates of the chart.

    ``fn`` maps an (n, dim − 2) array of base points to n values. Coordinates
    outside ``depends`` contribute the length of their range. Periodic
    coordinates use the trapezoid rule, doubled until two successive node
    counts agree to rtol; the rest go through adaptive Gauss–Kronrod cubature,
    with x = lo + u/(1 − u) on half lines.

    Returns:
        (value, coarse node count that passed), so repeated calls can start there

    Raises:
        QuadratureError: the cubature or the trapezoid doubling misses rtol
    """
    names, ranges, periodic = S.chart.coord_names[2:], S.chart.ranges[2:], S.chart.periodic[2:]
    slots = {i - 2 for i in depends}
    length, cyclic, open_axes = 1.0, [], []
    for k, (lo, hi) in enumerate(ranges):
        if k not in slots:
            if not math.isfinite(hi - lo):
                raise QuadratureError(f"Integrand is constant along the unbounded coordinate {names[k]}")
            length *= hi - lo
        elif periodic[k]:
            cyclic.append(k)
        elif math.isinf(lo):
            raise QuadratureError(f"No quadrature rule for {names[k]} in ({lo}, {hi})")
        else:
            open_axes.append(k)
    anchor = np.array([0.5 * (lo + hi) if math.isfinite(hi) else lo + 1.0 for lo, hi in ranges])
    half_lines = [math.isinf(ranges[k][1]) for k in open_axes]
    lower = np.array([ranges[k][0] if not unbounded else 0.0 for k, unbounded in zip(open_axes, half_lines)])
    upper = np.array([ranges[k][1] if not unbounded else 1.0 for k, unbounded in zip(open_axes, half_lines)])
    starts = np.array([ranges[k][0] for k in cyclic])
    spans = np.array([ranges[k][1] - ranges[k][0] for k in cyclic])

    n = nodes
    while True:
        if cyclic:
            index = np.stack(np.meshgrid(*[np.arange(2 * n)] * len(cyclic), indexing="ij"), axis=-1)
            index = index.reshape(-1, len(cyclic))
        else:
            index = np.zeros((1, 0), dtype=int)
        grid = starts + spans * index / (2 * n)
        coarse = np.all(index % 2 == 0, axis=1)
        weights = (float(np.prod(spans / (2 * n))), float(np.prod(spans / n)))
        args = (ranges, open_axes, half_lines, anchor, grid, cyclic, coarse, weights, fn)
        if open_axes:
            result = integrate.cubature(_tensor_integrand, lower, upper, rule="gk15", rtol=rtol, args=args)
            if result.status != "converged":
                raise QuadratureError(f"Base cubature stopped at error {np.max(result.error):.2e}")
            fine, rough = (float(v) for v in result.estimate)
        else:
            fine, rough = (float(v) for v in _tensor_integrand(np.zeros((1, 0)), *args)[0])
        if abs(fine - rough) <= rtol * abs(fine):
            return length * fine, n
        n *= 2
        if n > MAX_PERIODIC_NODES:
            raise QuadratureError(f"Trapezoid sums still differ by {abs(fine - rough):.2e} "
                                  f"at {n} nodes per periodic coordinate")


def base_volume(S: SU3Structure) -> float:
    """Volume of the (scaled) base: √det g of the base block through ``base_integral``."""
    g = S.base.metric()

    def density(base_points: np.ndarray) -> np.ndarray:
        n = len(base_points)
        block = g.values(np.column_stack([np.ones(n), np.zeros(n), base_points]))[:, 2:, 2:]
        return np.sqrt(np.abs(np.linalg.det(block)))

    value, _ = base_integral(S, density, base_dependence(S, list(g.matrix[2:, 2:])))
    return value


def curvature_norm_squared(F: KForm, g: MetricField, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """‖F‖² = ½ g^{ik} g^{jl} F_ij F_kl at each point, with √det g alongside."""
    n, dim = len(points), g.chart.dim
    metric = g.values(points)
    ginv = np.linalg.inv(metric)
    sqrt_det = np.sqrt(np.abs(np.linalg.det(metric)))
    M = np.zeros((n, dim, dim))
    if F.components:
        for column, (i, j) in zip(F.values(points).T, basis(dim, 2)):
            M[:, i, j] = np.real(column)
            M[:, j, i] = -np.real(column)
    norm2 = 0.5 * np.einsum("nkl,nkl->n", ginv @ M @ ginv, M)
    return norm2, sqrt_det


def yang_mills_energy(conn, S: SU3Structure, r_max: float, rtol: float = QUAD_RTOL) -> EnergyResult:
    """
    E = ∫‖F‖² dvol from r = C^{1/6} to r_max, with a power-law tail estimate.

    The integral factors into the fibre circle (exact, since everything is
    S¹-invariant), the base (``base_integral`` at y = 0) and the radius
    (adaptive Gauss–Kronrod). The tail exponent n comes from
    ρ(R)/ρ(R/2) ~ 2^{5−n} for the radial density ρ. ``vol_base`` is the
    base volume from the same base rule.

    Raises:
        QuadratureError: cone (C = 0) or a factor that misses its tolerance
    """
    if not S.spec.is_canonical:
        raise ParameterLockError("Energies are computed on the canonical bundles")
    if S.spec.cone_param <= 0:
        raise QuadratureError("Energy on the cone (C = 0) diverges at the apex")
    if isinstance(conn, AbelianConnectionSpec):
        conn = conn.total
    F = exterior_derivative(conn)
    depends = base_dependence(S, list(F.components.values()) + list(S.metric.matrix))
    periodic_nodes = [PERIODIC_NODES]

    def density(r: float) -> float:
        def angular(base_points: np.ndarray) -> np.ndarray:
            n = len(base_points)
            points = np.column_stack([np.full(n, r), np.zeros(n), base_points])
            norm2, sqrt_det = curvature_norm_squared(F, S.metric, points)
            return norm2 * sqrt_det
        value, periodic_nodes[0] = base_integral(S, angular, depends, rtol, periodic_nodes[0])
        return S.fibre_period * value

    r_lo = S.spec.cone_param ** (1.0 / 6.0)
    value, error = integrate.quad(density, r_lo, r_max, limit=200, epsrel=0.01 * rtol)
    if not math.isfinite(value) or error > rtol * max(1.0, abs(value)):
        raise QuadratureError(f"Radial energy integral error estimate {error:.2e}")

    rho_far, rho_mid = density(r_max), density(0.5 * r_max)
    if rho_far > 0 and rho_mid > 0:
        n_tail = 5.0 - math.log(rho_far / rho_mid) / math.log(2.0)
    else:
        n_tail = math.inf
    divergent = n_tail <= TAIL_CONVERGENCE
    if math.isinf(n_tail):
        extrapolated = value
    elif divergent:
        extrapolated = math.inf
    else:
        extrapolated = value + rho_far * r_max / (n_tail - 6.0)
    vol_base = base_volume(S)
    logger.info(f"Energy up to r = {r_max}: {value:.6g} (tail exponent {n_tail:.3g}, base volume {vol_base:.6g})")
    return EnergyResult(value, extrapolated, n_tail, divergent, vol_base)


# ---------------------------------------------------------------------------
# Killing fields
# ---------------------------------------------------------------------------

def killing_fields(S: SU3Structure) -> Dict[str, VectorField]:
    """∂_y, the dual of σ₁ and the right-invariant fields of the CP² bundle."""
    if S.spec.family != "canonical_CP2":
        raise ParameterLockError("The Killing catalog is for canonical_CP2")
    chart = S.chart
    x2, x3 = chart.symbol("x2"), chart.symbol("x3")
    e1, _, _ = su2_dual(chart)
    right_1 = VectorField(chart, [0, 0, 0, sp.sin(x3) / sp.sin(x2), sp.cos(x3), -sp.cot(x2) * sp.sin(x3)])
    right_2 = VectorField(chart, [0, 0, 0, sp.cos(x3) / sp.sin(x2), -sp.sin(x3), -sp.cot(x2) * sp.cos(x3)])
    return {
        "d_y": VectorField.coordinate(chart, "y"),
        "dual_sigma1": e1,
        "d_x3": VectorField.coordinate(chart, "x3"),
        "right_sin": right_1,
        "right_cos": right_2,
    }


def metric_dual(X: VectorField, g: MetricField) -> KForm:
    """X♭ = g(X, ·)."""
    lowered = g.matrix * sp.Matrix(X.components)
    return KForm(X.chart, 1, {(i,): sp.simplify(v) for i, v in enumerate(lowered)})


def killing_dual_check(X: VectorField, S: SU3Structure, grid: np.ndarray) -> Tuple[float, ResidualReport, ResidualReport]:
    """
    Curvature of the metric dual of a Killing field.

    Returns:
        (c, spread, hym): c is the mean of (F∧ω²)/ω³, spread its pointwise
        deviation from c and hym the F∧Ω⁺ residual
    """
    grid = S.chart.validate(np.atleast_2d(grid))
    F = exterior_derivative(metric_dual(X, S.metric))
    ratios, hym = [], []
    for Fp, om, Op in zip(form_values(F, grid), form_values(S.omega, grid), form_values(S.om_plus, grid)):
        om2 = om.wedge(om)
        ratios.append(float(np.real(Fp.wedge(om2).top() / om2.wedge(om).top())))
        hym.append(Fp.wedge(Op).max_abs())
    c = float(np.mean(ratios))
    return (c,
            ResidualReport.from_samples("killing_c_spread", [abs(v - c) for v in ratios], c=c),
            ResidualReport.from_samples("killing_F_wedge_Omega_plus", hym, c=c))


# ---------------------------------------------------------------------------
# Levi-Civita connection
# ---------------------------------------------------------------------------

def _skew_hermitian(upper: Dict[Tuple[int, int], ComplexForm], n: int, chart) -> MatrixForm:
    """Fill a skew-Hermitian matrix of 1-forms from its diagonal and upper entries."""
    zero = ComplexForm(KForm(chart, 1))
    rows = [[zero] * n for _ in range(n)]
    for (i, j), entry in upper.items():
        rows[i][j] = entry
        if i != j:
            rows[j][i] = -entry.conjugate()
    return MatrixForm(rows)


def levi_civita_connection(S: SU3Structure) -> MatrixForm:
    """su(3)-valued Levi-Civita connection of the canonical CP² bundle in a unitary frame."""
    chart = S.chart
    r, t = chart.symbol("r"), chart.symbol("t")
    C = sp.nsimplify(S.spec.cone_param)
    D = r ** 6 - C
    s1, s2, s3 = su2_forms(chart)
    dt = dx(chart, "t")
    Theta = -S.fibre_form
    a = sp.sqrt(t * D) / r ** 3
    b = sp.sqrt(t * (1 - t) * D) / r ** 3
    e = sp.sqrt(1 - t)
    psi = [2, -1, -1]
    upper = {
        (0, 0): ComplexForm(KForm(chart, 1), s1 * (-t)),
        (0, 1): ComplexForm(s2 * (-a), s3 * a),
        (0, 2): ComplexForm(s1 * (-b), dt * (sp.sqrt(D) / (2 * r ** 3 * sp.sqrt(t * (1 - t))))),
        (1, 1): ComplexForm(KForm(chart, 1), s1),
        (1, 2): ComplexForm(s3 * e, s2 * (-e)),
        (2, 2): ComplexForm(KForm(chart, 1), s1 * (t - 1)),
    }
    for i, weight in enumerate(psi):
        upper[(i, i)] = upper[(i, i)] + ComplexForm(KForm(chart, 1), Theta * (-C * weight / r ** 6))
    return _skew_hermitian(upper, 3, chart)


def cp2_levi_civita_control(C: float, grid: np.ndarray) -> ResidualReport:
    """F∧ω² for the u(2) Levi-Civita connection of CP² pulled back; it is not HYM."""
    S = build_structure(replace(preset("canonical_CP2"), cone_param=C))
    chart = S.chart
    t = chart.symbol("t")
    s1, s2, s3 = su2_forms(chart)
    e = sp.sqrt(1 - t)
    upper = {
        (0, 0): ComplexForm(KForm(chart, 1), s1 * (2 * t - 1)),
        (0, 1): ComplexForm(s3 * (-e), s2 * (-e)),
        (1, 1): ComplexForm(KForm(chart, 1), s1 * (t + 1)),
    }
    return _matrix_trace_report("cp2_levi_civita_F_wedge_omega2", _skew_hermitian(upper, 2, chart), S, grid)


def _matrix_trace_report(name: str, A: MatrixForm, S: SU3Structure, grid: np.ndarray) -> ResidualReport:
    grid = S.chart.validate(np.atleast_2d(grid))
    F = matrix_curvature(A)
    om2 = [om.wedge(om) for om in form_values(S.omega, grid)]
    samples = np.zeros(len(grid))
    for i in range(F.n):
        for j in range(F.n):
            for n, (Fp, w) in enumerate(zip(form_values(F[i, j], grid), om2)):
                samples[n] = max(samples[n], abs(Fp.wedge(w).top()))
    return ResidualReport.from_samples(name, samples, C=S.spec.cone_param)


def verify_levi_civita(C: float, grid: np.ndarray) -> List[ResidualReport]:
    """
    HYM residuals of the Levi-Civita connection of the canonical CP² bundle.

    Args:
        C: Cone parameter (C = 0 gives the flat cone, F ≡ 0)
        grid: Points on the canonical chart

    Returns:
        Reports for F∧Ω⁺ and F∧ω², sup over matrix entries
    """
    S = build_structure(replace(preset("canonical_CP2"), cone_param=C))
    grid = S.chart.validate(np.atleast_2d(grid))
    A = levi_civita_connection(S)
    F = matrix_curvature(A)
    Om_plus = form_values(S.om_plus, grid)
    samples = np.zeros(len(grid))
    for i in range(3):
        for j in range(3):
            for n, (Fp, Op) in enumerate(zip(form_values(F[i, j], grid), Om_plus)):
                samples[n] = max(samples[n], Fp.wedge(Op).max_abs())
    logger.info(f"Levi-Civita check at C = {C} on {len(grid)} points")
    return [ResidualReport.from_samples("levi_civita_F_wedge_Omega_plus", samples, C=C),
            _matrix_trace_report("levi_civita_F_wedge_omega2", A, S, grid)]


# ---------------------------------------------------------------------------
# Elementary connections
# ---------------------------------------------------------------------------

def elementary_connections(S: SU3Structure) -> Dict[str, Tuple[KForm, sp.Expr]]:
    """Abelian connections on the canonical CP² bundle with their closed-form ‖F‖²."""
    if S.spec.family != "canonical_CP2":
        raise ParameterLockError("Elementary connections live on canonical_CP2")
    r, t = S.chart.symbol("r"), S.chart.symbol("t")
    s1, s2, _ = su2_forms(S.chart)
    return {
        "r^-4 theta": (S.fibre_form * r ** -4, 24 * r ** -12),
        "t^-1 sigma1": (s1 * (1 / t), 8 / (t ** 4 * r ** 4)),
        "(1-t^-1) sigma2": (s2 * (1 - 1 / t), 8 * (1 - t) / (t ** 4 * r ** 4)),
    }


def elementary_norm_residual(S: SU3Structure, grid: np.ndarray) -> List[ResidualReport]:
    """Relative mismatch between numeric ‖F‖² and the closed forms."""
    grid = S.chart.validate(np.atleast_2d(grid))
    reports = []
    for name, (A, closed) in elementary_connections(S).items():
        numeric, _ = curvature_norm_squared(exterior_derivative(A), S.metric, grid)
        exact = np.broadcast_to(sp.lambdify(S.chart.symbols, closed, modules="numpy")(*grid.T), (len(grid),))
        reports.append(ResidualReport.from_samples(f"elementary_norm {name}",
                                                   np.abs(numeric - exact) / np.maximum(1.0, np.abs(exact))))
    return reports
