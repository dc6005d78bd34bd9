"""
S¹-invariant Kähler–Einstein backgrounds and their SU(3)-structures.

Every family is assembled from a four-dimensional Kähler base (CP², S²×S²,
a flat torus or H²×H²) described by an orthogonal coframe, its dual frame,
the action of the complex structure on the coframe and potentials for the
base Kähler forms. The canonical bundles over CP² and S²×S² use a radial
coordinate r; the remaining families use the moment map H.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from forms import (
    Chart,
    ComplexForm,
    FormValue,
    Frame,
    KForm,
    MetricField,
    VectorField,
    dx,
    exterior_derivative,
    lie_derivative,
    one_form,
    pair,
    partial,
    wedge,
)
from models import (
    BackgroundSpec,
    ChartDomainError,
    DeformationData,
    ParameterLockError,
    PositivityWindowError,
    ResidualReport,
)
from specfun import airy_expr
from utils import DEFAULT_FD_STEP, sample_points

logger = logging.getLogger(__name__)

PI = math.pi
INF = math.inf

# name -> (coordinates, ranges, periodic)
BASE_CHARTS: Dict[str, Tuple[Tuple[str, ...], Tuple[Tuple[float, float], ...], Tuple[bool, ...]]] = {
    "CP2": (("t", "x1", "x2", "x3"), ((0, 1), (0, 4 * PI), (0, PI), (0, 2 * PI)), (False, True, False, True)),
    "S2xS2": (("r1", "th1", "r2", "th2"), ((0, INF), (0, 2 * PI), (0, INF), (0, 2 * PI)), (False, True, False, True)),
    "T4": (("x1", "x2", "x3", "x4"), ((0, 2 * PI),) * 4, (False,) * 4),
    "H2xH2": (("xa", "ya", "xb", "yb"), ((-INF, INF), (0, INF), (-INF, INF), (0, INF)), (False,) * 4),
}

# Einstein constant of each unscaled base metric
BASE_EINSTEIN = {"CP2": 6.0, "S2xS2": 4.0, "T4": 0.0, "H2xH2": -1.0}


def base_chart(name: str) -> Chart:
    if name not in BASE_CHARTS:
        raise ChartDomainError(f"Unknown base chart: {name}")
    coords, ranges, periodic = BASE_CHARTS[name]
    return Chart(name, coords, ranges, periodic)


@dataclass
class BaseData:
    """A Kähler 4-manifold written on (a chart containing) its coordinates.

    The metric is Σ weights[A]·coframe[A]²; ``j_images[A]`` is coframe[A]∘J.
    dβ₁ = ω₁ and dβ₀ = ω₀, where ω₀ is the anti-self-dual partner used by
    the torus families (zero elsewhere).
    """

    name: str
    chart: Chart
    coframe: List[KForm]
    dual: List[VectorField]
    j_images: List[KForm]
    weights: List[sp.Expr]
    omega1: KForm
    beta1: KForm
    omega0: KForm
    beta0: KForm
    einstein: float

    def scaled(self, s) -> "BaseData":
        """Metric, ω₁ and β₁ multiplied by s; the Einstein constant divides by s."""
        s = sp.nsimplify(s)
        return BaseData(
            name=self.name,
            chart=self.chart,
            coframe=self.coframe,
            dual=self.dual,
            j_images=self.j_images,
            weights=[s * w for w in self.weights],
            omega1=self.omega1 * s,
            beta1=self.beta1 * s,
            omega0=self.omega0,
            beta0=self.beta0,
            einstein=float(self.einstein / s),
        )

    def metric(self) -> MetricField:
        return MetricField.from_coframe(self.chart, self.coframe, self.weights)

    def frame(self) -> Frame:
        return Frame(self.chart, self.coframe, self.dual, self.j_images)


def _vector(chart: Chart, components: Dict[str, sp.Expr]) -> VectorField:
    comps = [0] * chart.dim
    for coord, value in components.items():
        comps[chart.index(coord)] = value
    return VectorField(chart, comps)


def su2_forms(chart: Chart) -> Tuple[KForm, KForm, KForm]:
    """Left-invariant forms with dσ₁ = −2σ₂∧σ₃ (and cyclic)."""
    x1, x2 = chart.symbol("x1"), chart.symbol("x2")
    half = sp.Rational(1, 2)
    s1 = one_form(chart, {"x2": half * sp.cos(x1), "x3": half * sp.sin(x1) * sp.sin(x2)})
    s2 = one_form(chart, {"x2": -half * sp.sin(x1), "x3": half * sp.cos(x1) * sp.sin(x2)})
    s3 = one_form(chart, {"x1": half, "x3": half * sp.cos(x2)})
    return s1, s2, s3


def su2_dual(chart: Chart) -> Tuple[VectorField, VectorField, VectorField]:
    x1, x2 = chart.symbol("x1"), chart.symbol("x2")
    e1 = _vector(chart, {"x1": -2 * sp.sin(x1) * sp.cot(x2), "x2": 2 * sp.cos(x1),
                         "x3": 2 * sp.sin(x1) / sp.sin(x2)})
    e2 = _vector(chart, {"x1": -2 * sp.cos(x1) * sp.cot(x2), "x2": -2 * sp.sin(x1),
                         "x3": 2 * sp.cos(x1) / sp.sin(x2)})
    e3 = _vector(chart, {"x1": 2})
    return e1, e2, e3


def cp2_base(chart: Optional[Chart] = None) -> BaseData:
    """Fubini–Study CP² in cohomogeneity-one coordinates, Ric = 6g."""
    chart = chart or base_chart("CP2")
    t = chart.symbol("t")
    s1, s2, s3 = su2_forms(chart)
    e1, e2, e3 = su2_dual(chart)
    dt = dx(chart, "t")
    f = 2 * t * (1 - t)
    omega1 = s1.wedge(dt) * sp.Rational(1, 2) + s2.wedge(s3) * t
    return BaseData(
        name="CP2",
        chart=chart,
        coframe=[dt, s1, s2, s3],
        dual=[VectorField.coordinate(chart, "t"), e1, e2, e3],
        j_images=[s1 * f, dt * (-1 / f), -s3, s2],
        weights=[1 / (4 * t * (1 - t)), t * (1 - t), t, t],
        omega1=omega1,
        beta1=s1 * (-t / 2),
        omega0=KForm(chart, 2),
        beta0=KForm(chart, 1),
        einstein=BASE_EINSTEIN["CP2"],
    )


def s2xs2_base(chart: Optional[Chart] = None) -> BaseData:
    """Product of two round spheres of radius ½ in stereographic coordinates."""
    chart = chart or base_chart("S2xS2")
    r1, r2 = chart.symbol("r1"), chart.symbol("r2")
    dr1, dth1, dr2, dth2 = (dx(chart, c) for c in ("r1", "th1", "r2", "th2"))
    c1, c2 = (1 + r1 ** 2) ** 2, (1 + r2 ** 2) ** 2
    # second factor carries the opposite orientation
    omega = dr1.wedge(dth1) * (r1 / c1) - dr2.wedge(dth2) * (r2 / c2)
    beta = dth1 * (-1 / (2 * (1 + r1 ** 2))) + dth2 * (1 / (2 * (1 + r2 ** 2)))
    return BaseData(
        name="S2xS2",
        chart=chart,
        coframe=[dr1, dth1, dr2, dth2],
        dual=[VectorField.coordinate(chart, c) for c in ("r1", "th1", "r2", "th2")],
        j_images=[dth1 * (-r1), dr1 * (1 / r1), dth2 * r2, dr2 * (-1 / r2)],
        weights=[1 / c1, r1 ** 2 / c1, 1 / c2, r2 ** 2 / c2],
        omega1=omega,
        beta1=beta,
        omega0=KForm(chart, 2),
        beta0=KForm(chart, 1),
        einstein=BASE_EINSTEIN["S2xS2"],
    )


def t4_base(chart: Optional[Chart] = None, A=1, B=1) -> BaseData:
    """Flat torus A(dx1² + dx2²) + B(dx3² + dx4²); ω₁ and β₁ are unweighted."""
    chart = chart or base_chart("T4")
    x1, x3 = chart.symbol("x1"), chart.symbol("x3")
    d1, d2, d3, d4 = (dx(chart, c) for c in ("x1", "x2", "x3", "x4"))
    return BaseData(
        name="T4",
        chart=chart,
        coframe=[d1, d2, d3, d4],
        dual=[VectorField.coordinate(chart, c) for c in ("x1", "x2", "x3", "x4")],
        j_images=[-d2, d1, -d4, d3],
        weights=[A, A, B, B],
        omega1=d1.wedge(d2) + d3.wedge(d4),
        beta1=d2 * x1 + d4 * x3,
        omega0=d1.wedge(d2) - d3.wedge(d4),
        beta0=d2 * x1 - d4 * x3,
        einstein=BASE_EINSTEIN["T4"],
    )


def h2xh2_base(chart: Optional[Chart] = None) -> BaseData:
    """Product of two hyperbolic planes of curvature −1 (upper half planes)."""
    chart = chart or base_chart("H2xH2")
    ya, yb = chart.symbol("ya"), chart.symbol("yb")
    dxa, dya, dxb, dyb = (dx(chart, c) for c in ("xa", "ya", "xb", "yb"))
    return BaseData(
        name="H2xH2",
        chart=chart,
        coframe=[dxa, dya, dxb, dyb],
        dual=[VectorField.coordinate(chart, c) for c in ("xa", "ya", "xb", "yb")],
        j_images=[-dya, dxa, -dyb, dxb],
        weights=[1 / ya ** 2, 1 / ya ** 2, 1 / yb ** 2, 1 / yb ** 2],
        omega1=dxa.wedge(dya) * (1 / ya ** 2) + dxb.wedge(dyb) * (1 / yb ** 2),
        beta1=dxa * (1 / ya) + dxb * (1 / yb),
        omega0=KForm(chart, 2),
        beta0=KForm(chart, 1),
        einstein=BASE_EINSTEIN["H2xH2"],
    )


BASE_BUILDERS = {"CP2": cp2_base, "S2xS2": s2xs2_base, "T4": t4_base, "H2xH2": h2xh2_base}


def catalog_metric(name: str) -> Tuple[BaseData, MetricField]:
    """
    One of the four-dimensional catalog metrics on its own chart.

    Args:
        name: "CP2", "S2xS2", "T4" or "H2xH2"

    Returns:
        (base data, metric field)
    """
    if name not in BASE_BUILDERS:
        raise ChartDomainError(f"No catalog metric named {name}")
    base = BASE_BUILDERS[name](base_chart(name))
    return base, base.metric()


# ---------------------------------------------------------------------------
# Ricci curvature
# ---------------------------------------------------------------------------

class _MetricJet:
    """Compiled metric with first and second coordinate derivatives."""

    def __init__(self, g: MetricField, fd_step: float = DEFAULT_FD_STEP):
        chart = g.chart
        n = chart.dim
        entries = list(g.matrix)
        first = [[partial(e, chart, k, fd_step) for e in entries] for k in range(n)]
        second = [[[partial(e, chart, m, fd_step) for e in row] for m in range(n)] for row in first]
        self.n = n
        self.chart = chart
        self._g = sp.lambdify(chart.symbols, entries, modules="numpy")
        self._dg = sp.lambdify(chart.symbols, [e for row in first for e in row], modules="numpy")
        self._ddg = sp.lambdify(chart.symbols,
                                [e for block in second for row in block for e in row], modules="numpy")

    def at(self, p) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        p = self.chart.validate(p)
        n = self.n
        flat = lambda values, shape: np.array([float(v) for v in values]).reshape(shape)
        g = flat(self._g(*p), (n, n))
        dg = flat(self._dg(*p), (n, n, n))            # dg[k, i, j] = ∂_k g_ij
        ddg = flat(self._ddg(*p), (n, n, n, n))       # ddg[k, m, i, j] = ∂_m ∂_k g_ij
        return g, dg, ddg


def ricci_tensor(g: MetricField, p, jet: Optional[_MetricJet] = None) -> np.ndarray:
    """
    Ricci tensor of a metric at a point.

    Christoffel symbols and their derivatives are assembled from analytic
    metric derivatives (central differences only where sympy cannot
    differentiate).

    Args:
        g: Metric field
        p: Point in the chart
        jet: Precompiled derivatives, reused across points

    Returns:
        Array R[j, k]
    """
    jet = jet or _MetricJet(g)
    gm, dg, ddg = jet.at(p)
    ginv = np.linalg.inv(gm)
    # Γ_{l,jk} = ½(∂_j g_lk + ∂_k g_lj − ∂_l g_jk)
    lower = 0.5 * (np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg) - dg)
    gamma = np.einsum("il,ljk->ijk", ginv, lower)
    # ∂_m Γ_{l,jk}
    d_lower = 0.5 * (np.einsum("jmlk->mljk", ddg) + np.einsum("kmlj->mljk", ddg)
                     - np.einsum("lmjk->mljk", ddg))
    d_ginv = -np.einsum("ia,mab,bl->mil", ginv, dg, ginv)
    d_gamma = np.einsum("mil,ljk->mijk", d_ginv, lower) + np.einsum("il,mljk->mijk", ginv, d_lower)
    return (np.einsum("iijk->jk", d_gamma) - np.einsum("kiji->jk", d_gamma)
            + np.einsum("iip,pjk->jk", gamma, gamma) - np.einsum("ikp,pji->jk", gamma, gamma))


def ricci4_numeric(g4: MetricField, p) -> np.ndarray:
    """Ricci tensor of a four-dimensional metric at p."""
    if g4.chart.dim != 4:
        raise ChartDomainError(f"ricci4_numeric expects a 4D chart, got {g4.chart.dim}")
    return ricci_tensor(g4, p)


def einstein_defect(g: MetricField, constant: float, points: Sequence,
                    jet: Optional[_MetricJet] = None) -> List[float]:
    """max |Ric − constant·g| at each point."""
    jet = jet or _MetricJet(g)
    out = []
    for p in points:
        ric = ricci_tensor(g, p, jet)
        out.append(float(np.max(np.abs(ric - constant * g.at(p)))))
    return out


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

# Values each family fixes; None leaves the parameter free.
FAMILY_LOCKS: Dict[str, Dict[str, float]] = {
    "flat_C3": {"a": 0, "p": 0, "q": 0, "C_einstein": 0, "lam": 0},
    "canonical_CP2": {"a": 2, "b": 0, "p": 0, "q": 0, "C_einstein": 6, "lam": 0},
    "canonical_S2xS2": {"a": 1, "b": 0, "p": 0, "q": 0, "C_einstein": 8, "lam": 0},
    "CP3_type": {"a": 1, "b": 0, "p": 0, "q": 0, "C_einstein": 12, "lam": -16, "cone_param": 0},
    "negative_KE_dual": {"a": 1, "b": 0, "p": 0, "q": 0, "C_einstein": -12, "lam": 16, "cone_param": 0},
    "hyperkahler_base": {"b": 0, "p": 0, "q": 0, "C_einstein": 0},
    "T4_nilmanifold": {"C_einstein": 0, "lam": 0},
    "conti_salamon": {"a": 1, "b": 0, "p": 0, "q": 0, "C_einstein": 0, "lam": 0},
}

# Moment-map interval on which each family's profile is defined.
FAMILY_H_DOMAIN: Dict[str, Tuple[float, float]] = {
    "CP3_type": (0.0, 1.0),
    "negative_KE_dual": (1.0, INF),
}

FIBRE_SCALE = {"canonical_CP2": 1, "canonical_S2xS2": sp.Rational(4, 3)}
BASE_SCALE = {"canonical_CP2": 1, "canonical_S2xS2": sp.Rational(2, 3)}
FIBRE_PERIOD = {"canonical_CP2": 2 * PI / 3, "canonical_S2xS2": PI / 2}
H_SYMBOL = sp.Symbol("H", positive=True)
DENOMINATOR_ZERO_TOL = 1e-10


def preset(family: str, **overrides) -> BackgroundSpec:
    """A BackgroundSpec with every lock of the family applied."""
    values = {key: float(v) for key, v in FAMILY_LOCKS[family].items()}
    if family == "flat_C3":
        values.setdefault("b", 1.0)
    if family == "hyperkahler_base":
        values.update({"a": 1.0, "lam": 16.0})
    if family == "T4_nilmanifold":
        values.update({"a": 1.0, "b": 0.0, "p": 0.0, "q": 0.0})
    values.update(overrides)
    return BackgroundSpec(family=family, **values)


def check_locks(spec: BackgroundSpec) -> None:
    """Raise ParameterLockError when a locked parameter has another value."""
    for key, value in FAMILY_LOCKS[spec.family].items():
        if not math.isclose(getattr(spec, key), value, abs_tol=1e-12):
            raise ParameterLockError(
                f"{spec.family} requires {key} = {value}, got {getattr(spec, key)}")
    if spec.family == "hyperkahler_base" and not (spec.a > 0 and spec.lam > 0):
        raise ParameterLockError("hyperkahler_base needs a > 0 and λ > 0")


def positivity_window(spec: BackgroundSpec) -> Tuple[float, float]:
    """
    The H interval of the chart, checked against aH + b > |pH + q|.

    Raises:
        PositivityWindowError: the window fails somewhere on the interval
    """
    lo, hi = spec.H_range
    dlo, dhi = FAMILY_H_DOMAIN.get(spec.family, (0.0, INF))
    lo, hi = max(lo, dlo), min(hi, dhi)
    if not lo < hi:
        raise PositivityWindowError(f"{spec.family}: H range {spec.H_range} misses ({dlo}, {dhi})")

    def window(H: float) -> float:
        return spec.a * H + spec.b - abs(spec.p * H + spec.q)

    # the window is concave in H, so it suffices to look at the ends
    ends = [window(lo)]
    if math.isinf(hi):
        if spec.a < abs(spec.p):
            raise PositivityWindowError(f"{spec.family}: a < |p| fails for large H")
    else:
        ends.append(window(hi))
    mid = lo + 1.0 if math.isinf(hi) else 0.5 * (lo + hi)
    if min(ends) < 0 or window(mid) <= 0:
        raise PositivityWindowError(
            f"{spec.family}: aH + b > |pH + q| fails on ({lo}, {hi})")
    return lo, hi


def effective_cone_param(spec: BackgroundSpec) -> float:
    """The constant Č of the u(H) formula; canonical families convert from C_cone."""
    if spec.family == "canonical_CP2":
        return 36.0 * spec.cone_param
    if spec.family == "canonical_S2xS2":
        return 256.0 * spec.cone_param / 9.0
    return spec.cone_param


def u_denominator(spec: BackgroundSpec) -> Optional[sp.Expr]:
    """
    The quartic Q under the square root of u, or None for the λ = 0 torus families.

        Q = 9a²λH⁴ + 12a(2bλ + aC)H³ + 18b(bλ + 2aC)H² + 36b²CH − Č
    """
    if spec.base_chart == "T4" and spec.lam == 0:
        return None
    H = H_SYMBOL
    a, b, C, lam = (sp.nsimplify(v) for v in (spec.a, spec.b, spec.C_einstein, spec.lam))
    return (9 * a ** 2 * lam * H ** 4 + 12 * a * (2 * b * lam + a * C) * H ** 3
            + 18 * b * (b * lam + 2 * a * C) * H ** 2 + 36 * b ** 2 * C * H
            - sp.nsimplify(effective_cone_param(spec)))


def u_profile(spec: BackgroundSpec) -> sp.Expr:
    """
    The fibre profile u as a function of the moment map H.

    Torus families with λ = 0 use u² = ((a+p)H + b + q)((a−p)H + b − q);
    every other family uses u = 6(aH + b)/√Q with Q from ``u_denominator``.
    """
    H = H_SYMBOL
    a, b, p, q = (sp.nsimplify(v) for v in (spec.a, spec.b, spec.p, spec.q))
    Q = u_denominator(spec)
    if Q is None:
        return sp.sqrt(((a + p) * H + b + q) * ((a - p) * H + b - q))
    return 6 * (a * H + b) / sp.sqrt(Q)


def einstein_residual_expr(spec: BackgroundSpec) -> sp.Expr:
    """u⁻⁴ρ̃⁻¹∂_H(u²ρ̃) + C + λH with ρ̃ = 1/(AB)."""
    H = H_SYMBOL
    u = u_profile(spec)
    a, b, p, q = (sp.nsimplify(v) for v in (spec.a, spec.b, spec.p, spec.q))
    rho = 1 / (((a + p) * H + b + q) * ((a - p) * H + b - q))
    residual = sp.diff(u ** 2 * rho, H) / (u ** 4 * rho) + sp.nsimplify(spec.C_einstein) \
        + sp.nsimplify(spec.lam) * H
    return sp.simplify(residual)


def einstein_residuals(spec: BackgroundSpec, H_grid: Sequence[float]) -> np.ndarray:
    """
    Pointwise Einstein residual of the profile on an H grid.

    Raises:
        ChartDomainError: a grid point sits on a zero of u's denominator
    """
    check_locks(spec)
    H_values = np.asarray(H_grid, dtype=float)
    Q = u_denominator(spec)
    if Q is not None:
        q_values = np.broadcast_to(np.asarray(sp.lambdify(H_SYMBOL, Q, modules="numpy")(H_values), dtype=float),
                                   H_values.shape)
        singular = np.abs(q_values) <= DENOMINATOR_ZERO_TOL
        if np.any(singular):
            raise ChartDomainError(
                f"{spec.family}: u is singular at H = {H_values[singular].tolist()} (Q = 0)")
    fn = sp.lambdify(H_SYMBOL, einstein_residual_expr(spec), modules="numpy")
    values = np.broadcast_to(np.asarray(fn(H_values), dtype=float), H_values.shape)
    return np.abs(values)


@dataclass
class SU3Structure:
    """Kähler form, metric and (when it exists) holomorphic volume form on a 6D chart."""

    spec: BackgroundSpec
    chart: Chart
    metric: MetricField
    omega: KForm
    Omega: Optional[ComplexForm]
    frame: Frame
    fibre_form: KForm
    u: sp.Expr
    moment: sp.Expr
    radial: str
    base: BaseData
    fibre_period: float
    flags: List[str] = field(default_factory=list)

    @property
    def om_plus(self) -> Optional[KForm]:
        return self.Omega.re if self.Omega is not None else None

    @property
    def om_minus(self) -> Optional[KForm]:
        return self.Omega.im if self.Omega is not None else None

    def volume_form(self) -> KForm:
        return wedge(self.omega, self.omega, self.omega) * sp.Rational(1, 6)

    def J(self, p) -> np.ndarray:
        """Complex structure matrix from the frame, J = Θ⁻¹·(θ∘J)."""
        Theta = np.array([th.at(p).values for th in self.frame.coframe], dtype=float)
        images = np.array([im.at(p).values for im in self.frame.j_images], dtype=float)
        return np.linalg.solve(Theta, images)

    def orientation(self) -> int:
        """Sign of ω³ in the chart's coordinate order."""
        p = sample_points(self.chart, 1, seed=0)[0]
        return 1 if np.real(self.volume_form().at(p).top()) > 0 else -1


def _lift_dual(base: BaseData, fibre_form: KForm, fibre_vector: VectorField) -> List[VectorField]:
    """Horizontal lifts E_A − fibre_form(E_A)·X of the base frame."""
    lifted = []
    for E in base.dual:
        coeff = pair(fibre_form, E)
        lifted.append(E if coeff == 0 else E - fibre_vector * coeff)
    return lifted


def _canonical_chart(spec: BackgroundSpec) -> Chart:
    coords, ranges, periodic = BASE_CHARTS[spec.base_chart]
    C = spec.cone_param
    r_lo = C ** (1.0 / 6.0) if C > 0 else 0.0
    return Chart(spec.family, ("r", "y") + coords,
                 ((r_lo, INF), (0.0, FIBRE_PERIOD[spec.family])) + ranges,
                 (False, True) + periodic)


def _canonical_psi(spec: BackgroundSpec, chart: Chart) -> ComplexForm:
    """The base factor of Ψ: a (2,0)-form on the base."""
    if spec.base_chart == "CP2":
        t = chart.symbol("t")
        s1, s2, s3 = su2_forms(chart)
        first = ComplexForm(dx(chart, "t") * (1 / (2 * sp.sqrt(1 - t))), s1 * (-t * sp.sqrt(1 - t)))
        return first.wedge(ComplexForm(s2, s3))
    r1, r2 = chart.symbol("r1"), chart.symbol("r2")
    th1, th2 = chart.symbol("th1"), chart.symbol("th2")
    dr1, dth1, dr2, dth2 = (dx(chart, c) for c in ("r1", "th1", "r2", "th2"))
    dz1 = ComplexForm(dr1 * sp.cos(th1) - dth1 * (r1 * sp.sin(th1)),
                      dr1 * sp.sin(th1) + dth1 * (r1 * sp.cos(th1)))
    dz2_bar = ComplexForm(dr2 * sp.cos(th2) - dth2 * (r2 * sp.sin(th2)),
                          dr2 * (-sp.sin(th2)) - dth2 * (r2 * sp.cos(th2)))
    return dz1.wedge(dz2_bar) * (sp.Rational(2, 3) / ((1 + r1 ** 2) * (1 + r2 ** 2)))


def _canonical_phase(spec: BackgroundSpec, chart: Chart) -> Tuple[sp.Expr, sp.Expr]:
    """(Re, Im) of the phase rotating Ψ into a closed Ω."""
    y = chart.symbol("y")
    if spec.base_chart == "CP2":
        return sp.cos(3 * y), sp.sin(3 * y)
    phi = 4 * y + 2 * chart.symbol("th1") - 2 * chart.symbol("th2")
    # −i·e^{iφ}
    return sp.sin(phi), -sp.cos(phi)


def _build_canonical(spec: BackgroundSpec, rotated: bool = True) -> SU3Structure:
    chart = _canonical_chart(spec)
    base = BASE_BUILDERS[spec.base_chart](chart).scaled(BASE_SCALE[spec.family])
    r = chart.symbol("r")
    C = sp.nsimplify(spec.cone_param)
    D = r ** 6 - C
    dr = dx(chart, "r")
    theta = dx(chart, "y") * FIBRE_SCALE[spec.family] + base.beta1 * 2

    coframe = [dr, theta] + base.coframe
    weights = [r ** 6 / D, D / r ** 4] + [r ** 2 * w for w in base.weights]
    fibre_vector = VectorField.coordinate(chart, "y") * (1 / FIBRE_SCALE[spec.family])
    frame = Frame(chart, coframe,
                  [VectorField.coordinate(chart, "r"), fibre_vector] + _lift_dual(base, theta, fibre_vector),
                  [theta * (-D / r ** 5), dr * (r ** 5 / D)] + base.j_images)
    omega = dr.wedge(theta) * r + base.omega1 * r ** 2

    radial = ComplexForm(dr * (r ** 3 / sp.sqrt(D)), theta * (sp.sqrt(D) / r ** 2)) * r ** 2
    Psi = radial.wedge(_canonical_psi(spec, chart))
    Omega = Psi.times_complex(*_canonical_phase(spec, chart)) if rotated else Psi

    H = r ** 2 / 2 if spec.family == "canonical_CP2" else sp.Rational(2, 3) * r ** 2
    u = u_profile(spec).subs(H_SYMBOL, H)
    return SU3Structure(
        spec=spec, chart=chart, metric=MetricField.from_coframe(chart, coframe, weights),
        omega=omega, Omega=Omega, frame=frame, fibre_form=theta, u=u, moment=H, radial="r",
        base=base, fibre_period=FIBRE_PERIOD[spec.family],
        flags=[] if rotated else ["unrotated"],
    )


def _calabi_base(spec: BackgroundSpec, chart: Chart) -> Tuple[BaseData, KForm, KForm]:
    """Base data with weights (aH + b)·g₁, plus ω̃₁ and the connection form Θ."""
    H = chart.symbol("H")
    a, b, p, q = (sp.nsimplify(v) for v in (spec.a, spec.b, spec.p, spec.q))
    dy = dx(chart, "y")
    if spec.base_chart == "T4":
        base = t4_base(chart, (a + p) * H + b + q, (a - p) * H + b - q)
        omega_tilde = base.omega1 * (a * H + b) + base.omega0 * (p * H + q)
        return base, omega_tilde, dy - base.beta1 * a - base.beta0 * p

    # Ric(ω₁) = ½(aC − λb)·ω₁
    einstein = 0.5 * (spec.a * spec.C_einstein - spec.lam * spec.b)
    unscaled = BASE_BUILDERS[spec.base_chart](chart)
    if einstein * unscaled.einstein <= 0:
        raise ParameterLockError(
            f"{spec.family}: base Einstein constant {einstein} has the wrong sign for {spec.base_chart}")
    base = unscaled.scaled(sp.nsimplify(unscaled.einstein / einstein))
    base.weights = [(a * H + b) * w for w in base.weights]
    return base, base.omega1 * (a * H + b), dy - base.beta1 * a


def _build_calabi(spec: BackgroundSpec) -> SU3Structure:
    lo, hi = positivity_window(spec)
    coords, ranges, periodic = BASE_CHARTS[spec.base_chart]
    chart = Chart(spec.family, ("H", "y") + coords, ((lo, hi), (0.0, 2 * PI)) + ranges,
                  (False, True) + periodic)
    H = chart.symbol("H")
    base, omega_tilde, Theta = _calabi_base(spec, chart)
    u = u_profile(spec).subs(H_SYMBOL, H)
    dH = dx(chart, "H")

    coframe = [dH, Theta] + base.coframe
    weights = [u ** 2, u ** -2] + base.weights
    dy_field = VectorField.coordinate(chart, "y")
    frame = Frame(chart, coframe,
                  [VectorField.coordinate(chart, "H"), dy_field] + _lift_dual(base, Theta, dy_field),
                  [Theta * u ** -2, dH * (-u ** 2)] + base.j_images)
    omega = Theta.wedge(dH) + omega_tilde

    flags: List[str] = []
    Omega = None
    if spec.base_chart == "T4" and spec.lam == 0:
        dz1 = ComplexForm(dx(chart, "x1"), dx(chart, "x2"))
        dz2 = ComplexForm(dx(chart, "x3"), dx(chart, "x4"))
        Omega = ComplexForm(Theta, dH * u ** 2).wedge(dz1).wedge(dz2)
    else:
        flags.append("no_holomorphic_volume_form")
    return SU3Structure(
        spec=spec, chart=chart, metric=MetricField.from_coframe(chart, coframe, weights),
        omega=omega, Omega=Omega, frame=frame, fibre_form=Theta, u=u, moment=H, radial="H",
        base=base, fibre_period=2 * PI, flags=flags,
    )


def build_structure(spec: BackgroundSpec) -> SU3Structure:
    """
    Assemble the Kähler–Einstein background of a family.

    Args:
        spec: Family and parameters

    Returns:
        SU3Structure on the family's chart

    Raises:
        ParameterLockError: parameters violate the family's locks
        PositivityWindowError: aH + b > |pH + q| fails on the H range
    """
    check_locks(spec)
    logger.info(f"Building {spec.family} background")
    if spec.is_canonical:
        return _build_canonical(spec)
    return _build_calabi(spec)


def unrotated_structure(spec: BackgroundSpec) -> SU3Structure:
    """The canonical background with Ω replaced by the unrotated Ψ."""
    check_locks(spec)
    if not spec.is_canonical:
        raise ParameterLockError("Only canonical families carry an unrotated Ψ")
    return _build_canonical(spec, rotated=False)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def form_values(form, points: np.ndarray) -> List[FormValue]:
    """Values of a KForm or ComplexForm at each point."""
    if isinstance(form, ComplexForm):
        values = form.re.values(points) + 1j * form.im.values(points)
    else:
        values = form.values(points)
    return [FormValue(form.chart.dim, form.degree, row) for row in values]


def row_sup(values: np.ndarray) -> np.ndarray:
    values = np.atleast_2d(values)
    if values.shape[1] == 0:
        return np.zeros(values.shape[0])
    return np.max(np.abs(values), axis=1)


def verify_su3_structure(S: SU3Structure, grid: np.ndarray,
                         fd_step: float = DEFAULT_FD_STEP) -> List[ResidualReport]:
    """
    Residuals of the Calabi–Yau structure equations on a grid.

    Checks dω = 0, dΩ± = 0, ω∧Ω± = 0, ⅔ω³ = Ω⁺∧Ω⁻, J² = −1 and
    ω(X, Y) = g(JX, Y). Families without Ω report only the ω checks.

    Args:
        S: Structure to check
        grid: (n, 6) array of chart points
        fd_step: Step of any finite-difference fallback

    Returns:
        One ResidualReport per check
    """
    grid = S.chart.validate(np.atleast_2d(grid))
    n = len(grid)
    reports = [ResidualReport.from_samples("d_omega", row_sup(exterior_derivative(S.omega, fd_step).values(grid)),
                                           family=S.spec.family)]

    j_defects, compat = [], []
    for p in grid:
        J = S.J(p)
        g = S.metric.at(p)
        W = np.zeros((6, 6))
        for (i, j), value in S.omega.at(p).items():
            W[i, j], W[j, i] = value, -value
        j_defects.append(float(np.max(np.abs(J @ J + np.eye(6)))))
        compat.append(float(np.max(np.abs(W - J.T @ g))))
    reports.append(ResidualReport.from_samples("j_squared", j_defects, family=S.spec.family))
    reports.append(ResidualReport.from_samples("compatibility", compat, family=S.spec.family))

    if S.Omega is None:
        for report in reports:
            report.flags.extend(S.flags)
        return reports

    dOmega = S.Omega.d(fd_step)
    reports.append(ResidualReport.from_samples("d_Omega_plus", row_sup(dOmega.re.values(grid)),
                                               family=S.spec.family))
    reports.append(ResidualReport.from_samples("d_Omega_minus", row_sup(dOmega.im.values(grid)),
                                               family=S.spec.family))

    omegas = form_values(S.omega, grid)
    Omegas = form_values(S.Omega, grid)
    wedge_defects, normalization = [], []
    for om, Om in zip(omegas, Omegas):
        wedge_defects.append(om.wedge(Om).max_abs())
        plus = FormValue(Om.dim, Om.degree, np.real(Om.values))
        minus = FormValue(Om.dim, Om.degree, np.imag(Om.values))
        lhs = om.wedge(om).wedge(om).top() * 2.0 / 3.0
        normalization.append(abs(lhs - plus.wedge(minus).top()))
    reports.append(ResidualReport.from_samples("omega_wedge_Omega", wedge_defects, family=S.spec.family))
    reports.append(ResidualReport.from_samples("normalization", normalization, family=S.spec.family))
    for report in reports:
        report.flags.extend(S.flags)
    logger.info(f"Checked {S.spec.family} structure on {n} points")
    return reports


def curvature_relation_residual(spec: BackgroundSpec, grid: np.ndarray) -> ResidualReport:
    """sup |dΘ + ∂_H ω̃₁| for a family written in the moment-map chart."""
    if spec.is_canonical:
        raise ParameterLockError("The curvature relation is stated in the H chart")
    check_locks(spec)
    S = _build_calabi(spec)
    base, omega_tilde, Theta = _calabi_base(spec, S.chart)
    H = S.chart.symbol("H")
    residual = exterior_derivative(Theta) + omega_tilde.map_components(lambda v: sp.diff(v, H))
    return ResidualReport.from_samples("curvature_relation", row_sup(residual.values(grid)),
                                       family=spec.family)


def lie_rotation_residual(S: SU3Structure, grid: np.ndarray) -> ResidualReport:
    """sup |L_{∂y}Ω⁺ + 3Ω⁻| for the canonical CP² structure."""
    if S.spec.family != "canonical_CP2" or S.Omega is None:
        raise ParameterLockError("The rotation law holds on canonical_CP2")
    X = VectorField.coordinate(S.chart, "y")
    residual = lie_derivative(X, S.om_plus) + S.om_minus * 3
    return ResidualReport.from_samples("lie_rotation", row_sup(residual.values(grid)),
                                       family=S.spec.family)


def symplectic_independence_residual(spec: BackgroundSpec, grid: np.ndarray) -> ResidualReport:
    """sup |ω(C) − ω(0)|: the Kähler form of a canonical family does not see C_cone."""
    if not spec.is_canonical:
        raise ParameterLockError("Only canonical families have a resolution parameter")
    S = build_structure(spec)
    cone = build_structure(replace(spec, cone_param=0.0))
    residual = S.omega - KForm(S.chart, 2, cone.omega.components)
    return ResidualReport.from_samples("symplectic_independence", row_sup(residual.values(grid)),
                                       family=spec.family)


def verify_base_einstein(name: str, grid: np.ndarray) -> ResidualReport:
    """sup |Ric − E·g| of a catalog metric."""
    base, g = catalog_metric(name)
    return ResidualReport.from_samples("ricci", einstein_defect(g, base.einstein, grid),
                                       base=name, einstein=base.einstein)


def deformation_chart() -> Chart:
    """The moment map H together with flat torus coordinates."""
    coords, ranges, periodic = BASE_CHARTS["T4"]
    return Chart("T4_deformation", ("H",) + coords, ((0.0, INF),) + ranges, (False,) + periodic)


def verify_nonconstant_deformation(data: DeformationData, grid: np.ndarray) -> List[ResidualReport]:
    """
    Residuals of a non-constant Kähler potential deformation over the flat torus.

    With G = v(H)·F + H⁴/12 the equations reduce to ΔF = μF, v'' = μHv and

        ∂²_H G = H² + H·ΔG + (dd^cG)²/ω₁²,   ω₁² = 2 dx1∧dx2∧dx3∧dx4.

    Args:
        data: Eigenvalue μ, eigenfunction F(x) and profile v(H), as sympy
            expressions in the coordinates of ``deformation_chart()``
        grid: (n, 5) array of points on that chart

    Returns:
        Reports for the eigenfunction, profile and potential equations
    """
    chart = deformation_chart()
    grid = chart.validate(np.atleast_2d(grid))
    H = chart.symbol("H")
    xs = [chart.symbol(c) for c in ("x1", "x2", "x3", "x4")]
    F, v, mu = sp.sympify(data.F), sp.sympify(data.v), sp.nsimplify(data.mu)

    flat_laplacian = lambda f: -sum(sp.diff(f, x, 2) for x in xs)
    G = v * F + H ** 4 / 12
    frame = t4_base(chart).frame()
    ddc = frame.ddc(G)
    square = ddc.wedge(ddc).components.get((1, 2, 3, 4), sp.Integer(0)) / 2
    equations = {
        "eigenfunction": flat_laplacian(F) - mu * F,
        "profile": sp.diff(v, H, 2) - mu * H * v,
        "potential": sp.diff(G, H, 2) - H ** 2 - H * flat_laplacian(G) - square,
    }
    reports = []
    for name, expr in equations.items():
        fn = sp.lambdify(chart.symbols, expr, modules="numpy")
        values = np.broadcast_to(np.abs(np.asarray(fn(*grid.T), dtype=float)), (len(grid),))
        reports.append(ResidualReport.from_samples(f"deformation_{name}", values, mu=float(data.mu)))
    return reports


def airy_deformation(mu: float) -> DeformationData:
    """The two Airy examples: F = sin x1 with μ = 1, F = eˣ¹ with μ = −1."""
    chart = deformation_chart()
    H, x1 = chart.symbol("H"), chart.symbol("x1")
    if mu == 1:
        return DeformationData(mu=1.0, F=sp.sin(x1), v=airy_expr(H))
    if mu == -1:
        return DeformationData(mu=-1.0, F=sp.exp(x1), v=airy_expr(-H))
    raise ParameterLockError(f"No Airy deformation with μ = {mu}")
