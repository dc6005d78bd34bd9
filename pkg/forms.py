"""
Exterior calculus on coordinate charts.

Forms carry sympy component expressions keyed by strictly increasing index
tuples; evaluation at points goes through cached numpy lambdas. Pointwise
metric operations (inner products, Hodge star, complex structure) work on
FormValue objects, the value of a form at a single point.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from sympy.utilities.lambdify import implemented_function

from models import (
    ChartDomainError,
    ChartMismatchError,
    DegreeError,
    DependentGeneratorsError,
    InconsistentStructureError,
    SingularMetricError,
)
from utils import DEFAULT_FD_STEP

logger = logging.getLogger(__name__)

Index = Tuple[int, ...]

POSITIVE_COORDS = {"r", "t", "x2", "r1", "r2", "H", "ya", "yb"}
_symbol_cache: Dict[str, sp.Symbol] = {}
_fd_counter = itertools.count()


def coordinate_symbol(name: str) -> sp.Symbol:
    """Shared sympy symbol for a coordinate name, with sign assumptions."""
    if name not in _symbol_cache:
        if name in POSITIVE_COORDS:
            _symbol_cache[name] = sp.Symbol(name, positive=True)
        else:
            _symbol_cache[name] = sp.Symbol(name, real=True)
    return _symbol_cache[name]


class Chart:
    """A coordinate chart: names, open ranges and periodicity flags."""

    def __init__(self, name: str, coord_names: Sequence[str],
                 ranges: Sequence[Tuple[float, float]], periodic: Sequence[bool]):
        if not (len(coord_names) == len(ranges) == len(periodic)):
            raise ChartDomainError(f"Chart {name}: coordinate data of unequal length")
        for coord, (lo, hi) in zip(coord_names, ranges):
            if not lo < hi:
                raise ChartDomainError(f"Chart {name}: empty range for {coord}")
        self.name = name
        self.coord_names = tuple(coord_names)
        self.ranges = tuple((float(lo), float(hi)) for lo, hi in ranges)
        self.periodic = tuple(bool(p) for p in periodic)
        self.symbols = tuple(coordinate_symbol(c) for c in self.coord_names)

    @property
    def dim(self) -> int:
        return len(self.coord_names)

    def index(self, coord: str) -> int:
        return self.coord_names.index(coord)

    def symbol(self, coord: str) -> sp.Symbol:
        return self.symbols[self.index(coord)]

    def validate(self, point, pad=0.0) -> np.ndarray:
        """Raise ChartDomainError unless every coordinate is inside its range.

        ``pad`` may be a scalar or per-coordinate array of distances that must
        also stay inside non-periodic ranges.
        """
        point = np.asarray(point, dtype=float)
        if point.shape[-1] != self.dim:
            raise ChartMismatchError(f"Point of dimension {point.shape[-1]} on chart {self.name}")
        pad = np.broadcast_to(np.asarray(pad, dtype=float), point.shape)
        for i, ((lo, hi), periodic) in enumerate(zip(self.ranges, self.periodic)):
            if periodic:
                continue
            x = point[..., i]
            if np.any(x - pad[..., i] <= lo) or np.any(x + pad[..., i] >= hi):
                raise ChartDomainError(
                    f"{self.coord_names[i]} outside ({lo}, {hi}) on chart {self.name}")
        return point

    def same_as(self, other: "Chart") -> bool:
        return self.coord_names == other.coord_names

    def __repr__(self):
        return f"Chart({self.name!r}, {self.coord_names})"


def _require_same_chart(a, b):
    if not a.chart.same_as(b.chart):
        raise ChartMismatchError(f"{a.chart.name} vs {b.chart.name}")


def basis(dim: int, k: int) -> List[Index]:
    return list(itertools.combinations(range(dim), k))


def merge_sign(I: Index, J: Index) -> Tuple[int, Optional[Index]]:
    """Sign of dx^I ∧ dx^J relative to the sorted index tuple."""
    if set(I) & set(J):
        return 0, None
    inversions = sum(1 for i in I for j in J if i > j)
    return (-1) ** inversions, tuple(sorted(I + J))


def compile_exprs(chart: Chart, exprs: Sequence) -> Callable:
    """Numpy lambda of several expressions in the chart coordinates."""
    return sp.lambdify(chart.symbols, list(exprs), modules="numpy")


def evaluate_exprs(fn: Callable, points: np.ndarray) -> np.ndarray:
    """Evaluate a compiled expression list on an (n, dim) array."""
    points = np.atleast_2d(points)
    n = points.shape[0]
    values = fn(*points.T)
    columns = [np.broadcast_to(np.asarray(v), (n,)) for v in values]
    if not columns:
        return np.zeros((n, 0))
    return np.stack(columns, axis=1)


def _finite_difference_partial(expr, chart: Chart, i: int, h: float):
    """Central-difference partial of ``expr`` as an implemented function."""
    fn = sp.lambdify(chart.symbols, expr, modules="numpy")
    lo, hi = chart.ranges[i]
    periodic = chart.periodic[i]
    coord = chart.coord_names[i]

    def impl(*coords):
        coords = [np.asarray(c, dtype=float) for c in coords]
        x = coords[i]
        step = h * np.maximum(1.0, np.abs(x))
        if not periodic and (np.any(x - 2 * step <= lo) or np.any(x + 2 * step >= hi)):
            raise ChartDomainError(f"Finite-difference stencil for {coord} leaves ({lo}, {hi})")
        plus = list(coords)
        minus = list(coords)
        plus[i] = x + step
        minus[i] = x - step
        return (np.asarray(fn(*plus)) - np.asarray(fn(*minus))) / (2 * step)

    name = f"fd_{coord}_{next(_fd_counter)}"
    logger.debug(f"Falling back to central differences for d/d{coord}")
    return implemented_function(name, impl)(*chart.symbols)


def partial(expr, chart: Chart, i: int, fd_step: float = DEFAULT_FD_STEP):
    """Analytic partial derivative, with a central-difference fallback."""
    result = sp.diff(expr, chart.symbols[i])
    if result.has(sp.Derivative):
        return _finite_difference_partial(expr, chart, i, fd_step)
    return result


class ScalarField:
    """A function on a chart with analytic (or finite-difference) partials."""

    def __init__(self, chart: Chart, expr):
        self.chart = chart
        self.expr = sp.sympify(expr)
        self._fn = None

    @classmethod
    def from_callable(cls, chart: Chart, func: Callable, name: str = "field") -> "ScalarField":
        """Wrap a vectorized numpy callable; its partials use central differences."""
        fn = implemented_function(f"{name}_{next(_fd_counter)}", func)
        return cls(chart, fn(*chart.symbols))

    def __call__(self, point):
        if self._fn is None:
            self._fn = sp.lambdify(self.chart.symbols, self.expr, modules="numpy")
        point = self.chart.validate(point)
        return self._fn(*np.asarray(point, dtype=float).T)

    def partial(self, i: int, fd_step: float = DEFAULT_FD_STEP) -> "ScalarField":
        return ScalarField(self.chart, partial(self.expr, self.chart, i, fd_step))

    def partial_mismatch(self, points: np.ndarray, fd_step: float = 1e-6) -> float:
        """Largest relative gap between analytic partials and central differences."""
        worst = 0.0
        for i in range(self.chart.dim):
            analytic = self.partial(i)
            numeric = ScalarField(self.chart, _finite_difference_partial(self.expr, self.chart, i, fd_step))
            for p in points:
                a, b = float(analytic(p)), float(numeric(p))
                worst = max(worst, abs(a - b) / max(1.0, abs(a)))
        return worst


class VectorField:
    """Vector field with sympy components in the coordinate frame."""

    def __init__(self, chart: Chart, components: Sequence):
        if len(components) != chart.dim:
            raise ChartMismatchError(f"Vector field needs {chart.dim} components")
        self.chart = chart
        self.components = [sp.sympify(c) for c in components]
        self._fn = None

    @classmethod
    def coordinate(cls, chart: Chart, coord: str) -> "VectorField":
        comps = [0] * chart.dim
        comps[chart.index(coord)] = 1
        return cls(chart, comps)

    def apply(self, f, fd_step: float = DEFAULT_FD_STEP):
        """Directional derivative X(f) of a scalar expression."""
        return sum((c * partial(f, self.chart, i, fd_step)
                    for i, c in enumerate(self.components) if c != 0), sp.Integer(0))

    def at(self, point) -> np.ndarray:
        if self._fn is None:
            self._fn = compile_exprs(self.chart, self.components)
        point = self.chart.validate(point)
        return evaluate_exprs(self._fn, point)[0]

    def __add__(self, other):
        _require_same_chart(self, other)
        return VectorField(self.chart, [a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        return self + other * -1

    def __mul__(self, scalar):
        return VectorField(self.chart, [scalar * c for c in self.components])

    __rmul__ = __mul__


def lie_bracket(X: VectorField, Y: VectorField, fd_step: float = DEFAULT_FD_STEP) -> VectorField:
    """[X,Y]^i = X(Y^i) − Y(X^i)."""
    _require_same_chart(X, Y)
    return VectorField(X.chart, [X.apply(yi, fd_step) - Y.apply(xi, fd_step)
                                 for xi, yi in zip(X.components, Y.components)])


class KForm:
    """A differential k-form with sympy components on increasing index tuples."""

    def __init__(self, chart: Chart, degree: int, components: Optional[Dict[Index, object]] = None):
        if not 0 <= degree <= chart.dim:
            raise DegreeError(f"Degree {degree} on a {chart.dim}-dimensional chart")
        self.chart = chart
        self.degree = degree
        self.components: Dict[Index, sp.Expr] = {}
        for idx, value in (components or {}).items():
            idx = tuple(idx)
            if len(idx) != degree or list(idx) != sorted(set(idx)):
                raise DegreeError(f"Index {idx} is not strictly increasing of length {degree}")
            value = sp.sympify(value)
            if value != 0:
                self.components[idx] = value
        self._fn = None

    # construction -----------------------------------------------------------

    @classmethod
    def zero(cls, chart: Chart, degree: int) -> "KForm":
        return cls(chart, degree)

    @classmethod
    def function(cls, chart: Chart, expr) -> "KForm":
        return cls(chart, 0, {(): expr})

    @classmethod
    def from_terms(cls, chart: Chart, degree: int, terms: Iterable[Tuple[object, Index]]) -> "KForm":
        """Sum coefficient·dx^I over unsorted index tuples, applying signs."""
        components: Dict[Index, object] = {}
        for coeff, idx in terms:
            if len(set(idx)) < len(idx):
                continue
            order = sorted(range(len(idx)), key=lambda m: idx[m])
            sign = _permutation_sign(order)
            key = tuple(sorted(idx))
            components[key] = components.get(key, 0) + sign * sp.sympify(coeff)
        return cls(chart, degree, components)

    @property
    def scalar(self):
        if self.degree != 0:
            raise DegreeError("Only 0-forms have a scalar value")
        return self.components.get((), sp.Integer(0))

    # algebra ----------------------------------------------------------------

    def __add__(self, other: "KForm") -> "KForm":
        _require_same_chart(self, other)
        if self.degree != other.degree:
            raise DegreeError(f"Adding a {self.degree}-form to a {other.degree}-form")
        comps = dict(self.components)
        for idx, value in other.components.items():
            comps[idx] = comps.get(idx, 0) + value
        return KForm(self.chart, self.degree, comps)

    def __neg__(self) -> "KForm":
        return self * -1

    def __sub__(self, other: "KForm") -> "KForm":
        return self + (-other)

    def __mul__(self, scalar) -> "KForm":
        scalar = sp.sympify(scalar)
        return KForm(self.chart, self.degree, {i: scalar * v for i, v in self.components.items()})

    __rmul__ = __mul__

    def wedge(self, other: "KForm") -> "KForm":
        _require_same_chart(self, other)
        degree = self.degree + other.degree
        if degree > self.chart.dim:
            raise DegreeError(f"Wedge of degree {degree} exceeds dimension {self.chart.dim}")
        comps: Dict[Index, object] = {}
        for I, a in self.components.items():
            for J, b in other.components.items():
                sign, K = merge_sign(I, J)
                if sign:
                    comps[K] = comps.get(K, 0) + sign * a * b
        return KForm(self.chart, degree, comps)

    def __xor__(self, other: "KForm") -> "KForm":
        return self.wedge(other)

    def is_zero(self) -> bool:
        return not self.components

    def map_components(self, func: Callable) -> "KForm":
        return KForm(self.chart, self.degree, {i: func(v) for i, v in self.components.items()})

    def real_part(self) -> "KForm":
        return self.map_components(lambda v: sp.re(sp.expand_complex(v)))

    def imag_part(self) -> "KForm":
        return self.map_components(lambda v: sp.im(sp.expand_complex(v)))

    def subs(self, mapping) -> "KForm":
        return self.map_components(lambda v: v.subs(mapping))

    # evaluation -------------------------------------------------------------

    def _compiled(self):
        if self._fn is None:
            self._fn = compile_exprs(self.chart, [self.components.get(I, 0)
                                                  for I in basis(self.chart.dim, self.degree)])
        return self._fn

    def at(self, point) -> "FormValue":
        point = self.chart.validate(point)
        values = evaluate_exprs(self._compiled(), point)[0]
        return FormValue(self.chart.dim, self.degree, values)

    def values(self, points: np.ndarray) -> np.ndarray:
        """Component values on an (n, dim) array, shape (n, n_basis)."""
        points = self.chart.validate(np.atleast_2d(points))
        return evaluate_exprs(self._compiled(), points)

    def __repr__(self):
        return f"KForm(degree={self.degree}, terms={len(self.components)}, chart={self.chart.name})"


def _permutation_sign(order: Sequence[int]) -> int:
    inversions = sum(1 for a in range(len(order)) for b in range(a + 1, len(order)) if order[a] > order[b])
    return -1 if inversions % 2 else 1


def dx(chart: Chart, coord) -> KForm:
    i = coord if isinstance(coord, int) else chart.index(coord)
    return KForm(chart, 1, {(i,): 1})


def one_form(chart: Chart, coefficients: Dict[str, object]) -> KForm:
    return KForm(chart, 1, {(chart.index(c),): v for c, v in coefficients.items()})


def wedge(*forms: KForm) -> KForm:
    result = forms[0]
    for form in forms[1:]:
        result = result.wedge(form)
    return result


def exterior_derivative(a: KForm, fd_step: float = DEFAULT_FD_STEP) -> KForm:
    """d of a form, analytic where sympy can differentiate."""
    if a.degree >= a.chart.dim:
        raise DegreeError(f"d of a top-degree form on {a.chart.name}")
    comps: Dict[Index, object] = {}
    for I, value in a.components.items():
        for i in range(a.chart.dim):
            if i in I:
                continue
            sign, K = merge_sign((i,), I)
            comps[K] = comps.get(K, 0) + sign * partial(value, a.chart, i, fd_step)
    return KForm(a.chart, a.degree + 1, comps)


def d(a: KForm, fd_step: float = DEFAULT_FD_STEP) -> KForm:
    return exterior_derivative(a, fd_step)


def interior_product(X: VectorField, a: KForm) -> KForm:
    _require_same_chart(X, a)
    if a.degree == 0:
        return KForm(a.chart, 0)
    comps: Dict[Index, object] = {}
    for I, value in a.components.items():
        for m, i in enumerate(I):
            if X.components[i] == 0:
                continue
            rest = I[:m] + I[m + 1:]
            comps[rest] = comps.get(rest, 0) + (-1) ** m * X.components[i] * value
    return KForm(a.chart, a.degree - 1, comps)


def lie_derivative(X: VectorField, a: KForm, fd_step: float = DEFAULT_FD_STEP) -> KForm:
    """Cartan formula L_X a = d(ι_X a) + ι_X(da)."""
    if a.degree == 0:
        return KForm.function(a.chart, X.apply(a.scalar, fd_step))
    first = exterior_derivative(interior_product(X, a), fd_step)
    if a.degree == a.chart.dim:
        return first
    return first + interior_product(X, exterior_derivative(a, fd_step))


def pair(beta: KForm, X: VectorField):
    """β(X) for a 1-form β."""
    if beta.degree != 1:
        raise DegreeError("pair expects a 1-form")
    return sum((v * X.components[I[0]] for I, v in beta.components.items()), sp.Integer(0))


@dataclass
class FormValue:
    """A k-form evaluated at one point."""

    dim: int
    degree: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)

    @classmethod
    def from_components(cls, dim: int, degree: int, components: Dict[Index, complex]) -> "FormValue":
        lookup = {I: n for n, I in enumerate(basis(dim, degree))}
        values = np.zeros(len(lookup), dtype=complex if any(np.iscomplexobj(v) for v in components.values()) else float)
        for I, v in components.items():
            values[lookup[tuple(I)]] = v
        return cls(dim, degree, values)

    def component(self, idx: Index):
        return self.values[basis(self.dim, self.degree).index(tuple(idx))]

    def items(self):
        return zip(basis(self.dim, self.degree), self.values)

    def __add__(self, other: "FormValue") -> "FormValue":
        if self.degree != other.degree:
            raise DegreeError("Adding values of different degree")
        return FormValue(self.dim, self.degree, self.values + other.values)

    def __sub__(self, other: "FormValue") -> "FormValue":
        return self + other * -1

    def __mul__(self, scalar) -> "FormValue":
        return FormValue(self.dim, self.degree, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def wedge(self, other: "FormValue") -> "FormValue":
        degree = self.degree + other.degree
        if degree > self.dim:
            raise DegreeError(f"Wedge of degree {degree} exceeds dimension {self.dim}")
        out: Dict[Index, complex] = {}
        for I, a in self.items():
            if a == 0:
                continue
            for J, b in other.items():
                if b == 0:
                    continue
                sign, K = merge_sign(I, J)
                if sign:
                    out[K] = out.get(K, 0) + sign * a * b
        result = FormValue.from_components(self.dim, degree, out)
        return result

    def evaluate(self, vectors: Sequence[np.ndarray]):
        """a(v_1, ..., v_k) with dx^I(∂_I) = 1."""
        if len(vectors) != self.degree:
            raise DegreeError(f"A {self.degree}-form takes {self.degree} vectors")
        if self.degree == 0:
            return self.values[0]
        V = np.column_stack(vectors)
        return sum(a * np.linalg.det(V[list(I), :]) for I, a in self.items() if a != 0)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def top(self):
        """Coefficient of dx^1∧...∧dx^n for a top-degree value."""
        if self.degree != self.dim:
            raise DegreeError("top() needs a top-degree value")
        return self.values[0]


def metric_inverse(g: np.ndarray) -> Tuple[np.ndarray, float]:
    g = np.asarray(g, dtype=float)
    det = float(np.linalg.det(g))
    if not math.isfinite(det) or abs(det) < 1e-14 * max(1.0, float(np.max(np.abs(g)))) ** g.shape[0]:
        raise SingularMetricError(f"Metric determinant {det}")
    return np.linalg.inv(g), det


def _raised(a: FormValue, ginv: np.ndarray) -> FormValue:
    """a^I = Σ_J det(g^{-1}[I, J]) a_J."""
    if a.degree == 0:
        return a
    idx = basis(a.dim, a.degree)
    out = np.zeros(len(idx), dtype=a.values.dtype)
    for n, I in enumerate(idx):
        out[n] = sum(np.linalg.det(ginv[np.ix_(I, J)]) * aJ for J, aJ in zip(idx, a.values) if aJ != 0)
    return FormValue(a.dim, a.degree, out)


def inner_values(a: FormValue, b: FormValue, g: np.ndarray):
    """Pointwise ⟨a, b⟩ with the det-of-Gram convention."""
    if a.degree != b.degree:
        raise DegreeError("Inner product of forms of different degree")
    ginv, _ = metric_inverse(g)
    return np.sum(_raised(a, ginv).values * np.conj(b.values))


def hodge_values(a: FormValue, g: np.ndarray, orientation: int = 1) -> FormValue:
    """⋆a = orientation·√|det g|·Σ a^I ε(I, I^c) dx^{I^c}."""
    ginv, det = metric_inverse(g)
    raised = _raised(a, ginv)
    out: Dict[Index, complex] = {}
    full = tuple(range(a.dim))
    for I, value in raised.items():
        if value == 0:
            continue
        complement = tuple(i for i in full if i not in I)
        sign, _ = merge_sign(I, complement)
        out[complement] = out.get(complement, 0) + orientation * sign * math.sqrt(abs(det)) * value
    return FormValue.from_components(a.dim, a.dim - a.degree, out)


def complex_structure_matrix(g: np.ndarray, omega: FormValue, tol: float = 1e-10) -> np.ndarray:
    """J = g⁻¹ωᵀ, so that ω(X, Y) = g(JX, Y)."""
    if omega.degree != 2:
        raise DegreeError("complex_structure needs a 2-form")
    W = np.zeros((omega.dim, omega.dim))
    for (i, j), value in omega.items():
        W[i, j] = np.real(value)
        W[j, i] = -np.real(value)
    ginv, _ = metric_inverse(g)
    J = ginv @ W.T
    defect = float(np.max(np.abs(J @ J + np.eye(omega.dim))))
    if defect > tol:
        raise InconsistentStructureError(f"J² + I has size {defect:.3e}")
    return J


class MetricField:
    """Symmetric positive-definite metric with sympy entries."""

    def __init__(self, chart: Chart, matrix):
        self.chart = chart
        self.matrix = sp.Matrix(matrix)
        if self.matrix.shape != (chart.dim, chart.dim):
            raise ChartMismatchError(f"Metric of shape {self.matrix.shape} on {chart.name}")
        self._fn = None

    @classmethod
    def from_coframe(cls, chart: Chart, coframe: Sequence[KForm], weights: Sequence) -> "MetricField":
        """g = Σ w_A θ^A ⊗ θ^A."""
        rows = []
        for th in coframe:
            row = [0] * chart.dim
            for (i,), v in th.components.items():
                row[i] = v
            rows.append(row)
        E = sp.Matrix(rows)
        return cls(chart, E.T * sp.diag(*weights) * E)

    def _compiled(self):
        if self._fn is None:
            self._fn = compile_exprs(self.chart, list(self.matrix))
        return self._fn

    def values(self, points: np.ndarray) -> np.ndarray:
        """Metric matrices on an (n, dim) array of points, shape (n, dim, dim); no range check."""
        points = np.atleast_2d(points)
        n = self.chart.dim
        return evaluate_exprs(self._compiled(), points).astype(float).reshape(len(points), n, n)

    def at(self, point) -> np.ndarray:
        point = self.chart.validate(point)
        g = evaluate_exprs(self._compiled(), point)[0].astype(float).reshape(self.chart.dim, self.chart.dim)
        if not np.allclose(g, g.T, rtol=1e-12, atol=1e-12):
            raise SingularMetricError("Metric is not symmetric")
        return g

    def positive_definite(self, point) -> bool:
        return bool(np.all(np.linalg.eigvalsh(self.at(point)) > 0))

    def subs(self, mapping) -> "MetricField":
        return MetricField(self.chart, self.matrix.subs(mapping))


def form_inner(a: KForm, b: KForm, g: MetricField, p):
    _require_same_chart(a, b)
    return inner_values(a.at(p), b.at(p), g.at(p))


def form_norm(a: KForm, g: MetricField, p) -> float:
    return float(np.sqrt(np.abs(form_inner(a, a, g, p))))


def hodge_star(a: KForm, g: MetricField, p, orientation: int = 1) -> FormValue:
    return hodge_values(a.at(p), g.at(p), orientation)


def complex_structure(g: MetricField, om: KForm, p, tol: float = 1e-10) -> np.ndarray:
    return complex_structure_matrix(g.at(p), om.at(p), tol)


class Distribution:
    """Pointwise span of vector fields on a chart."""

    def __init__(self, chart: Chart, generators: Sequence[VectorField]):
        self.chart = chart
        self.generators = list(generators)

    @property
    def rank(self) -> int:
        return len(self.generators)

    def vectors_at(self, p, tol: float = 1e-12) -> List[np.ndarray]:
        vectors = [X.at(p) for X in self.generators]
        M = np.column_stack(vectors)
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= tol * max(1.0, s[0]):
            raise DependentGeneratorsError(f"Generators dependent at {np.round(p, 6).tolist()}")
        return vectors


def restrict_to_distribution(a: KForm, D: Distribution, p) -> FormValue:
    """Components of a on the generators of D, ordered by increasing tuples."""
    vectors = D.vectors_at(p)
    if a.degree > D.rank:
        return FormValue(D.rank, a.degree, np.zeros(0))
    value = a.at(p)
    out = {I: value.evaluate([vectors[i] for i in I]) for I in basis(D.rank, a.degree)}
    return FormValue.from_components(D.rank, a.degree, out)


class MatrixForm:
    """n×n matrix of forms (KForm or ComplexForm entries) of a common degree."""

    def __init__(self, entries: Sequence[Sequence[KForm]]):
        self.entries = [list(row) for row in entries]
        self.n = len(self.entries)
        first = self.entries[0][0]
        self.chart = first.chart
        self.degree = first.degree

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __add__(self, other: "MatrixForm") -> "MatrixForm":
        return MatrixForm([[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)])

    def wedge(self, other: "MatrixForm") -> "MatrixForm":
        """Matrix product with the wedge as multiplication."""
        n = self.n
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = self.entries[i][0].wedge(other.entries[0][j])
                for k in range(1, n):
                    acc = acc + self.entries[i][k].wedge(other.entries[k][j])
                row.append(acc)
            rows.append(row)
        return MatrixForm(rows)

    def map(self, func: Callable) -> "MatrixForm":
        return MatrixForm([[func(e) for e in row] for row in self.entries])


def matrix_curvature(A: MatrixForm, fd_step: float = DEFAULT_FD_STEP) -> MatrixForm:
    """F = dA + A∧A."""
    dA = A.map(lambda e: e.d(fd_step) if isinstance(e, ComplexForm) else exterior_derivative(e, fd_step))
    if A.n == 1:
        return dA
    return dA + A.wedge(A)


class Frame:
    """Coframe θ^A with dual vector fields E_A and the images θ^A∘J."""

    def __init__(self, chart: Chart, coframe: Sequence[KForm], dual: Sequence[VectorField],
                 j_images: Sequence[KForm]):
        if not (len(coframe) == len(dual) == len(j_images)):
            raise ChartMismatchError("Frame data of unequal length")
        self.chart = chart
        self.coframe = list(coframe)
        self.dual = list(dual)
        self.j_images = list(j_images)

    def duality_defect(self, p) -> float:
        """max |θ^A(E_B) − δ^A_B| at a point."""
        Theta = np.array([th.at(p).values for th in self.coframe], dtype=float)
        E = np.column_stack([X.at(p) for X in self.dual])
        return float(np.max(np.abs(Theta @ E - np.eye(len(self.dual)))))

    def apply_j(self, beta: KForm) -> KForm:
        """β∘J = Σ_A β(E_A)·(θ^A∘J)."""
        result = KForm(self.chart, 1)
        for E, image in zip(self.dual, self.j_images):
            coeff = pair(beta, E)
            if coeff != 0:
                result = result + image * coeff
        return result

    def dc(self, f, fd_step: float = DEFAULT_FD_STEP) -> KForm:
        """d^c f = df∘J."""
        return self.apply_j(exterior_derivative(KForm.function(self.chart, f), fd_step))

    def ddc(self, f, fd_step: float = DEFAULT_FD_STEP) -> KForm:
        return exterior_derivative(self.dc(f, fd_step), fd_step)


def involutivity_defect(generators: Sequence[VectorField], p, fd_step: float = DEFAULT_FD_STEP) -> float:
    """Smallest normalized singular value after appending all brackets to the span."""
    base = [X.at(p) for X in generators]
    brackets = [lie_bracket(X, Y, fd_step).at(p) for X, Y in itertools.combinations(generators, 2)]
    M = np.column_stack(base + brackets)
    s = np.linalg.svd(M, compute_uv=False)
    if len(s) <= len(base):
        return 0.0
    return float(s[len(base)] / max(1.0, s[0]))


class ComplexForm:
    """A complex form re + i·im kept as two real KForms."""

    def __init__(self, re: KForm, im: Optional[KForm] = None):
        im = im if im is not None else KForm(re.chart, re.degree)
        _require_same_chart(re, im)
        if re.degree != im.degree:
            raise DegreeError("Real and imaginary parts of different degree")
        self.re = re
        self.im = im
        self.chart = re.chart
        self.degree = re.degree

    def __add__(self, other: "ComplexForm") -> "ComplexForm":
        return ComplexForm(self.re + other.re, self.im + other.im)

    def __neg__(self) -> "ComplexForm":
        return ComplexForm(-self.re, -self.im)

    def __sub__(self, other: "ComplexForm") -> "ComplexForm":
        return self + (-other)

    def __mul__(self, scalar) -> "ComplexForm":
        return ComplexForm(self.re * scalar, self.im * scalar)

    __rmul__ = __mul__

    def times_complex(self, c_re, c_im) -> "ComplexForm":
        """(c_re + i·c_im)·self for real scalar expressions."""
        return ComplexForm(self.re * c_re - self.im * c_im, self.re * c_im + self.im * c_re)

    def wedge(self, other: "ComplexForm") -> "ComplexForm":
        return ComplexForm(self.re.wedge(other.re) - self.im.wedge(other.im),
                           self.re.wedge(other.im) + self.im.wedge(other.re))

    def conjugate(self) -> "ComplexForm":
        return ComplexForm(self.re, -self.im)

    def d(self, fd_step: float = DEFAULT_FD_STEP) -> "ComplexForm":
        return ComplexForm(exterior_derivative(self.re, fd_step), exterior_derivative(self.im, fd_step))

    def at(self, point) -> FormValue:
        re, im = self.re.at(point), self.im.at(point)
        return FormValue(self.chart.dim, self.degree, re.values + 1j * im.values)
