"""
Special functions used by the instanton profiles.

Gauss hypergeometric series with exact polynomial detection, plus Bessel and
Airy evaluators from scipy.special. Each evaluator also has a sympy wrapper
carrying its derivative rule, so profiles built from them differentiate
analytically inside component expressions.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import sympy as sp
from scipy import special

from models import PrecisionWarning, SpecialFunctionDomainError

logger = logging.getLogger(__name__)

MAX_TERMS = 500
SERIES_RTOL = 1e-16
BESSEL_KINDS = ("I", "K", "J", "Y")
BESSEL_ORDERS = (2.0, 2.0 / 3.0)

_BESSEL = {
    "I": (special.iv, special.ivp),
    "K": (special.kv, special.kvp),
    "J": (special.jv, special.jvp),
    "Y": (special.yv, special.yvp),
}


def _nonpositive_integer(value: float, tol: float = 1e-12) -> Optional[int]:
    """Return n ≥ 0 if value == −n, else None."""
    value = float(value)
    nearest = round(value)
    if abs(value - nearest) <= tol and nearest <= 0:
        return int(-nearest)
    return None


@dataclass
class Hyp2F1Params:
    """Parameters (a, b; c) of ₂F₁, with the degree when the series terminates."""

    a: float
    b: float
    c: float
    polynomial_degree: Optional[int] = field(default=None, init=False)

    def __post_init__(self):
        degrees = [n for n in (_nonpositive_integer(self.a), _nonpositive_integer(self.b)) if n is not None]
        self.polynomial_degree = min(degrees) if degrees else None
        c_pole = _nonpositive_integer(self.c)
        if c_pole is not None and (self.polynomial_degree is None or self.polynomial_degree > c_pole):
            raise SpecialFunctionDomainError(
                f"c = {self.c} is a pole of the series before it terminates")

    @property
    def degenerate(self) -> bool:
        """a = c or b = c, where ₂F₁ reduces to (1 − z)^(−other)."""
        return math.isclose(self.a, self.c, abs_tol=1e-14) or math.isclose(self.b, self.c, abs_tol=1e-14)

    def shifted(self) -> "Hyp2F1Params":
        return Hyp2F1Params(self.a + 1, self.b + 1, self.c + 1)


def _hyp2f1_scalar(params: Hyp2F1Params, z: float) -> float:
    a, b, c = float(params.a), float(params.b), float(params.c)
    if params.polynomial_degree is not None:
        term, total = 1.0, 1.0
        for k in range(params.polynomial_degree):
            term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z
            total += term
        return total

    if params.degenerate:
        other = params.b if math.isclose(params.a, params.c, abs_tol=1e-14) else params.a
        if z == 1.0:
            raise SpecialFunctionDomainError("Degenerate ₂F₁ is singular at z = 1")
        return (1.0 - z) ** (-other)

    if abs(z) >= 1.0:
        raise SpecialFunctionDomainError(f"Non-terminating ₂F₁ evaluated at |z| = {abs(z)} ≥ 1")

    term, total = 1.0, 1.0
    for k in range(MAX_TERMS):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        total += term
        if abs(term) < SERIES_RTOL * abs(total):
            return total
    warnings.warn(f"₂F₁{(a, b, c)} at z = {z} hit {MAX_TERMS} terms", PrecisionWarning)
    return total


def hyp2f1(params: Hyp2F1Params, z):
    """
    Evaluate ₂F₁(a, b; c; z).

    Args:
        params: Series parameters
        z: Scalar or array argument

    Returns:
        Value with the shape of z

    Raises:
        SpecialFunctionDomainError: Non-terminating series with |z| ≥ 1
    """
    if np.ndim(z) == 0:
        return _hyp2f1_scalar(params, float(z))
    return np.vectorize(lambda v: _hyp2f1_scalar(params, float(v)), otypes=[float])(z)


def _check_bessel(kind: str, order: float, x) -> np.ndarray:
    if kind not in BESSEL_KINDS:
        raise SpecialFunctionDomainError(f"Unknown Bessel kind {kind}")
    if not any(math.isclose(order, o) for o in BESSEL_ORDERS):
        raise SpecialFunctionDomainError(f"Bessel order {order} is not supported")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise SpecialFunctionDomainError("Bessel functions need x > 0")
    return x


def bessel(kind: str, order: float, x):
    """Modified (I, K) or ordinary (J, Y) Bessel function of order 2 or 2/3."""
    x = _check_bessel(kind, order, x)
    return _BESSEL[kind][0](order, x)


def bessel_derivative(kind: str, order: float, x, n: int = 1):
    x = _check_bessel(kind, order, x)
    if n == 0:
        return _BESSEL[kind][0](order, x)
    return _BESSEL[kind][1](order, x, n)


def airy_ai(x):
    return special.airy(x)[0]


def airy_ai_prime(x):
    return special.airy(x)[1]


# sympy wrappers ------------------------------------------------------------

_registry: Dict[Tuple, type] = {}


def _special_function(key: Tuple, impl: Callable, derivative: Optional[Callable] = None) -> type:
    """One sympy Function class per key; numeric values come from ``impl``."""
    if key not in _registry:
        name = f"{key[0]}_{len(_registry)}"
        namespace = {"_imp_": staticmethod(impl), "nargs": 1}
        if derivative is not None:
            namespace["fdiff"] = lambda self, argindex=1: derivative(self.args[0])
        _registry[key] = type(name, (sp.Function,), namespace)
    return _registry[key]


def hyp2f1_expr(params: Hyp2F1Params, z):
    """₂F₁(a, b; c; z) inside a sympy expression."""
    if params.polynomial_degree is not None:
        a, b, c = (sp.nsimplify(v) for v in (params.a, params.b, params.c))
        term, total = sp.Integer(1), sp.Integer(1)
        for k in range(params.polynomial_degree):
            term = term * (a + k) * (b + k) / ((c + k) * (k + 1)) * z
            total += term
        return total
    if params.degenerate:
        other = params.b if math.isclose(params.a, params.c, abs_tol=1e-14) else params.a
        return (1 - z) ** (-sp.nsimplify(other))

    key = ("hyp2f1", params.a, params.b, params.c)
    factor = sp.Float(params.a * params.b / params.c)
    cls = _special_function(key, lambda v, p=params: hyp2f1(p, v),
                            lambda arg, p=params, f=factor: f * hyp2f1_expr(p.shifted(), arg))
    return cls(z)


def bessel_expr(kind: str, order: float, x, n: int = 0):
    """n-th derivative of a Bessel function inside a sympy expression."""
    key = ("bessel" + kind, float(order), n)
    cls = _special_function(key, lambda v, k=kind, o=order, m=n: bessel_derivative(k, o, v, m),
                            lambda arg, k=kind, o=order, m=n: bessel_expr(k, o, arg, m + 1))
    return cls(x)


def airy_expr(x, derivative: bool = False):
    """Ai(x) or Ai'(x) inside a sympy expression; Ai'' = x·Ai."""
    if derivative:
        cls = _special_function(("airyaiprime",), airy_ai_prime, lambda arg: arg * airy_expr(arg))
    else:
        cls = _special_function(("airyai",), airy_ai, lambda arg: airy_expr(arg, derivative=True))
    return cls(x)
