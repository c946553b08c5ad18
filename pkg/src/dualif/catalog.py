"""Built-in analytic models and their phase duals.

Each entry pairs a voltage dynamics ``f`` with its phase dual ``g`` and the
mapping ``x = h(y)``.  Two entries are only half analytic:

* ``sqrt-if*`` is defined by its phase dynamics ``g = sqrt|y|``; the voltage
  side is obtained by inverting the closed-form ``h`` numerically.
* ``expsqrt-if`` is defined by ``f = exp(sqrt(2|x|)) - 1``; its phase side is
  a :class:`~dualif.dual.NumericDual`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import UnknownModel
from .models import DualPair, NamedFn, PhaseModel, VoltageModel
from .roots import solve_increasing

INF = math.inf


@dataclass(frozen=True)
class _Entry:
    f: str
    f_fn: Callable
    g: str
    g_fn: Callable
    h: str
    h_fn: Callable
    h_inv: str
    h_inv_fn: Callable
    x_plus: float
    x_minus: float
    y_plus: float
    y_minus: float


def _sign(v):
    return np.sign(v)


_ANALYTIC = {
    "nif": _Entry(
        "0", lambda x: 0.0 * x,
        "0", lambda y: 0.0 * y,
        "y", lambda y: 1.0 * y,
        "x", lambda x: 1.0 * x,
        1.0, -1.0, 1.0, -1.0),
    "qif": _Entry(
        "x^2", lambda x: x ** 2,
        "sin(y)^2", lambda y: np.sin(y) ** 2,
        "tan(y)", np.tan,
        "atan(x)", np.arctan,
        INF, -INF, math.pi / 2, -math.pi / 2),
    "qif*": _Entry(
        "sinh(x)^2", lambda x: np.sinh(x) ** 2,
        "y^2", lambda y: y ** 2,
        "log((1 + y)/(1 - y))/2", np.arctanh,
        "tanh(x)", np.tanh,
        INF, -INF, 1.0, -1.0),
    "lif": _Entry(
        "abs(x)", np.abs,
        "1 - exp(-abs(y))", lambda y: -np.expm1(-np.abs(y)),
        "sign(y)*(exp(abs(y)) - 1)", lambda y: _sign(y) * np.expm1(np.abs(y)),
        "sign(x)*log(1 + abs(x))", lambda x: _sign(x) * np.log1p(np.abs(x)),
        1.0, -1.0, math.log(2), -math.log(2)),
    "lif*": _Entry(
        "exp(abs(x)) - 1", lambda x: np.exp(np.abs(x)) - 1,
        "abs(y)", np.abs,
        "-sign(y)*log(1 - abs(y))", lambda y: -_sign(y) * np.log1p(-np.abs(y)),
        "sign(x)*(1 - exp(-abs(x)))", lambda x: -_sign(x) * np.expm1(-np.abs(x)),
        INF, -INF, 1.0, -1.0),
    "lqif": _Entry(
        "2*abs(x) + x^2", lambda x: 2 * np.abs(x) + x ** 2,
        "2*abs(y) - y^2", lambda y: 2 * np.abs(y) - y ** 2,
        "y/(1 - abs(y))", lambda y: y / (1 - np.abs(y)),
        "x/(1 + abs(x))", lambda x: x / (1 + np.abs(x)),
        INF, -INF, 1.0, -1.0),
}

EXPSQRT_F = "exp(sqrt(2*abs(x))) - 1"

CATALOG_NAMES = ("nif", "qif", "qif*", "lif", "lif*", "lqif", "sqrt-if*", "expsqrt-if")

# Models whose phase dynamics is stated directly (rate formulas use y_pm = +-1).
PHASE_DEFINED = ("sqrt-if*",)


def _normalize(name: str) -> str:
    key = name.strip().lower()
    if key not in CATALOG_NAMES:
        raise UnknownModel(name)
    return key


def catalog_names() -> tuple[str, ...]:
    return CATALOG_NAMES


# --------------------------------------------------------------------------
# sqrt-if*: phase dynamics g = sqrt|y| on (-1, 1)
#
# With s = sqrt|y| and w = -log(1 - s) the mapping is
#   |x| = h(|y|) = -2 s - 2 log(1 - s) = 2 (w - 1 + exp(-w)),
# and f = g / (1 - g) = s / (1 - s) = exp(w) - 1.


_SERIES_W = 0.5
# w - 1 + exp(-w) = sum_{k>=2} (-w)^k / k!, truncated where the next term is < 1e-18 relative
_SERIES_COEFFS = np.array([(-1.0) ** k / math.factorial(k) for k in range(2, 17)])


def _w_excess(w):
    """w - 1 + exp(-w) without cancellation for small w."""
    w = np.asarray(w, dtype=float)
    small = w < _SERIES_W
    ws = np.where(small, w, 0.0)
    series = np.polynomial.polynomial.polyval(ws, np.concatenate([[0.0, 0.0], _SERIES_COEFFS]))
    return np.where(small, series, w + np.expm1(-w))


def _sqrt_if_h(y):
    w = -np.log1p(-np.sqrt(np.abs(y)))
    return 2.0 * _sign(y) * _w_excess(w)


def _sqrt_if_w(x):
    """Solve 2 (w - 1 + exp(-w)) = |x| for w >= 0."""
    x = np.asarray(x, dtype=float)
    u = np.abs(np.atleast_1d(x)).ravel()
    out = np.zeros_like(u)
    out[np.isinf(u)] = math.inf
    pos = (u > 0) & np.isfinite(u)
    if np.any(pos):
        half = 0.5 * u[pos]
        hi = half + 1.0
        out[pos] = solve_increasing(
            lambda w, idx: _w_excess(w),
            lambda w, idx: -np.expm1(-w),
            half, 0.0, hi, np.minimum(np.sqrt(u[pos]), hi),
            rtol=1e-15, atol=1e-300)
    return out.reshape(x.shape) if x.ndim else out[0]


def _sqrt_if_f(x):
    return np.expm1(_sqrt_if_w(x))


def _sqrt_if_h_inv(x):
    return _sign(x) * np.expm1(-_sqrt_if_w(x)) ** 2


# --------------------------------------------------------------------------


def catalog_get(name: str) -> DualPair:
    """Fully populated dual pair for a built-in model."""
    return _build(_normalize(name))


@lru_cache(maxsize=None)
def _build(key: str) -> DualPair:
    if key in _ANALYTIC:
        e = _ANALYTIC[key]
        voltage = VoltageModel(NamedFn(e.f_fn, e.f, "x"), e.x_plus, e.x_minus, key)
        compact = math.isinf(e.x_plus) and math.isinf(e.x_minus)
        phase = PhaseModel(NamedFn(e.g_fn, e.g, "y"), e.y_plus, e.y_minus, compact, key)
        return DualPair(voltage, phase, NamedFn(e.h_fn, e.h, "y"),
                        NamedFn(e.h_inv_fn, e.h_inv, "x"), "analytic-catalog")
    if key == "sqrt-if*":
        voltage = VoltageModel(NamedFn(_sqrt_if_f, "<numeric: g/(1-g) at y = h_inv(x)>", "x"),
                               INF, -INF, key)
        phase = PhaseModel(NamedFn(lambda y: np.sqrt(np.abs(y)), "sqrt(abs(y))", "y"),
                           1.0, -1.0, True, key)
        return DualPair(voltage, phase,
                        NamedFn(_sqrt_if_h, "-2*sign(y)*(sqrt(abs(y)) + log(1 - sqrt(abs(y))))", "y"),
                        NamedFn(_sqrt_if_h_inv, "<numeric inverse of h>", "x"),
                        "analytic-catalog")
    # expsqrt-if
    from .dual import NumericDual

    f = NamedFn(lambda x: np.exp(np.sqrt(2 * np.abs(x))) - 1, EXPSQRT_F, "x")
    dual = NumericDual(VoltageModel(f, INF, -INF, key))
    pair = dual.pair()
    return DualPair(pair.voltage, pair.phase, pair.h, pair.h_inv, "analytic-catalog")


def catalog_info(name: str) -> dict:
    """Display summary used by ``dualif catalog show``."""
    key = _normalize(name)
    pair = catalog_get(key)
    v, p = pair.voltage, pair.phase

    def ext(x):
        return "inf" if x == INF else "-inf" if x == -INF else x

    return {
        "name": key,
        "f": str(v.f),
        "g": str(p.g) if key != "expsqrt-if" else "<numeric: f(h(y))/(1+f(h(y)))>",
        "h": str(pair.h),
        "h_inv": str(pair.h_inv),
        "x_plus": ext(v.x_plus),
        "x_minus": ext(v.x_minus),
        "y_plus": p.y_plus,
        "y_minus": p.y_minus,
        "compactified": p.compactified,
    }
