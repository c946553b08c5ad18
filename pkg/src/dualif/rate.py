"""Spiking period, firing rate and F-I curves of phase models.

For constant input ``I`` the period is

    T(I) = integral_{y_minus}^{y_plus} dy / ((1 - I) g(y) + I)

and the rate is ``r(I) = 1 / T(I)``; ``r = 0`` for ``I < 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .catalog import CATALOG_NAMES, catalog_get
from .errors import InvalidExponent, NegativeInput, UnknownModel
from .models import NamedFn, PhaseModel
from .quadrature import DEFAULT_SPEC, QuadratureSpec, adaptive_quad, is_divergent

# |I - 1| below this uses the removable-singularity limit of the closed forms
UNIT_INPUT_WINDOW = 1e-8


def monomial_model(p: float) -> PhaseModel:
    """Phase model g(y) = |y|^p with thresholds y_pm = +-1."""
    if not p > 0:
        raise InvalidExponent(f"exponent must be positive, got {p}")
    return PhaseModel(NamedFn(lambda y: np.abs(y) ** p, f"abs(y)^{p:g}", "y"),
                      1.0, -1.0, True, f"monomial(p={p:g})")


def period_quadrature(model: PhaseModel, I: float,
                      spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Spiking period T(I); ``math.inf`` when the trajectory never completes a cycle.

    Each half-interval is integrated in s = sqrt|y|, which smooths the
    integrable singularity of power-law g at the origin when I = 0.
    """
    if I < 0:
        # (1 - I) g + I is negative at the origin: the trajectory rests below it
        return math.inf
    g = model.g
    total = 0.0
    for sign, bound in ((1.0, model.y_plus), (-1.0, model.y_minus)):
        top = math.sqrt(abs(bound))
        if top == 0:
            continue

        def integrand(s, sign=sign):
            y = sign * s * s
            with np.errstate(divide="ignore"):
                return 2.0 * s / ((1.0 - I) * g(y) + I)

        if I == 0:
            if is_divergent(lambda level: adaptive_quad(integrand, top / level, top, spec).value,
                            abs_tol=spec.abs_tol):
                return math.inf
        total += adaptive_quad(integrand, 0.0, top, spec).value
    return total


def rate(model: PhaseModel, I: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Firing rate 1/T(I) by quadrature; zero for negative input."""
    if I < 0:
        return 0.0
    T = period_quadrature(model, I, spec)
    return 0.0 if math.isinf(T) else 1.0 / T


# --------------------------------------------------------------------------
# Closed forms


def dilog(z: float) -> float:
    """Real dilogarithm Li2(z) for z <= 1."""
    if z > 1:
        raise ValueError("dilog is complex for z > 1")
    if z == 1:
        return math.pi ** 2 / 6
    if z == 0:
        return 0.0
    if z < -1:
        # inversion
        return -math.pi ** 2 / 6 - 0.5 * math.log(-z) ** 2 - dilog(1.0 / z)
    if z < -0.5:
        # Landen: z/(z-1) lies in (1/3, 1/2]
        return -dilog(z / (z - 1.0)) - 0.5 * math.log1p(-z) ** 2
    if z > 0.5:
        # reflection
        return math.pi ** 2 / 6 - math.log(z) * math.log1p(-z) - dilog(1.0 - z)
    total, term, k = 0.0, 1.0, 0
    while True:
        k += 1
        term *= z
        add = term / (k * k)
        total += add
        if abs(add) <= 1e-17 * abs(total):
            return total


def _unit_limit(name: str) -> float:
    pair = catalog_get(name)
    return 1.0 / pair.phase.period_length


def rate_closed_form(name: str, I: float) -> float:
    """Exact firing rate of a catalog model at constant input ``I >= 0``."""
    key = name.strip().lower()
    if key not in CATALOG_NAMES:
        raise UnknownModel(name)
    if I < 0:
        raise NegativeInput(f"closed-form rates need I >= 0, got {I}")
    if key == "nif":
        return I / 2
    if key == "qif":
        return math.sqrt(I) / math.pi
    if key == "lif":
        return 0.0 if I == 0 else 1.0 / (2.0 * math.log1p(1.0 / I))
    if abs(I - 1.0) < UNIT_INPUT_WINDOW:
        return _unit_limit(key)
    d = I - 1.0
    if key == "qif*":
        if I == 0:
            return 0.0
        if d > 0:
            return 0.5 * math.sqrt(d * I) / math.atanh(math.sqrt(d / I))
        return 0.5 * math.sqrt(I * -d) / math.atan(math.sqrt(-d / I))
    if key == "lif*":
        return 0.0 if I == 0 else 0.5 * d / math.log1p(d)
    if key == "sqrt-if*":
        if I == 0:
            return 0.25
        # 1 + I (log I - 1) written to avoid cancellation near I = 1
        denom = I * math.log1p(d) - d
        return 0.25 * d * d / denom
    if key == "lqif":
        if I == 0:
            return 0.0
        if d > 0:
            return 0.5 * math.sqrt(d) / math.atan(math.sqrt(d))
        return 0.5 * math.sqrt(-d) / math.atanh(math.sqrt(-d))
    # expsqrt-if
    return (1.0 - I) / (2.0 * dilog(1.0 - I))


def onset_rate_monomial(p: float) -> float:
    """Limit of r(I) as I -> 0+ for g = |y|^p with y_pm = +-1."""
    if not p > 0:
        raise InvalidExponent(f"exponent must be positive, got {p}")
    return (1.0 - p) / 2.0 if p < 1 else 0.0


# --------------------------------------------------------------------------
# F-I curves


@dataclass(frozen=True)
class FICurve:
    model: str
    method: str
    inputs: np.ndarray
    rates: np.ndarray

    def to_csv(self) -> str:
        lines = ["I,rate"]
        lines += [f"{i:.12g},{r:.12g}" for i, r in zip(self.inputs, self.rates)]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"model": self.model, "method": self.method,
                "I": [float(v) for v in self.inputs],
                "rate": [float(v) for v in self.rates]}


METHODS = ("quadrature", "closed_form")


def fi_curve(model: Union[PhaseModel, str], i_min: float, i_max: float, steps: int,
             method: str = "quadrature", spec: QuadratureSpec = DEFAULT_SPEC) -> FICurve:
    """Rates on the inclusive uniform grid ``linspace(i_min, i_max, steps)``."""
    if not i_min < i_max:
        raise ValueError("need i_min < i_max")
    if steps < 2:
        raise ValueError("need at least 2 grid points")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if isinstance(model, str):
        name = model.strip().lower()
        phase = catalog_get(name).phase
    else:
        name, phase = model.name, model
        if method == "closed_form" and name not in CATALOG_NAMES:
            raise UnknownModel(name)
    inputs = np.linspace(i_min, i_max, steps)
    if method == "closed_form":
        rates = [0.0 if I < 0 else rate_closed_form(name, float(I)) for I in inputs]
    else:
        rates = [rate(phase, float(I), spec) for I in inputs]
    return FICurve(name, method, inputs, np.array(rates))
