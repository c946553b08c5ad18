"""Self-checks run by ``dualif verify``.

Every check yields a row ``{check, model, max_error, pass}``; boolean checks
report ``max_error`` 0 on success and 1 on failure.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .catalog import CATALOG_NAMES, catalog_get
from .dual import NumericDual
from .errors import DivergentError, DualIFError
from .models import InputSignal, VoltageModel
from .quadrature import DEFAULT_SPEC, QuadratureSpec
from .rate import rate, rate_closed_form
from .sim import SimConfig, integrate_phase

DEFAULT_TOL = 1e-8
N_POINTS = 500
RATE_INPUTS = (0.1, 0.5, 1.0, 2.0, 5.0)

# catalog models whose f, integrated over the whole line, diverges on both sides
_NON_COMPACT = {"nif": ("plus", "minus"), "lif": ("plus", "minus")}


def _row(check: str, model: str, err: float, tol: float) -> dict:
    err = float(err)
    return {"check": check, "model": model, "max_error": err,
            "pass": bool(math.isfinite(err) and err <= tol)}


def interior_phases(y_minus: float, y_plus: float, n: int = N_POINTS) -> np.ndarray:
    return np.linspace(y_minus, y_plus, n + 2)[1:-1]


def _reciprocity(pair, ys) -> float:
    x = np.asarray(pair.h(ys, strict=False), dtype=float)
    with np.errstate(all="ignore"):
        f = np.asarray(pair.voltage.f(x, strict=False), dtype=float)
    g = np.asarray(pair.phase.g(ys), dtype=float)
    # (1 + f) (1 - g) = 1; at overflowing f the identity holds in the limit
    with np.errstate(all="ignore"):
        lhs = np.where(np.isinf(f), 1.0, (1.0 + f) * (1.0 - g))
    return float(np.max(np.abs(lhs - 1.0)))


def _numeric_vs_catalog(name: str, pair, ys, spec) -> float:
    v = pair.voltage
    dual = NumericDual(VoltageModel(v.f, v.x_plus, v.x_minus, name), spec)
    x = np.asarray(pair.h(ys), dtype=float)
    errs = [abs(dual.y_plus - pair.phase.y_plus), abs(dual.y_minus - pair.phase.y_minus),
            np.max(np.abs(dual.h_inv(x) - ys)),
            np.max(np.abs(dual.g(ys) - pair.phase.g(ys)))]
    return float(max(errs))


def _expsqrt_oracle(pair, ys) -> float:
    """Compare against y = 1 - (1 + s) exp(-s), g = 1 - exp(-s), s = sqrt(2|x|)."""
    x = np.asarray(pair.h(ys), dtype=float)
    s = np.sqrt(2.0 * np.abs(x))
    y_ref = np.sign(x) * -np.expm1(-s) - np.sign(x) * s * np.exp(-s)
    errs = [abs(pair.phase.y_plus - 1.0), abs(pair.phase.y_minus + 1.0),
            np.max(np.abs(y_ref - ys)),
            np.max(np.abs(pair.phase.g(ys) + np.expm1(-s)))]
    return float(max(errs))


def _divergent_sides(pair, spec) -> tuple[str, ...]:
    whole_line = VoltageModel(pair.voltage.f, math.inf, -math.inf, pair.voltage.name)
    try:
        NumericDual(whole_line, spec)
    except DivergentError as exc:
        return tuple(exc.sides)
    return ()


def check_model(name: str, tol: float = DEFAULT_TOL,
                spec: QuadratureSpec = DEFAULT_SPEC, simulate: bool = True) -> list[dict]:
    pair = catalog_get(name)
    phase = pair.phase
    ys = interior_phases(phase.y_minus, phase.y_plus)
    rows = []

    def run(check, fn):
        try:
            rows.append(_row(check, name, fn(), tol))
        except DualIFError as exc:
            rows.append({"check": check, "model": name, "max_error": math.inf,
                         "pass": False, "error": str(exc)})

    run("reciprocity", lambda: _reciprocity(pair, ys))
    run("h_inv inverts h",
        lambda: np.max(np.abs(np.asarray(pair.h_inv(pair.h(ys))) - ys)))
    if name == "expsqrt-if":
        run("numeric dual vs oracle", lambda: _expsqrt_oracle(pair, ys))
    elif name != "sqrt-if*":
        run("numeric dual vs closed form", lambda: _numeric_vs_catalog(name, pair, ys, spec))
    if phase.compactified:
        run("endpoint condition",
            lambda: max(abs(phase.g(phase.y_plus) - 1), abs(phase.g(phase.y_minus) - 1)))
    expected = _NON_COMPACT.get(name, ())
    run("non-compactifiable sides reported",
        lambda: 0.0 if _divergent_sides(pair, spec) == expected else 1.0)
    run("rate closed form vs quadrature",
        lambda: max(abs(rate(phase, I, spec) / rate_closed_form(name, I) - 1)
                    for I in RATE_INPUTS))
    if simulate:
        def unit_period():
            _, spikes = integrate_phase(phase, InputSignal.constant(1.0),
                                        SimConfig(3.5 * phase.period_length))
            if len(spikes) < 2:
                return math.inf
            return np.max(np.abs(spikes.intervals() - phase.period_length))

        run("unit-input period", unit_period)
    return rows


def run_checks(models: Iterable[str] | str = "all", tol: float = DEFAULT_TOL,
               spec: QuadratureSpec = DEFAULT_SPEC) -> list[dict]:
    names = CATALOG_NAMES if models == "all" else (
        (models,) if isinstance(models, str) else tuple(models))
    rows = []
    for name in names:
        rows.extend(check_model(catalog_get(name).phase.name, tol, spec))
    return rows
