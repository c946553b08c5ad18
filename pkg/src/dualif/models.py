"""Voltage and phase representations of integrate-and-fire models.

A voltage model integrates ``dx/dt = f(x) + I`` until ``x`` hits the
threshold ``x_plus`` and is then reset to ``x_minus``.  Its phase dual
integrates ``dy/dt = (1 - I) g(y) + I`` between ``y_minus`` and ``y_plus``.
Infinite thresholds are plain ``math.inf`` floats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ExprError, InvalidModel, ValidationError
from .expr import DynamicsExpr, parse


@dataclass(frozen=True)
class NamedFn:
    """A vectorized callable paired with a human-readable formula."""

    fn: Callable
    source: str
    var_name: str = "x"

    def __call__(self, value, strict: bool = True):
        if isinstance(value, float):
            with np.errstate(all="ignore"):
                out = float(self.fn(value))
            if out != out or (strict and not math.isfinite(out)):
                raise DomainError(f"{self.source}: non-finite result")
            return out
        v = np.asarray(value, dtype=float)
        with np.errstate(all="ignore"):
            out = np.asarray(self.fn(v), dtype=float)
        if np.any(np.isnan(out)) or (strict and not np.all(np.isfinite(out))):
            raise DomainError(f"{self.source}: non-finite result")
        if v.ndim == 0:
            return float(out)
        return np.broadcast_to(out, v.shape).copy()

    def __str__(self) -> str:
        return self.source


def as_dynamics(fn, var_name: str):
    """Accept expression text, a parsed expression, or a NamedFn."""
    if isinstance(fn, str):
        return parse(fn, var_name)
    if isinstance(fn, (DynamicsExpr, NamedFn)):
        return fn
    if callable(fn):
        return NamedFn(fn, getattr(fn, "__name__", "<callable>"), var_name)
    raise TypeError(f"cannot use {fn!r} as a dynamics function")


def parse_extended(text) -> float:
    """Parse a threshold that may be ``inf``/``-inf``."""
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    value = float(t)
    if math.isnan(value):
        raise ValueError("threshold may not be NaN")
    return value


def _fmt_extended(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass(frozen=True)
class VoltageModel:
    f: object
    x_plus: float
    x_minus: float
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "f", as_dynamics(self.f, "x"))
        object.__setattr__(self, "x_plus", parse_extended(self.x_plus))
        object.__setattr__(self, "x_minus", parse_extended(self.x_minus))

    @property
    def infinite_sides(self) -> tuple[str, ...]:
        sides = []
        if math.isinf(self.x_plus):
            sides.append("plus")
        if math.isinf(self.x_minus):
            sides.append("minus")
        return tuple(sides)

    def f_tilde(self, x, strict: bool = True):
        """Representative dynamics under unit input, ``f + 1``."""
        return self.f(x, strict=strict) + 1.0

    def to_json(self) -> dict:
        return {"name": self.name, "repr": "voltage", "fn": str(self.f),
                "threshold": _fmt_extended(self.x_plus),
                "reset": _fmt_extended(self.x_minus)}


@dataclass(frozen=True)
class PhaseModel:
    g: object
    y_plus: float
    y_minus: float
    compactified: bool = False
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "g", as_dynamics(self.g, "y"))
        if not (math.isfinite(self.y_plus) and math.isfinite(self.y_minus)):
            raise InvalidModel("phase thresholds must be finite")
        if not self.y_minus < 0 <= self.y_plus:
            raise InvalidModel("phase thresholds must satisfy y_minus < 0 <= y_plus")

    @property
    def period_length(self) -> float:
        return self.y_plus - self.y_minus

    def g_ext(self, y):
        """g continued beyond [y_minus, y_plus]; periodic when compactified."""
        if self.compactified and isinstance(y, float):
            if not self.y_minus <= y <= self.y_plus:
                y = self.y_minus + (y - self.y_minus) % self.period_length
        elif self.compactified:
            y = np.asarray(y, dtype=float)
            outside = (y > self.y_plus) | (y < self.y_minus)
            if np.any(outside):
                y = np.where(outside,
                             self.y_minus + np.mod(y - self.y_minus, self.period_length),
                             y)
            if y.ndim == 0:
                y = float(y)
        return self.g(y)

    def to_json(self) -> dict:
        return {"name": self.name, "repr": "phase", "fn": str(self.g),
                "threshold": self.y_plus, "reset": self.y_minus}


@dataclass(frozen=True)
class DualPair:
    voltage: VoltageModel
    phase: PhaseModel
    h: Callable
    h_inv: Callable
    source: str = "analytic-catalog"


def model_from_json(data) -> "VoltageModel | PhaseModel":
    if isinstance(data, str):
        data = json.loads(data)
    kind = data.get("repr")
    name = data.get("name", "custom")
    if kind == "voltage":
        return VoltageModel(data["fn"], data.get("threshold", math.inf),
                            data.get("reset", -math.inf), name)
    if kind == "phase":
        g = parse(data["fn"], "y")
        yp, ym = float(data["threshold"]), float(data["reset"])
        try:
            compact = abs(g(yp) - 1) <= 1e-9 and abs(g(ym) - 1) <= 1e-9
        except ExprError:
            compact = False
        return PhaseModel(g, yp, ym, compact, name)
    raise ValueError(f"unknown model repr {kind!r}")


# --------------------------------------------------------------------------
# Inputs


@dataclass(frozen=True)
class InputSignal:
    """Net input I(t): constant, a single step, or an expression in ``t``."""

    kind: str
    value: float = 0.0
    value_after: float = 0.0
    t_switch: float = 0.0
    expr: Optional[DynamicsExpr] = None

    @classmethod
    def constant(cls, value: float) -> "InputSignal":
        return cls("constant", float(value))

    @classmethod
    def step(cls, before: float, after: float, t_switch: float) -> "InputSignal":
        return cls("step", float(before), float(after), float(t_switch))

    @classmethod
    def expression(cls, expr) -> "InputSignal":
        if isinstance(expr, str):
            expr = parse(expr, "t")
        return cls("expression", expr=expr)

    @classmethod
    def from_spec(cls, text: str) -> "InputSignal":
        """Parse ``const:<v>``, ``step:<v0>,<v1>,<t>`` or ``expr:<expression in t>``."""
        kind, sep, rest = text.partition(":")
        if not sep:
            raise ValueError(f"bad signal spec {text!r}")
        if kind == "const":
            return cls.constant(float(rest))
        if kind == "step":
            parts = rest.split(",")
            if len(parts) != 3:
                raise ValueError(f"step signal needs 3 values, got {rest!r}")
            return cls.step(*map(float, parts))
        if kind == "expr":
            return cls.expression(rest)
        raise ValueError(f"unknown signal kind {kind!r}")

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (self.t_switch,) if self.kind == "step" else ()

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "step":
            return self.value if t < self.t_switch else self.value_after
        return self.expr(t)

    def left(self, t: float) -> float:
        """Left limit I(t-), used at the end of an integration substep."""
        if self.kind == "step":
            return self.value if t <= self.t_switch else self.value_after
        return self(t)

    def spec(self) -> str:
        if self.kind == "constant":
            return f"const:{self.value!r}"
        if self.kind == "step":
            return f"step:{self.value!r},{self.value_after!r},{self.t_switch!r}"
        return f"expr:{self.expr.source}"


# --------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    invariant: str
    at: float
    value: float
    message: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, invariant, at, value, message):
        self.violations.append(Violation(invariant, float(at), float(value), message))

    def raise_if_invalid(self):
        if self.violations:
            raise ValidationError(self)


GRID_CLAMP = 50.0


def _grid(lo: float, hi: float, n: int) -> np.ndarray:
    lo = max(lo, -GRID_CLAMP)
    hi = min(hi, GRID_CLAMP)
    pts = np.linspace(lo, hi, n)
    return np.union1d(pts, [0.0]) if lo <= 0 <= hi else pts


def validate_voltage(model: VoltageModel, n_points: int = 2001,
                     zero_tol: float = 1e-12) -> ValidationReport:
    """Check the normalized form: f(0) = 0, f >= 0, f finite, x_minus < 0 <= x_plus."""
    if n_points < 1000:
        raise ValueError("validation grid needs at least 1000 points")
    report = ValidationReport()
    if not model.x_minus < 0 <= model.x_plus:
        report.add("thresholds", model.x_minus, model.x_plus,
                   f"need x_minus < 0 <= x_plus, got ({model.x_minus}, {model.x_plus})")
    xs = _grid(min(model.x_minus, -1.0), max(model.x_plus, 1.0), n_points)
    try:
        fx = np.asarray(model.f(xs, strict=False), dtype=float)
    except ExprError as exc:
        fx = np.array([_safe_eval(model.f, x) for x in xs])
        bad = ~np.isfinite(fx)
        report.add("finite", xs[np.argmax(bad)], np.nan, f"f not finite: {exc}")
    else:
        bad = ~np.isfinite(fx)
        if np.any(bad):
            i = int(np.argmax(bad))
            report.add("finite", xs[i], fx[i], f"f not finite at x={xs[i]:g}")
    f0 = _safe_eval(model.f, 0.0)
    if not abs(f0) <= zero_tol:
        report.add("f(0)=0", 0.0, f0, f"f(0) = {f0:g}, expected 0")
    finite = np.isfinite(fx)
    if np.any(fx[finite] < -zero_tol):
        i = int(np.argmin(np.where(finite, fx, np.inf)))
        report.add("f>=0", xs[i], fx[i], f"f({xs[i]:g}) = {fx[i]:g} < 0")
    return report


def validate_phase(model: PhaseModel, n_points: int = 2001,
                   tol: float = 1e-9) -> ValidationReport:
    """Check 0 <= g <= 1 on [y_minus, y_plus], g(0) = 0, endpoint condition."""
    report = ValidationReport()
    ys = _grid(model.y_minus, model.y_plus, n_points)
    gy = np.array([_safe_eval(model.g, y) for y in ys])
    g0 = _safe_eval(model.g, 0.0)
    if not abs(g0) <= tol:
        report.add("g(0)=0", 0.0, g0, f"g(0) = {g0:g}, expected 0")
    finite = np.isfinite(gy)
    if not np.all(finite):
        i = int(np.argmax(~finite))
        report.add("finite", ys[i], gy[i], f"g not finite at y={ys[i]:g}")
    low = finite & (gy < -tol)
    high = finite & (gy > 1 + tol)
    if np.any(low):
        i = int(np.argmax(low))
        report.add("g>=0", ys[i], gy[i], f"g({ys[i]:g}) = {gy[i]:g} < 0")
    if np.any(high):
        i = int(np.argmax(high))
        report.add("g<=1", ys[i], gy[i], f"g({ys[i]:g}) = {gy[i]:g} > 1")
    if model.compactified:
        for y in (model.y_minus, model.y_plus):
            gv = _safe_eval(model.g, y)
            if not abs(gv - 1) <= tol:
                report.add("g(y_pm)=1", y, gv, f"g({y:g}) = {gv:g}, expected 1")
    return report


def _safe_eval(fn, x: float) -> float:
    try:
        return float(fn(x, strict=False))
    except ExprError:
        return math.nan
