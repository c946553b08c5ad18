"""Numerical construction of the phase dual of a voltage model.

The phase of a voltage state is the time the unit-input dynamics
``dx/dy = f(x) + 1`` needs to travel from the origin to ``x``::

    h_inv(x) = integral_0^x du / (1 + f(u))

and ``h`` is its inverse.  Both are built here from quadrature and monotone
root finding; the phase dynamics function then follows as
``g(y) = f(h(y)) / (1 + f(h(y)))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DivergentError, QuadratureFailure, RangeError, ConvergenceFailure
from .models import DualPair, NamedFn, PhaseModel, VoltageModel
from .quadrature import DEFAULT_SPEC, QuadratureSpec, gk15, improper_integral, quad_to
from .roots import solve_increasing

TABLE_TOP = 2.0 ** 40
_MAX_TABLE_NODES = 200_000


def _reciprocal(model: VoltageModel, sign: float):
    """u -> 1 / (1 + f(sign * u)) for u >= 0; overflowing f gives 0."""

    def phi(u):
        with np.errstate(all="ignore"):
            return 1.0 / (model.f(sign * np.asarray(u, dtype=float), strict=False) + 1.0)

    return phi


def _side_name(sign: float) -> str:
    return "plus" if sign > 0 else "minus"


# --------------------------------------------------------------------------
# Direct quadrature routes


def h_inverse(model: VoltageModel, x: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Phase of the voltage ``x``: integral of 1/(1 + f) from 0 to x."""
    if x == 0:
        return 0.0
    sign = 1.0 if x > 0 else -1.0
    return sign * quad_to(_reciprocal(model, sign), 0.0, abs(x), spec)


def phase_threshold(model: VoltageModel, side: str,
                    spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Phase of the threshold (``side="plus"``) or reset (``"minus"``).

    Infinite bounds give an improper integral; :class:`DivergentError` is
    raised when it does not converge (the side cannot be compactified).
    """
    if side not in ("plus", "minus"):
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    bound = model.x_plus if side == "plus" else model.x_minus
    if math.isfinite(bound):
        return h_inverse(model, bound, spec)
    sign = 1.0 if side == "plus" else -1.0
    return sign * improper_integral(_reciprocal(model, sign), spec, side)


def legendre_potential(model: VoltageModel, x: float,
                       spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Convex potential H with H' = h_inv and H'' = 1/(1 + f).

    Integration by parts turns the double integral into a single one:
    H(x) = x h_inv(x) - integral_0^x u / (1 + f(u)) du.
    """
    if x == 0:
        return 0.0
    sign = 1.0 if x > 0 else -1.0
    phi = _reciprocal(model, sign)
    moment = quad_to(lambda u: u * phi(u), 0.0, abs(x), spec)
    return x * h_inverse(model, x, spec) - moment


# --------------------------------------------------------------------------
# Tabulated dual


@dataclass(frozen=True, eq=False)
class _Side:
    sign: float
    u: np.ndarray        # |x| nodes, u[0] = 0
    y: np.ndarray        # |h_inv| at the nodes
    limit: Optional[float]   # |h_inv(sign * inf)| when finite

    def phi(self, model):
        return _reciprocal(model, self.sign)


def _tabulate(phi, spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative integral of ``phi`` on nodes refined until each panel is
    resolved by a single Kronrod rule."""
    abs_tol = 1e-3 * spec.abs_tol
    rel_tol = 1e-3 * spec.rel_tol
    edges = np.concatenate([[0.0], 2.0 ** np.arange(-4, 41)])
    a, b = edges[:-1], edges[1:]
    done_a, done_b, done_k = [], [], []
    for _ in range(64):
        k, g = gk15(phi, a, b)
        mid = 0.5 * (a + b)
        ok = (np.abs(k - g) <= np.maximum(abs_tol, rel_tol * np.abs(k)))
        ok |= ~((a < mid) & (mid < b))
        done_a.append(a[ok]), done_b.append(b[ok]), done_k.append(k[ok])
        a, b, mid = a[~ok], b[~ok], mid[~ok]
        if a.size == 0:
            break
        if sum(x.size for x in done_a) + 2 * a.size > _MAX_TABLE_NODES:
            raise QuadratureFailure("dual table refinement exceeded node budget")
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
    else:
        raise QuadratureFailure("dual table refinement did not converge")
    a, b, k = (np.concatenate(v) for v in (done_a, done_b, done_k))
    order = np.argsort(a)
    u = np.concatenate([[0.0], b[order]])
    y = np.concatenate([[0.0], np.cumsum(k[order])])
    # drop nodes once y saturates in floating point; the tail is integrated on demand
    flat = np.nonzero(np.diff(y) <= 0)[0]
    if flat.size:
        u, y = u[:flat[0] + 1], y[:flat[0] + 1]
    return u, y


_LOOKUP_CELLS = 2048
_LOOKUP_TOL = 1e-11


def _cubic_weights(t):
    """Lagrange weights for nodes at 0, 1, 2, 3."""
    return (-(t - 1) * (t - 2) * (t - 3) / 6, t * (t - 2) * (t - 3) / 2,
            -t * (t - 1) * (t - 3) / 2, t * (t - 1) * (t - 2) / 6)


class _GLookup:
    """Cubic interpolation of g in s = sqrt|y| on each half-interval.

    Power-law behaviour of g at the origin is smooth in s.  Every cell is
    certified against the exact g at its midpoint; calls landing in cells
    that fail return None so the caller falls back to the exact evaluation.
    """

    def __init__(self, exact_g, y_minus: float, y_plus: float, cells: int = _LOOKUP_CELLS):
        self.cells = cells
        self.sides = {}
        for sign, bound in ((1.0, y_plus), (-1.0, y_minus)):
            top = math.sqrt(abs(bound))
            if top == 0:
                continue
            s = np.linspace(0.0, top, cells + 1)
            nodes = np.asarray(exact_g(sign * s * s), dtype=float)
            mids = 0.5 * (s[:-1] + s[1:])
            exact_mid = np.asarray(exact_g(sign * mids * mids), dtype=float)
            start = np.clip(np.arange(cells) - 1, 0, cells - 3)
            w = _cubic_weights(mids / (top / cells) - start)
            approx = sum(wk * nodes[start + k] for k, wk in enumerate(w))
            ok = np.abs(approx - exact_mid) <= _LOOKUP_TOL
            self.sides[sign] = (abs(bound), top / cells, nodes.tolist(), ok.tolist())

    def __call__(self, y: float) -> Optional[float]:
        side = self.sides.get(1.0 if y >= 0 else -1.0)
        if side is None:
            return None
        bound, ds, nodes, ok = side
        a = abs(y)
        if a > bound:
            return None
        pos = math.sqrt(a) / ds
        j = min(int(pos), self.cells - 1)
        if not ok[j]:
            return None
        i0 = min(max(j - 1, 0), self.cells - 3)
        w0, w1, w2, w3 = _cubic_weights(pos - i0)
        return w0 * nodes[i0] + w1 * nodes[i0 + 1] + w2 * nodes[i0 + 2] + w3 * nodes[i0 + 3]


class NumericDual:
    """Phase dual of a voltage model built by quadrature and monotone inversion.

    Immutable once constructed; evaluation methods accept scalars or arrays.
    """

    def __init__(self, model: VoltageModel, spec: QuadratureSpec = DEFAULT_SPEC):
        self.model = model
        self.spec = spec
        sides, divergent = {}, []
        for sign in (1.0, -1.0):
            name = _side_name(sign)
            phi = _reciprocal(model, sign)
            u, y = _tabulate(phi, spec)
            limit = None
            if name in model.infinite_sides:
                try:
                    phase_threshold(model, name, spec)
                except DivergentError:
                    divergent.append(name)
                else:
                    # the table already holds all but a negligible tail
                    limit = float(y[-1] + quad_to(phi, u[-1], math.inf, spec))
            sides[name] = _Side(sign, u, y, limit)
        if divergent:
            raise DivergentError(divergent)
        self._plus, self._minus = sides["plus"], sides["minus"]
        self.y_plus = self._bound(self._plus, model.x_plus)
        self.y_minus = self._bound(self._minus, model.x_minus)
        self._lookup: Optional[_GLookup] = None

    def _bound(self, side: _Side, x: float) -> float:
        if math.isinf(x):
            return float(side.sign * side.limit)
        return float(side.sign * self._forward_side(side, np.array([abs(x)]))[0])

    @property
    def compact_plus(self) -> bool:
        return self._plus.limit is not None

    @property
    def compact_minus(self) -> bool:
        return self._minus.limit is not None

    @property
    def compactified(self) -> bool:
        return self.compact_plus and self.compact_minus

    @property
    def table(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted (x, y) nodes of the h_inv table over both half-lines."""
        xs = np.concatenate([-self._minus.u[:0:-1], self._plus.u])
        ys = np.concatenate([-self._minus.y[:0:-1], self._plus.y])
        return xs, ys

    # -- h_inv ------------------------------------------------------------

    def _forward_side(self, side: _Side, u: np.ndarray) -> np.ndarray:
        """|h_inv| at |x| = u >= 0 on one half-line."""
        phi = side.phi(self.model)
        out = np.empty_like(u)
        inside = u <= side.u[-1]
        if np.any(inside):
            ui = u[inside]
            k = np.clip(np.searchsorted(side.u, ui, side="right") - 1, 0, len(side.u) - 2)
            out[inside] = side.y[k] + gk15(phi, side.u[k], ui)[0]
        for i in np.nonzero(~inside)[0]:
            if math.isinf(u[i]):
                out[i] = side.limit if side.limit is not None else math.inf
            else:
                out[i] = side.y[-1] + quad_to(phi, side.u[-1], u[i], self.spec)
        return out

    def h_inv(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        out = np.empty_like(flat)
        for side, mask in ((self._plus, flat >= 0), (self._minus, flat < 0)):
            if np.any(mask):
                out[mask] = side.sign * self._forward_side(side, np.abs(flat[mask]))
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    # -- h ----------------------------------------------------------------

    def _inverse_side(self, side: _Side, v: np.ndarray) -> np.ndarray:
        """|x| such that |h_inv(x)| = v on one half-line."""
        phi = side.phi(self.model)
        out = np.empty_like(v)
        inside = v <= side.y[-1]
        if np.any(inside):
            vi = v[inside]
            k = np.clip(np.searchsorted(side.y, vi, side="right") - 1, 0, len(side.y) - 2)
            lo, hi = side.u[k], side.u[k + 1]
            width = side.y[k + 1] - side.y[k]
            x0 = lo + np.where(width > 0, (vi - side.y[k]) / np.where(width > 0, width, 1), 0) * (hi - lo)

            def fun(uu, idx):
                return side.y[k[idx]] + gk15(phi, side.u[k[idx]], uu)[0]

            out[inside] = solve_increasing(fun, lambda uu, idx: phi(uu), vi, lo, hi, x0,
                                           atol=1e-300)
        for i in np.nonzero(~inside)[0]:
            out[i] = self._inverse_tail(side, float(v[i]))
        return out

    def _inverse_tail(self, side: _Side, v: float) -> float:
        if side.limit is not None and v >= side.limit:
            if v == side.limit:
                return math.inf
            raise RangeError(f"phase {side.sign * v} beyond the compactified endpoint")
        phi = side.phi(self.model)
        base_u, base_y = side.u[-1], side.y[-1]
        lo, hi = base_u, 2.0 * base_u
        while base_y + quad_to(phi, base_u, hi, self.spec) < v:
            lo, hi = hi, hi * 1e3
            if hi > 1e300:
                raise ConvergenceFailure(f"cannot invert phase {side.sign * v}")

        def fun(uu, idx):
            return np.array([base_y + quad_to(phi, base_u, w, self.spec) for w in uu])

        return float(solve_increasing(fun, lambda uu, idx: phi(uu), np.array([v]),
                                      lo, hi, rtol=1e-13)[0])

    def h(self, y):
        y = np.asarray(y, dtype=float)
        flat = np.atleast_1d(y).ravel()
        out = np.empty_like(flat)
        for side, mask in ((self._plus, flat >= 0), (self._minus, flat < 0)):
            if np.any(mask):
                out[mask] = side.sign * self._inverse_side(side, np.abs(flat[mask]))
        return float(out[0]) if y.ndim == 0 else out.reshape(y.shape)

    # -- g ----------------------------------------------------------------

    def _at_endpoint(self, y: np.ndarray) -> np.ndarray:
        mask = np.zeros(y.shape, dtype=bool)
        if self._plus.limit is not None:
            mask |= y >= self._plus.limit
        if self._minus.limit is not None:
            mask |= y <= -self._minus.limit
        return mask

    def g(self, y):
        """Phase dynamics at ``y``.

        Scalar float calls (the simulation inner loop) go through a certified
        interpolation table built on first use; arrays are always evaluated exactly.
        """
        if isinstance(y, float):
            if self._lookup is None:
                self._lookup = _GLookup(self._g_exact, self.y_minus, self.y_plus)
            v = self._lookup(y)
            if v is not None:
                return v
        return self._g_exact(y)

    def _g_exact(self, y):
        y = np.asarray(y, dtype=float)
        flat = np.atleast_1d(y).ravel()
        out = np.ones_like(flat)
        interior = ~self._at_endpoint(flat)
        if np.any(interior):
            x = self.h(flat[interior])
            with np.errstate(all="ignore"):
                fx = self.model.f(x, strict=False)
                out[interior] = np.where(np.isinf(fx), 1.0, fx / (1.0 + fx))
        return float(out[0]) if y.ndim == 0 else out.reshape(y.shape)

    # -- views ------------------------------------------------------------

    def phase_model(self) -> PhaseModel:
        return PhaseModel(NamedFn(self.g, f"<numeric dual of {self.model.f}>", "y"),
                          self.y_plus, self.y_minus, self.compactified,
                          self.model.name)

    def pair(self) -> DualPair:
        return DualPair(self.model, self.phase_model(),
                        NamedFn(self.h, "<numeric h>", "y"),
                        NamedFn(self.h_inv, "<numeric h_inv>", "x"),
                        source="numeric")

    def export(self, samples: int = 257) -> dict:
        """JSON-ready samples ``[y, x, g]`` on interior phases."""
        if samples < 256:
            raise ValueError("export needs at least 256 samples")
        ys = np.linspace(self.y_minus, self.y_plus, samples + 2)[1:-1]
        xs = self.h(ys)
        gs = self.g(ys)
        return {"y_plus": self.y_plus, "y_minus": self.y_minus,
                "samples": [[float(a), float(b), float(c)] for a, b, c in zip(ys, xs, gs)]}


def build_dual(model: VoltageModel, spec: QuadratureSpec = DEFAULT_SPEC) -> NumericDual:
    return NumericDual(model, spec)


def h_forward(dual: NumericDual, y: float, spec: Optional[QuadratureSpec] = None) -> float:
    """Voltage ``x = h(y)`` with ``h_inverse(x) = y`` to within 1e-12."""
    if not dual.y_minus <= y <= dual.y_plus:
        raise RangeError(f"phase {y} outside [{dual.y_minus}, {dual.y_plus}]")
    return dual.h(y)


def dual_g(model: VoltageModel, dual: NumericDual, y: float) -> float:
    """Phase dynamics g(y) = f(h(y)) / (1 + f(h(y))); exactly 1 at compactified ends."""
    if dual.model is not model and dual.model != model:
        raise ValueError("dual was built from a different model")
    return dual.g(y)


def dg_dy_check(model: VoltageModel, dual: NumericDual, y: float,
                fd_step: float = 1e-5) -> tuple[float, float]:
    """Finite-difference sides of dg/dy = (df/dx) / (1 + f) at x = h(y)."""
    if not 1e-7 <= fd_step <= 1e-4:
        raise ValueError("fd_step must lie in [1e-7, 1e-4]")
    lhs = (dual.g(y + fd_step) - dual.g(y - fd_step)) / (2 * fd_step)
    x = dual.h(y)
    hx = fd_step * max(1.0, abs(x))
    f = model.f
    dfdx = (f(x + hx) - f(x - hx)) / (2 * hx)
    return float(lhs), float(dfdx / (1.0 + f(x)))
