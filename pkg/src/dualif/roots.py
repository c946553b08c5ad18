"""Vectorized root finding for monotone increasing functions."""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceFailure


def solve_increasing(fun, dfun, target, lo, hi, x0=None, *,
                     rtol: float = 1e-14, atol: float = 1e-14, max_iter: int = 200):
    """Solve ``fun(x) = target`` elementwise with x bracketed in [lo, hi].

    Newton steps using the derivative ``dfun``; any step leaving the current
    bracket is replaced by bisection, so convergence is guaranteed for
    increasing ``fun``.  Stops once ``|fun(x) - target| <= max(atol, rtol*|target|)``
    or the bracket shrinks to a few ulps.
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    x = 0.5 * (lo + hi) if x0 is None else np.clip(np.asarray(x0, dtype=float), lo, hi)
    x = np.broadcast_to(x, target.shape).copy()
    scale = np.maximum(atol, rtol * np.abs(target))
    active = np.ones(target.shape, dtype=bool)
    for _ in range(max_iter):
        idx = np.nonzero(active)
        if idx[0].size == 0:
            break
        xa = x[idx]
        r = fun(xa, idx) - target[idx]
        done = np.abs(r) <= scale[idx]
        above = r > 0
        hi[idx] = np.where(above, xa, hi[idx])
        lo[idx] = np.where(above, lo[idx], xa)
        with np.errstate(all="ignore"):
            step = r / dfun(xa, idx)
        xn = xa - step
        lo_a, hi_a = lo[idx], hi[idx]
        bisect = ~np.isfinite(xn) | (xn <= lo_a) | (xn >= hi_a)
        xn = np.where(bisect, 0.5 * (lo_a + hi_a), xn)
        # bracket collapsed to adjacent floats
        tiny = (hi_a - lo_a) <= 4 * np.spacing(np.maximum(np.abs(lo_a), np.abs(hi_a)))
        done |= tiny
        x[idx] = np.where(done, xa, xn)
        active[idx] = ~done
    if np.any(active):
        raise ConvergenceFailure(
            f"monotone inversion did not converge for {int(active.sum())} point(s)")
    return x
