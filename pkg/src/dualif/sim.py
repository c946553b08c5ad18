"""Fixed-step RK4 simulation of voltage and phase dynamics with spike events.

Steps have size ``dt`` (shorter where an input breakpoint or ``t_end``
intervenes).  A step that carries the state past the threshold is bisected
on its own step size until the crossing time is bracketed to ``event_tol``;
the spike is stamped at the bracket midpoint.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceGuard, DivergentError, InvalidModel, InvalidWrap, RangeError
from .models import DualPair, InputSignal, PhaseModel, VoltageModel

REPRS = ("voltage", "phase")
RESET_MODES = ("reset", "wrap")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    repr: str

    def __post_init__(self):
        if self.repr not in REPRS:
            raise ValueError(f"repr must be one of {REPRS}")
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.times)

    def to_csv(self) -> str:
        rows = ["t,value"] + [f"{t:.12g},{v:.12g}" for t, v in zip(self.times, self.values)]
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class SpikeTrain:
    spike_times: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.spike_times, dtype=float).reshape(-1)
        if np.any(s < 0) or np.any(np.diff(s) <= 0):
            raise ValueError("spike times must be non-negative and strictly increasing")
        object.__setattr__(self, "spike_times", s)

    def __len__(self) -> int:
        return len(self.spike_times)

    def intervals(self) -> np.ndarray:
        return np.diff(self.spike_times)

    def to_csv(self) -> str:
        return "t_spike\n" + "".join(f"{t:.12g}\n" for t in self.spike_times)


def to_json(traj: Trajectory, spikes: SpikeTrain) -> str:
    return json.dumps({"repr": traj.repr,
                       "t": [float(v) for v in traj.times],
                       "v": [float(v) for v in traj.values],
                       "spikes": [float(v) for v in spikes.spike_times]})


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    dt: float = 1e-3
    event_tol: float = 1e-10
    x_cap: float = 1e8
    reset_mode: str = "reset"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.event_tol < self.dt:
            raise ValueError("event_tol must lie in (0, dt)")
        if not self.x_cap > 0:
            raise ValueError("x_cap must be positive")
        if self.reset_mode not in RESET_MODES:
            raise ValueError(f"reset_mode must be one of {RESET_MODES}")


@dataclass(frozen=True)
class SpikeComparison:
    max_offset: float
    count_match: bool
    within_tol: bool


def compare_spike_trains(a: SpikeTrain, b: SpikeTrain, tol: float = 1e-4) -> SpikeComparison:
    """Pair spikes by index; the offset is taken over the common prefix."""
    n = min(len(a), len(b))
    diff = np.abs(a.spike_times[:n] - b.spike_times[:n])
    max_offset = float(diff.max()) if n else 0.0
    count_match = len(a) == len(b)
    return SpikeComparison(max_offset, count_match, count_match and max_offset <= tol)


# --------------------------------------------------------------------------
# Stepping core


def _sample_times(cfg: SimConfig) -> np.ndarray:
    n = int(math.floor(cfg.t_end / cfg.dt + 1e-9))
    times = np.arange(n + 1) * cfg.dt
    if cfg.t_end - times[-1] > 1e-9 * cfg.dt:
        times = np.append(times, cfg.t_end)
    else:
        times[-1] = cfg.t_end
    return times


def _rk4(rhs, inp: InputSignal, t: float, y: float, h: float) -> float:
    tm = t + 0.5 * h
    im = inp(tm)
    k1 = rhs(y, inp(t))
    k2 = rhs(y + 0.5 * h * k1, im)
    k3 = rhs(y + 0.5 * h * k2, im)
    k4 = rhs(y + h * k3, inp.left(t + h))
    return y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


_ESCAPE_PROBE = 1e-9


def _escape(rhs, i_now: float, y: float, h: float) -> Optional[float]:
    """State after ``h`` when leaving a rest point where the dynamics is not Lipschitz.

    Near such a point the velocity behaves like ``c |dy|^p`` with ``p < 1``
    and the forward solution reaches ``((1 - p) c h)^(1 / (1 - p))`` in time
    ``h``.  Returns None at an ordinary (Lipschitz) rest point.
    """
    for direction in (1.0, -1.0):
        r1 = direction * rhs(y + direction * _ESCAPE_PROBE, i_now)
        r2 = direction * rhs(y + direction * 2 * _ESCAPE_PROBE, i_now)
        if not (r1 > 0 and r2 > 0):
            continue
        p = math.log2(r2 / r1)
        if p >= 0.999:
            continue
        c = r1 / _ESCAPE_PROBE ** p
        return y + direction * ((1.0 - p) * c * h) ** (1.0 / (1.0 - p))
    return None


class _Stepper:
    """Event-aware RK4 integration between consecutive sample times."""

    def __init__(self, rhs: Callable, inp: InputSignal, threshold: float, reset: float,
                 cfg: SimConfig, wrap_length: Optional[float] = None,
                 guard: Optional[float] = None):
        self.rhs = rhs
        self.inp = inp
        self.threshold = threshold
        self.reset = reset
        self.cfg = cfg
        self.wrap_length = wrap_length
        self.guard = guard
        self.spikes: list[float] = []
        self._warned = False

    def _step(self, t: float, y: float, h: float) -> float:
        y_new = _rk4(self.rhs, self.inp, t, y, h)
        if y_new == y and self.rhs(y, self.inp(t)) == 0:
            escaped = _escape(self.rhs, self.inp(t), y, h)
            if escaped is not None:
                if not self._warned:
                    warnings.warn(f"state {y!r} is a non-Lipschitz rest point; "
                                  "following the escaping solution", RuntimeWarning,
                                  stacklevel=5)
                    self._warned = True
                y_new = escaped
        if not math.isfinite(y_new) or (self.guard is not None and abs(y_new) > self.guard):
            raise DivergenceGuard(f"|state| exceeded {self.guard:g} at t = {t + h:.6g}")
        return y_new

    def _crossing(self, t: float, y: float, h: float) -> float:
        lo, hi = 0.0, h
        while hi - lo > self.cfg.event_tol:
            mid = 0.5 * (lo + hi)
            if _rk4(self.rhs, self.inp, t, y, mid) >= self.threshold:
                hi = mid
            else:
                lo = mid
        return t + 0.5 * (lo + hi)

    def advance(self, t: float, y: float, t1: float) -> float:
        """State at ``t1``; spikes inside (t, t1] are appended to ``self.spikes``."""
        while t < t1:
            h = t1 - t
            y_new = self._step(t, y, h)
            if y_new < self.threshold:
                return y_new
            t_spike = self._crossing(t, y, h)
            if self.spikes and t_spike <= self.spikes[-1]:
                t_spike = math.nextafter(self.spikes[-1], math.inf)
            self.spikes.append(t_spike)
            if self.wrap_length is not None:
                wrapped = y_new - self.wrap_length
                if wrapped < self.threshold:
                    return wrapped
            # reset mode, or a wrap that would skip a whole cycle
            t, y = t_spike, self.reset
        return y


def _run(stepper: _Stepper, y0: float, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    times = _sample_times(cfg)
    cuts = sorted(b for b in stepper.inp.breakpoints if 0 < b < cfg.t_end)
    values = np.empty_like(times)
    values[0] = y = y0
    grid = times.tolist()
    for k in range(1, len(grid)):
        t0, t1 = grid[k - 1], grid[k]
        t = t0
        while cuts and t0 < cuts[0] < t1:
            y = stepper.advance(t, y, cuts[0])
            t = cuts.pop(0)
        y = stepper.advance(t, y, t1)
        values[k] = y
    return times, values


# --------------------------------------------------------------------------
# Public entry points


def integrate_phase(model: PhaseModel, inp: InputSignal, cfg: SimConfig,
                    y0: float = 0.0) -> tuple[Trajectory, SpikeTrain]:
    """Simulate ``dy/dt = (1 - I) g(y) + I`` with reset (or wrap) at ``y_plus``."""
    wrap = cfg.reset_mode == "wrap"
    if wrap and not model.compactified:
        raise InvalidWrap(f"model {model.name!r} is not compactified; wrap mode needs g = 1 "
                          "at both endpoints")
    if not model.y_minus <= y0 < model.y_plus:
        raise RangeError(f"initial phase {y0} outside [{model.y_minus}, {model.y_plus})")
    g = model.g_ext

    def rhs(y, i):
        if i == 1.0:
            return 1.0
        return (1.0 - i) * g(y) + i

    stepper = _Stepper(rhs, inp, model.y_plus, model.y_minus, cfg,
                       wrap_length=model.period_length if wrap else None)
    times, values = _run(stepper, float(y0), cfg)
    return Trajectory(times, values, "phase"), SpikeTrain(stepper.spikes)


def map_trajectory(traj: Trajectory, pair: DualPair) -> Trajectory:
    """Voltage trajectory ``x = h(y)`` of a phase trajectory."""
    if traj.repr != "phase":
        raise ValueError("map_trajectory expects a phase trajectory")
    phase = pair.phase
    v = traj.values
    if np.any(v < phase.y_minus) or np.any(v > phase.y_plus):
        raise RangeError("phase trajectory leaves the model's phase interval")
    if phase.compactified and np.any((v == phase.y_minus) | (v == phase.y_plus)):
        raise RangeError("phase trajectory touches a compactified endpoint")
    return Trajectory(traj.times, np.asarray(pair.h(v), dtype=float), "voltage")


def _phase_pair(model: VoltageModel) -> DualPair:
    from .dual import NumericDual

    try:
        dual = NumericDual(model)
    except DivergentError as exc:
        raise InvalidModel(f"model {model.name!r} has an infinite threshold but "
                           f"{exc}; it cannot be simulated") from exc
    return dual.pair()


def integrate_voltage(model: VoltageModel, inp: InputSignal, cfg: SimConfig,
                      x0: float = 0.0, pair: Optional[DualPair] = None,
                      mode: str = "auto") -> tuple[Trajectory, SpikeTrain]:
    """Simulate ``dx/dt = f(x) + I`` with reset to ``x_minus`` at ``x_plus``.

    With an infinite threshold the run goes through the phase dual (``pair``
    if given, else a numerically built one) and is mapped back, with samples
    clipped to ``+-x_cap``.  ``mode="direct"`` forces plain voltage stepping,
    which stops with :class:`DivergenceGuard` once ``|x|`` passes ``x_cap``.
    """
    if mode not in ("auto", "direct"):
        raise ValueError("mode must be 'auto' or 'direct'")
    infinite = bool(model.infinite_sides)
    if mode == "auto" and infinite:
        pair = pair if pair is not None else _phase_pair(model)
        y0 = float(pair.h_inv(x0))
        traj, spikes = integrate_phase(pair.phase, inp, cfg, y0)
        with np.errstate(all="ignore"):
            x = np.asarray(pair.h(traj.values, strict=False), dtype=float)
        x = np.clip(np.nan_to_num(x, nan=0.0, posinf=cfg.x_cap, neginf=-cfg.x_cap),
                    -cfg.x_cap, cfg.x_cap)
        return Trajectory(traj.times, x, "voltage"), spikes
    if cfg.reset_mode == "wrap":
        raise InvalidWrap("wrap mode applies to phase simulations only")
    if math.isinf(model.x_minus) and mode == "direct":
        raise InvalidModel("direct stepping cannot reset to an infinite voltage")
    if not model.x_minus <= x0 < model.x_plus:
        raise RangeError(f"initial voltage {x0} outside [{model.x_minus}, {model.x_plus})")
    f = model.f

    def rhs(x, i):
        return f(x, strict=False) + i

    stepper = _Stepper(rhs, inp, model.x_plus, model.x_minus, cfg, guard=cfg.x_cap)
    times, values = _run(stepper, float(x0), cfg)
    return Trajectory(times, values, "voltage"), SpikeTrain(stepper.spikes)
