"""Hybrid simulation: zero-order-hold control, RK4 flow, impact events.

Control is sampled at a fixed period; between samples the flow is
integrated with fixed-substep RK4. Guard crossings (value descending
through zero with negative rate) are located by bisection on the RK4
one-step map to a time tolerance of 1e-10 s, after which the reset map is
applied and integration continues.

Runs never raise on dynamics-level failures; the trace carries a
termination tag ("completed", "blowup", "max_events", "infeasible",
"controller_failure") plus diagnostics, so partial data stays usable.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import ControllerFailure, Infeasible
from .model import ControlAffineModel

EVENT_TIME_TOL = 1e-10


@dataclass
class ImpactEvent:
    t: float
    x_minus: np.ndarray
    x_plus: np.ndarray
    index: int = 0
    info: dict = field(default_factory=dict)


@dataclass
class HybridSystem:
    model: ControlAffineModel
    guard: Optional[Callable] = None   # x -> (value, rate)
    reset: Optional[Callable] = None   # x_minus -> x_plus
    guard_arm: float = 1e-6
    blowup: float = 1e3
    max_events: int = 1000


@dataclass
class HybridTrace:
    """Uniformly sampled rollout records plus the impact event list."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    dt: float
    events: list = field(default_factory=list)
    barrier_h: Optional[np.ndarray] = None
    barrier_hdot_nominal: Optional[np.ndarray] = None
    barrier_he: Optional[np.ndarray] = None
    delta_hat: Optional[np.ndarray] = None
    delta_true: Optional[np.ndarray] = None
    u_nominal: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)
    termination: str = "completed"
    termination_info: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.shape[0]

    @property
    def n_barriers(self):
        return 0 if self.barrier_h is None else self.barrier_h.shape[1]

    def phase_of(self, t):
        """Index of the continuous phase containing time t."""
        idx = 0
        for ev in self.events:
            if t >= ev.t:
                idx += 1
        return idx

    def phase_ids(self):
        """Per-sample phase index (increments at each impact)."""
        ids = np.zeros(len(self), dtype=int)
        for ev in self.events:
            ids[self.t >= ev.t - 1e-12] += 1
        return ids


class _StopRun(Exception):
    def __init__(self, reason, info=None):
        self.reason = reason
        self.info = info or {}


def _rk4_step(rhs, x, u, h):
    k1 = rhs(x, u)
    k2 = rhs(x + (0.5 * h) * k1, u)
    k3 = rhs(x + (0.5 * h) * k2, u)
    k4 = rhs(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def _locate_crossing(rhs, guard, x0, u, h):
    """Bisect the RK4 one-step map for the guard zero in (0, h]."""
    a, b = 0.0, h
    xb = _rk4_step(rhs, x0, u, h)
    while b - a > EVENT_TIME_TOL:
        mid = 0.5 * (a + b)
        xm = _rk4_step(rhs, x0, u, mid)
        if guard(xm)[0] > 0.0:
            a = mid
        else:
            b, xb = mid, xm
    return b, xb


class _Integrator:
    """Per-rollout integration state (guard arming, event count)."""

    def __init__(self, system, controller, t_offset=0.0):
        self.sys = system
        self.controller = controller
        self.armed = False
        self.events = []
        self.t_offset = t_offset

    def _check_blowup(self, x):
        if np.max(np.abs(x)) > self.sys.blowup:
            raise _StopRun("blowup", {"state": x.tolist()})

    def advance_substep(self, t0, x, u, h):
        """Advance exactly h seconds, applying resets on guard crossings."""
        sys = self.sys
        if sys.guard is None:
            x = _rk4_step(sys.model.rhs, x, u, h)
            self._check_blowup(x)
            return x
        done = 0.0
        while h - done > 1e-15:
            step = h - done
            v_prev = sys.guard(x)[0]
            if v_prev > sys.guard_arm:
                self.armed = True
            x_new = _rk4_step(sys.model.rhs, x, u, step)
            v_new, rate_new = sys.guard(x_new)
            crossed = (self.armed and v_prev > 0.0 and v_new <= 0.0
                       and rate_new < 0.0)
            if not crossed:
                self._check_blowup(x_new)
                return x_new
            tau, x_minus = _locate_crossing(sys.model.rhs, sys.guard, x, u,
                                            step)
            x_plus = np.asarray(sys.reset(x_minus), dtype=float)
            event = ImpactEvent(t=t0 + done + tau, x_minus=x_minus,
                                x_plus=x_plus, index=len(self.events))
            self.events.append(event)
            if len(self.events) > sys.max_events:
                raise _StopRun("max_events", {"t": event.t})
            hook = getattr(self.controller, "on_impact", None)
            if hook is not None:
                hook(event)
            self.armed = False
            x = x_plus
            done += tau
            self._check_blowup(x)
        return x


def simulate_hybrid(system, controller, x0, t_max, dt_ctrl, substeps=10):
    """Roll out the closed loop and return the sampled HybridTrace.

    controller is a callable x -> u; if it exposes last_log (a dict with
    per-barrier terms) the values are collected into the trace, and an
    on_impact(event) method is invoked at resets.
    """
    if dt_ctrl <= 0:
        raise ValueError("dt_ctrl must be positive")
    x = np.array(x0, dtype=float)
    n_samples = int(round(t_max / dt_ctrl)) + 1
    integ = _Integrator(system, controller)

    ts, xs, us = [], [], []
    logs = []
    termination = "completed"
    info = {}
    for k in range(n_samples):
        t_k = k * dt_ctrl
        try:
            u = np.atleast_1d(np.asarray(controller(x), dtype=float))
        except Infeasible as exc:
            termination = "infeasible"
            info = {"t": t_k, "state": x.tolist(),
                    "diagnostics": getattr(exc, "diagnostics", {})}
            break
        except ControllerFailure as exc:
            termination = "controller_failure"
            info = {"t": t_k, "state": x.tolist(), "error": str(exc),
                    "diagnostics": exc.diagnostics}
            break
        ts.append(t_k)
        xs.append(x.copy())
        us.append(u.copy())
        logs.append(dict(getattr(controller, "last_log", None) or {}))
        if k == n_samples - 1:
            break
        try:
            h = dt_ctrl / substeps
            for _ in range(substeps):
                x = integ.advance_substep(t_k, x, u, h)
                t_k += h
        except _StopRun as stop:
            termination = stop.reason
            info = stop.info
            break

    trace = HybridTrace(
        t=np.asarray(ts), x=np.asarray(xs).reshape(len(ts), -1),
        u=np.asarray(us).reshape(len(ts), -1), dt=dt_ctrl,
        events=integ.events, termination=termination,
        termination_info=info)
    _attach_logs(trace, logs)
    return trace


def _attach_logs(trace, logs):
    if not logs or not any(logs):
        return
    n = len(logs)

    def column(key):
        vals = [np.atleast_1d(np.asarray(row.get(key), dtype=float))
                if row.get(key) is not None else None for row in logs]
        if all(v is None for v in vals):
            return None
        width = next(v.shape[0] for v in vals if v is not None)
        out = np.full((n, width), np.nan)
        for i, v in enumerate(vals):
            if v is not None:
                out[i] = v
        return out

    trace.barrier_h = column("h")
    trace.barrier_hdot_nominal = column("hdot_nominal")
    trace.barrier_he = column("he")
    trace.delta_hat = column("delta_hat")
    trace.u_nominal = column("u_nominal")
    for key in ("tau", "F_x", "p_v"):
        col = column(key)
        if col is not None:
            trace.extras[key] = col[:, 0]
