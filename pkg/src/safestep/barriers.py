"""Barriers and gait outputs for the stepping-stone task.

The phase variable is an affine map of the linearized hip position, the
desired outputs are Bezier polynomials in the phase, and the two stone
barriers bound the swing foot inside a virtual stone interval whose
half-width R(tau) shrinks toward the physical stone as the step
progresses. Position-only barriers (relative degree two) get an
exponential extension h_e = L_f h + pole * h.

Gradients of barrier functions are central finite differences (step 1e-6
per coordinate); second-order terms use hddot = Jdot qd + J qdd with the
position Jacobian row finite-differenced and its rate taken as a
directional difference along qd. That keeps user-supplied barriers free
of hand-derived Hessians at an accuracy budget well inside control needs.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import yaml

from .errors import DegenerateParams, RelativeDegreeViolation

FD_STEP = 1e-6
# The Jacobian-rate difference sits on top of inner FD noise (~1e-10), so
# its step must be much larger than FD_STEP to keep the quotient clean.
FD_STEP_DIRECTIONAL = 1e-4


@dataclass(frozen=True)
class PhasingParams:
    """Linearized-hip endpoints of a step plus the leg segment lengths."""

    hip_start: float   # linearized hip position at step start, m
    hip_end: float     # linearized hip position at step end, m
    tibia_length: float
    femur_length: float

    def __post_init__(self):
        if self.hip_end == self.hip_start:
            raise ValueError("phase endpoints must differ")


def linearized_hip(pp, q):
    """Inner product [-l_t-l_f, -l_f, 0, 0, 0] . q"""
    return -(pp.tibia_length + pp.femur_length) * q[0] \
        - pp.femur_length * q[1]


def phase(pp, q):
    """Normalized step progress; not clamped, overshoot is reported."""
    return (linearized_hip(pp, q) - pp.hip_start) \
        / (pp.hip_end - pp.hip_start)


def phase_rate(pp, qd):
    return (-(pp.tibia_length + pp.femur_length) * qd[0]
            - pp.femur_length * qd[1]) / (pp.hip_end - pp.hip_start)


@dataclass(frozen=True)
class SteppingStoneParams:
    """Virtual stone geometry: (1+a)*r is half the targeted stone width."""

    center: float      # horizontal stone center, m (> 0, ahead of stance)
    r: float
    a: float
    decay_rate: float

    def __post_init__(self):
        if self.center <= 0:
            raise ValueError("stone center must be ahead of the stance foot")
        if self.r <= 0 or self.decay_rate <= 0:
            raise ValueError("r and decay_rate must be positive")
        if (1 + self.a) * self.r <= 0:
            raise ValueError("(1+a)*r must be positive")
        if self.a * self.r >= 1:
            raise ValueError("a*r must be below 1 for a shrinking stone")


def stone_radius(ss, tau):
    """Virtual stone half-width R(tau), strictly decreasing on [0, 1]."""
    ar = ss.a * ss.r
    denom = 1.0 + ar * (math.exp(-ss.decay_rate * (tau - 1.0)) - 1.0)
    if abs(denom) < 1e-12:
        raise DegenerateParams("stone width denominator vanished")
    return (ar - 1.0) / denom + 1.0 + ss.r


def stepping_stone_barriers(ss, pp, params, q):
    """(h1, h2): swing foot inside the virtual stone interval.

    h1 = R(tau) - (center - F_x), h2 = R(tau) + (center - F_x); both are
    nonnegative exactly when |center - F_x| <= R(tau).
    """
    from .dynamics import swing_foot

    R = stone_radius(ss, phase(pp, q))
    off = ss.center - swing_foot(params, q)[0]
    return R - off, R + off


class StoneSequence:
    """Per-step stone parameters; the index advances at each impact.

    Stones are given as (center, width) pairs relative to the stance foot
    of the corresponding step; the last stone repeats once the list is
    exhausted. A per-stone width overrides r so that (1+a)*r matches half
    that width.
    """

    def __init__(self, stones, r, a, decay_rate):
        if not stones:
            raise ValueError("at least one stone required")
        self._params = []
        for stone in stones:
            center = float(stone["center"])
            width = stone.get("width")
            r_i = float(width) / (2.0 * (1.0 + a)) if width else r
            self._params.append(SteppingStoneParams(
                center=center, r=r_i, a=a, decay_rate=decay_rate))
        self.index = 0

    @property
    def current(self):
        return self._params[min(self.index, len(self._params) - 1)]

    def advance(self):
        self.index += 1

    def reset(self):
        self.index = 0


@dataclass
class GaitOutputs:
    """Bezier desired-output coefficients and PD tracking gains."""

    bezier_coeffs: np.ndarray   # 4 x (degree + 1)
    K_P: np.ndarray             # 4 x 4 SPD
    K_D: np.ndarray             # 4 x 4 SPD

    def __post_init__(self):
        self.bezier_coeffs = np.atleast_2d(
            np.asarray(self.bezier_coeffs, dtype=float))
        self.K_P = np.asarray(self.K_P, dtype=float)
        self.K_D = np.asarray(self.K_D, dtype=float)
        for gain, name in ((self.K_P, "K_P"), (self.K_D, "K_D")):
            if not np.allclose(gain, gain.T, atol=1e-12) \
                    or np.linalg.eigvalsh(gain)[0] <= 0:
                raise ValueError(f"{name} must be symmetric positive definite")


def _binomial_row(deg):
    return np.array([math.comb(deg, i) for i in range(deg + 1)], dtype=float)


def bezier_value(coeffs, tau):
    """Bernstein evaluation; tau clamped to [0, 1] against extrapolation."""
    coeffs = np.atleast_2d(coeffs)
    deg = coeffs.shape[1] - 1
    t = min(max(tau, 0.0), 1.0)
    i = np.arange(deg + 1)
    basis = _binomial_row(deg) * t ** i * (1.0 - t) ** (deg - i)
    return coeffs @ basis


def bezier_derivative(coeffs, tau):
    """d/dtau of the Bezier value (degree-lowered Bernstein form)."""
    coeffs = np.atleast_2d(coeffs)
    deg = coeffs.shape[1] - 1
    if deg == 0:
        return np.zeros(coeffs.shape[0])
    diff = deg * np.diff(coeffs, axis=1)
    return bezier_value(diff, tau)


def outputs_and_pd(go, pp, x):
    """Tracking outputs y, their rate, and the PD torque on them."""
    x = np.asarray(x, dtype=float)
    q, qd = x[:5], x[5:]
    tau = phase(pp, q)
    taudot = phase_rate(pp, qd)
    y = q[1:] - bezier_value(go.bezier_coeffs, tau)
    ydot = qd[1:] - bezier_derivative(go.bezier_coeffs, tau) * taudot
    u_pd = -go.K_P @ y - go.K_D @ ydot
    return y, ydot, u_pd


@dataclass
class BarrierSpec:
    """A scalar barrier with its enforcement parameters.

    mode "cbf" enforces hdot >= -gain*h directly (relative degree one);
    mode "ecbf" extends a position-only h through h_e = L_f h + pole*h.
    residual is the learned correction added to the nominal derivative
    estimate; robust bounds live on the safety filter, not here.
    """

    h: Callable
    gain: float
    mode: str = "cbf"
    pole: float = 1.0
    residual: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if self.gain <= 0 or self.pole <= 0:
            raise ValueError("gain and pole must be positive")
        if self.mode not in ("cbf", "ecbf"):
            raise ValueError(f"unknown barrier mode {self.mode!r}")

    def effective_h(self, model):
        """The scalar whose derivative the filter constrains.

        For first-order barriers this is h itself; for ECBF barriers it is
        the extension h_e = L_f h + pole*h (model-independent for
        mechanical systems since L_f h = J_h qd).
        """
        if self.mode == "cbf":
            return self.h
        nq = model.nq
        if nq is None:
            raise RelativeDegreeViolation(
                "ecbf barriers need a mechanical model (nq set)")

        def h_e(x):
            x = np.asarray(x, dtype=float)
            Jh = _position_gradient(self.h, x, nq)
            return float(Jh @ x[nq:]) + self.pole * self.h(x)

        return h_e


def gradient_fd(h, x, step=FD_STEP):
    """Central-difference gradient of a scalar state function."""
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (h(xp) - h(xm)) / (2.0 * step)
    return g


def _position_gradient(h, x, nq, step=FD_STEP):
    g = np.empty(nq)
    for i in range(nq):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (h(xp) - h(xm)) / (2.0 * step)
    return g


def lie_derivatives_1(model, h, x):
    """(h, L_f h, L_g h) at x for a relative-degree-one barrier."""
    x = np.asarray(x, dtype=float)
    grad = gradient_fd(h, x)
    return float(h(x)), float(grad @ model.drift(x)), grad @ model.actuation(x)


def ecbf_terms(model, h, pole, x):
    """(h_e, L_f^2 h, L_g L_f h, L_f h) for a position-only barrier.

    Raises RelativeDegreeViolation if h shows input-channel sensitivity
    (||L_g h|| > 1e-8) at x.
    """
    nq = model.nq
    if nq is None:
        raise RelativeDegreeViolation(
            "ecbf barriers need a mechanical model (nq set)")
    x = np.asarray(x, dtype=float)
    q, qd = x[:nq], x[nq:]
    grad = gradient_fd(h, x)
    Jh = grad[:nq]
    gmat = model.actuation(x)
    gv = gmat[nq:, :]
    Lgh = grad[nq:] @ gv
    if np.linalg.norm(Lgh) > 1e-8:
        raise RelativeDegreeViolation(
            f"barrier has ||L_g h|| = {np.linalg.norm(Lgh):.2e} at x")
    f = model.drift(x)
    acc = f[nq:]
    Lfh = float(Jh @ qd)
    # Rate of the position Jacobian along the flow, directional difference.
    speed = float(np.max(np.abs(qd)))
    if speed > 0.0:
        eps = FD_STEP_DIRECTIONAL / max(1.0, speed)
        xp = x.copy()
        xm = x.copy()
        xp[:nq] += eps * qd
        xm[:nq] -= eps * qd
        Jdot = (_position_gradient(h, xp, nq)
                - _position_gradient(h, xm, nq)) / (2.0 * eps)
    else:
        Jdot = np.zeros(nq)
    Lf2h = float(Jdot @ qd + Jh @ acc)
    LgLfh = Jh @ gv
    h_e = Lfh + pole * float(h(x))
    return h_e, Lf2h, LgLfh, Lfh


def load_gait(path):
    """Read a gait file: Bezier coefficients, PD gains, phase endpoints."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    coeffs = np.asarray(raw["bezier_coeffs"], dtype=float)
    kp = np.asarray(raw["kp"], dtype=float)
    kd = np.asarray(raw["kd"], dtype=float)
    if kp.ndim == 1:
        kp = np.diag(kp)
    if kd.ndim == 1:
        kd = np.diag(kd)
    gait = GaitOutputs(bezier_coeffs=coeffs, K_P=kp, K_D=kd)
    out = {
        "gait": gait,
        "hip_start": float(raw["hip_start"]),
        "hip_end": float(raw["hip_end"]),
        "ankle": raw.get("ankle") or {},
        "x0": np.asarray(raw["x0"], dtype=float) if "x0" in raw else None,
    }
    return out


def load_stones(path):
    """Read a stone file: (center, width) list plus shape parameters."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return StoneSequence(stones=raw["stones"], r=float(raw["r"]),
                         a=float(raw["a"]),
                         decay_rate=float(raw["decay_rate"]))
