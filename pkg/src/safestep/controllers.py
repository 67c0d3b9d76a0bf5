"""Safety filters: the CBF-QP controller family over a nominal model.

One SafetyFilter covers all four variants. Per barrier, the constraint row
is (first order)

    L_f h + L_g h u + residual(x) - robust_bound >= -gain * h

or, for position-only barriers in ECBF mode,

    L_f^2 h + L_g L_f h u + pole * L_f h + residual(x) - robust_bound
        >= -gain * h_e

so a plain CBF-QP is the filter with neither residual nor robust bound, a
robust variant sets the bound, and a learned variant sets the residual.
All Lie-derivative terms come from the nominal model; the mismatch to the
true plant is exactly the projected disturbance evaluated here as ground
truth for simulation studies.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .barriers import ecbf_terms, gradient_fd, lie_derivatives_1
from .errors import Infeasible
from .qp import ProjectionQP, solve_projection_qp


@dataclass
class SafetyFilter:
    """Minimally invasive projection of a nominal controller.

    robust_bounds are per-barrier constants (None entries disabled); a
    barrier may carry a learned residual or a robust bound, not both.
    impact_hook runs at reset events (stone bookkeeping), extra_logger
    contributes columns to the rollout trace.
    """

    nominal_controller: Callable
    barriers: List
    model_nominal: object
    robust_bounds: Optional[List[Optional[float]]] = None
    saturation: Optional[tuple] = None
    impact_hook: Optional[Callable] = None
    extra_logger: Optional[Callable] = None
    last_log: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.barriers:
            raise ValueError("at least one barrier required")
        if self.robust_bounds is None:
            self.robust_bounds = [None] * len(self.barriers)
        if len(self.robust_bounds) != len(self.barriers):
            raise ValueError("one robust bound slot per barrier")
        for spec, bound in zip(self.barriers, self.robust_bounds):
            if bound is not None and spec.residual is not None:
                raise ValueError(
                    "a barrier uses a robust bound or a residual, not both")
            if bound is not None and bound < 0:
                raise ValueError("robust bounds must be nonnegative")

    def __call__(self, x):
        return filter_control(self, x)

    def on_impact(self, event):
        if self.impact_hook is not None:
            self.impact_hook(event)


def filter_control(sf, x):
    """Solve the variant QP at x and return the filtered input."""
    x = np.asarray(x, dtype=float)
    u_d = np.atleast_1d(np.asarray(sf.nominal_controller(x), dtype=float))
    model = sf.model_nominal
    m = u_d.size

    rows = np.zeros((len(sf.barriers), m))
    rhs = np.zeros(len(sf.barriers))
    h_vals, he_vals, res_vals = [], [], []
    offsets = []  # u-independent part of the enforced derivative
    for i, spec in enumerate(sf.barriers):
        res = float(spec.residual(x)) if spec.residual is not None else 0.0
        bound = sf.robust_bounds[i] or 0.0
        if spec.mode == "cbf":
            h, lfh, lgh = lie_derivatives_1(model, spec.h, x)
            rows[i] = lgh
            offsets.append(lfh)
            rhs[i] = -spec.gain * h - lfh - res + bound
            h_vals.append(h)
            he_vals.append(np.nan)
        else:
            he, lf2h, lglfh, lfh = ecbf_terms(model, spec.h, spec.pole, x)
            rows[i] = lglfh
            offsets.append(lf2h + spec.pole * lfh)
            rhs[i] = -spec.gain * he - lf2h - spec.pole * lfh - res + bound
            h_vals.append(float(spec.h(x)))
            he_vals.append(he)
        res_vals.append(res)

    try:
        sol = solve_projection_qp(ProjectionQP(u_d=u_d, A=rows, b=rhs))
    except Infeasible as exc:
        exc.diagnostics.update(state=x.tolist(), rows=rows.tolist(),
                               rhs=rhs.tolist())
        raise
    u = sol.u_star
    saturated = False
    if sf.saturation is not None:
        lo, hi = sf.saturation
        clipped = np.clip(u, lo, hi)
        saturated = bool(np.any(clipped != u))
        u = clipped

    hdot_nom = [offsets[i] + float(rows[i] @ u)
                for i in range(len(sf.barriers))]
    log = {
        "h": h_vals,
        "he": he_vals if any(np.isfinite(he_vals)) else None,
        "hdot_nominal": hdot_nom,
        "delta_hat": res_vals,
        "u_nominal": u_d,
    }
    if saturated:
        log["saturated"] = 1.0
    if sf.extra_logger is not None:
        log.update(sf.extra_logger(x))
    sf.last_log = log
    return u


def projected_disturbance(model_true, model_nominal, h, x, u):
    """Model-error term as it enters the derivative of h.

    grad h . [(f - f_hat)(x) + (g - g_hat)(x) u], the discrepancy between
    the true and nominal derivative estimates at the same (x, u).
    """
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    grad = gradient_fd(h, x)
    df = model_true.drift(x) - model_nominal.drift(x)
    dg = model_true.actuation(x) - model_nominal.actuation(x)
    return float(grad @ (df + dg @ u))


def projected_disturbance_affine(model_true, model_nominal, h, x):
    """(b, a) with disturbance = b + a . u, from the model difference."""
    x = np.asarray(x, dtype=float)
    grad = gradient_fd(h, x)
    df = model_true.drift(x) - model_nominal.drift(x)
    dg = model_true.actuation(x) - model_nominal.actuation(x)
    return float(grad @ df), grad @ dg


def barrier_disturbance(spec, model_true, model_nominal, x, u):
    """Projected disturbance of the quantity the filter enforces.

    First-order barriers use h itself. ECBF barriers attach the residual
    at the h_e level; for mechanical models only the velocity block of the
    model error enters, so the exact value is J_h (delta_acc + delta_gv u).
    """
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if spec.mode == "cbf":
        return projected_disturbance(model_true, model_nominal, spec.h, x, u)
    nq = model_nominal.nq
    from .barriers import _position_gradient
    Jh = _position_gradient(spec.h, x, nq)
    dacc = model_true.drift(x)[nq:] - model_nominal.drift(x)[nq:]
    dgv = model_true.actuation(x)[nq:, :] - model_nominal.actuation(x)[nq:, :]
    return float(Jh @ (dacc + dgv @ u))


def attach_true_disturbance(trace, barriers, model_true, model_nominal):
    """Fill trace.delta_true from logged states and inputs (simulation)."""
    n = len(trace)
    out = np.zeros((n, len(barriers)))
    for k in range(n):
        for i, spec in enumerate(barriers):
            out[k, i] = barrier_disturbance(spec, model_true, model_nominal,
                                            trace.x[k], trace.u[k])
    trace.delta_true = out
    return trace


def pssf_margin(trace, barrier_index):
    """(min_h, max_violation, observed |delta|_inf or None) over a trace."""
    if trace.barrier_h is None:
        raise ValueError("trace carries no barrier values")
    h = trace.barrier_h[:, barrier_index]
    min_h = float(np.min(h)) if h.size else 0.0
    max_violation = max(0.0, -min_h)
    observed = None
    if trace.delta_true is not None:
        observed = float(np.max(np.abs(trace.delta_true[:, barrier_index])))
    return min_h, max_violation, observed


def mean_control_deviation(trace):
    """Average ||u - k_d(x)|| over a trace (conservativeness measure)."""
    if trace.u_nominal is None:
        raise ValueError("trace carries no nominal-control column")
    return float(np.mean(np.linalg.norm(trace.u - trace.u_nominal, axis=1)))
