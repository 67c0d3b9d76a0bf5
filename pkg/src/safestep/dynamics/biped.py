"""Pinned five-link biped: Lagrangian dynamics, kinematics, impact map.

The continuous dynamics are D(q) qdd + C(q, qd) qd + G(q) = B u with
B = [0_{1x4}; I_4] (stance ankle unactuated) or B = I_5 in the fully
actuated test configuration. The guard is the swing foot descending
through ground height, and the reset is a plastic impact followed by the
stance/swing relabeling.
"""

import math

import numpy as np

from ..errors import SingularImpact, SingularMass
from . import backend
from .hybrid import HybridSystem
from .model import ControlAffineModel
from .params import NQ, BipedState, chain_coefficients

# Relabeling after impact: new absolute link angles are the old ones in
# reverse order (the chain is re-rooted at the former swing foot), which
# in relative joint coordinates is this constant matrix.
RELABEL = np.array([
    [1.0, 1.0, 1.0, 1.0, 1.0],
    [0.0, 0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0, 0.0],
])


def _as_state(x):
    if isinstance(x, BipedState):
        return x
    return BipedState.from_vector(x)


def mass_matrix(p, q):
    cc = chain_coefficients(p)
    return backend.mass_matrix(cc.P, cc.inertia, cc.grav, cc.g0,
                               np.asarray(q, dtype=float))


def coriolis_matrix(p, q, qd):
    cc = chain_coefficients(p)
    _, C, _ = backend.dcg(cc.P, cc.inertia, cc.grav, cc.g0,
                          np.asarray(q, dtype=float),
                          np.asarray(qd, dtype=float))
    return C


def gravity_vector(p, q):
    cc = chain_coefficients(p)
    _, _, G = backend.dcg(cc.P, cc.inertia, cc.grav, cc.g0,
                          np.asarray(q, dtype=float), np.zeros(NQ))
    return G


def bias_forces(p, q, qd):
    """C(q, qd) qd + G(q)."""
    cc = chain_coefficients(p)
    return backend.bias(cc.P, cc.inertia, cc.grav, cc.g0,
                        np.asarray(q, dtype=float),
                        np.asarray(qd, dtype=float))


def generalized_force(u):
    """Map actuator torques to joint-space forces B u.

    A 4-vector uses the underactuated B (zero ankle row); a 5-vector is
    the fully actuated test configuration.
    """
    u = np.asarray(u, dtype=float)
    if u.shape == (4,):
        return np.concatenate([[0.0], u])
    if u.shape == (5,):
        return u
    raise ValueError("torque vector must have 4 or 5 entries")


def forward_dynamics(p, x, u):
    """Joint accelerations qdd = D^{-1} (B u - C qd - G)."""
    s = _as_state(x)
    cc = chain_coefficients(p)
    try:
        return backend.accel(cc.P, cc.inertia, cc.grav, cc.g0, s.q, s.qd,
                             generalized_force(u))
    except np.linalg.LinAlgError as exc:
        raise SingularMass(str(exc)) from None


def as_control_affine(p, fully_actuated=False):
    """Continuous branch of the hybrid model as xdot = f(x) + g(x) u."""
    cc = chain_coefficients(p)
    m = 5 if fully_actuated else 4
    zero_tau = np.zeros(NQ)
    B = np.eye(NQ) if fully_actuated else np.eye(NQ)[:, 1:]

    def drift(x):
        try:
            return backend.rhs(cc.P, cc.inertia, cc.grav, cc.g0,
                               np.asarray(x, dtype=float), zero_tau)
        except np.linalg.LinAlgError as exc:
            raise SingularMass(str(exc)) from None

    def actuation(x):
        x = np.asarray(x, dtype=float)
        D = backend.mass_matrix(cc.P, cc.inertia, cc.grav, cc.g0, x[:NQ])
        try:
            cols = np.linalg.solve(D, B)
        except np.linalg.LinAlgError as exc:
            raise SingularMass(str(exc)) from None
        g = np.zeros((2 * NQ, m))
        g[NQ:, :] = cols
        return g

    def rhs(x, u):
        tau = generalized_force(u)
        try:
            return backend.rhs(cc.P, cc.inertia, cc.grav, cc.g0,
                               np.asarray(x, dtype=float), tau)
        except np.linalg.LinAlgError as exc:
            raise SingularMass(str(exc)) from None

    return ControlAffineModel(n=2 * NQ, m=m, drift=drift,
                              actuation=actuation, nq=NQ, rhs=rhs)


def swing_foot(p, q):
    """(F_x, p_v): horizontal and vertical swing-foot position."""
    l1, l2 = p.links[0].length, p.links[1].length
    l4, l5 = p.links[3].length, p.links[4].length
    t1 = q[0]
    t2 = t1 + q[1]
    t4 = t2 + q[2] + q[3]
    t5 = t4 + q[4]
    fx = -l1 * math.sin(t1) - l2 * math.sin(t2) \
        + l4 * math.sin(t4) + l5 * math.sin(t5)
    pv = l1 * math.cos(t1) + l2 * math.cos(t2) \
        - l4 * math.cos(t4) - l5 * math.cos(t5)
    return fx, pv


def guard_value(p, x):
    """(p_v, pdot_v): swing-foot height and its rate along the flow."""
    s = _as_state(x)
    q, qd = s.q, s.qd
    l1, l2 = p.links[0].length, p.links[1].length
    l4, l5 = p.links[3].length, p.links[4].length
    t1 = q[0]
    t2 = t1 + q[1]
    t4 = t2 + q[2] + q[3]
    t5 = t4 + q[4]
    w1 = qd[0]
    w2 = w1 + qd[1]
    w4 = w2 + qd[2] + qd[3]
    w5 = w4 + qd[4]
    pv = l1 * math.cos(t1) + l2 * math.cos(t2) \
        - l4 * math.cos(t4) - l5 * math.cos(t5)
    pdot = -l1 * math.sin(t1) * w1 - l2 * math.sin(t2) * w2 \
        + l4 * math.sin(t4) * w4 + l5 * math.sin(t5) * w5
    return pv, pdot


def swing_foot_jacobian(p, q):
    """2x5 Jacobian of the swing-foot position wrt joint coordinates."""
    cc = chain_coefficients(p)
    th = np.cumsum(np.asarray(q, dtype=float))
    Jth = np.vstack([-cc.swing * np.cos(th), -cc.swing * np.sin(th)])
    return np.cumsum(Jth[:, ::-1], axis=1)[:, ::-1]


def com_positions(p, q):
    """5x2 array of link center-of-mass positions (x, y)."""
    from .params import _coefficient_rows
    r = _coefficient_rows(p)
    th = np.cumsum(np.asarray(q, dtype=float))
    return np.column_stack([r @ (-np.sin(th)), r @ np.cos(th)])


def potential_energy(p, q):
    cc = chain_coefficients(p)
    th = np.cumsum(np.asarray(q, dtype=float))
    return cc.g0 * float(cc.grav @ np.cos(th))


def kinetic_energy(p, q, qd):
    qd = np.asarray(qd, dtype=float)
    return 0.5 * float(qd @ mass_matrix(p, q) @ qd)


def impact_reset(p, x_minus, guard_tol=1e-6):
    """Plastic impact at the swing foot, then stance/swing relabeling.

    Solves [D -J^T; J 0] (qd_post; Lambda) = (D qd_minus; 0) so the
    landing foot velocity is zero, then relabels coordinates so that
    foot becomes the new pinned stance foot.
    """
    s = _as_state(x_minus)
    pv, _ = guard_value(p, s)
    if abs(pv) > guard_tol:
        raise ValueError(f"state is not on the guard (p_v = {pv:.3e})")
    D = mass_matrix(p, s.q)
    J = swing_foot_jacobian(p, s.q)
    blk = np.zeros((7, 7))
    blk[:5, :5] = D
    blk[:5, 5:] = -J.T
    blk[5:, :5] = J
    rhs_vec = np.concatenate([D @ s.qd, np.zeros(2)])
    try:
        sol = np.linalg.solve(blk, rhs_vec)
    except np.linalg.LinAlgError as exc:
        raise SingularImpact(str(exc)) from None
    if not np.all(np.isfinite(sol)):
        raise SingularImpact("impact solution is not finite")
    qd_post = sol[:5]
    return BipedState(q=RELABEL @ s.q, qd=RELABEL @ qd_post)


def biped_hybrid_system(p, fully_actuated=False, blowup=1e3,
                        max_events=1000):
    """Hybrid model: continuous flow + impact guard/reset."""
    model = as_control_affine(p, fully_actuated=fully_actuated)

    def guard(x):
        return guard_value(p, x)

    def reset(x_minus):
        # Bisection leaves the state a hair past the guard; accept it.
        return impact_reset(p, x_minus, guard_tol=1e-3).vector()

    return HybridSystem(model=model, guard=guard, reset=reset,
                        blowup=blowup, max_events=max_events)
