import math

import numpy as np
import pytest

from safestep.dynamics import BipedParameters, BipedState, LinkParams


def default_params(inertia_scale=1.0):
    return BipedParameters(
        links=(
            LinkParams(mass=1.75, length=0.40, com=0.20, inertia=0.024),
            LinkParams(mass=3.25, length=0.40, com=0.20, inertia=0.044),
            LinkParams(mass=12.0, length=0.57, com=0.28, inertia=0.325),
            LinkParams(mass=3.25, length=0.40, com=0.20, inertia=0.044),
            LinkParams(mass=1.75, length=0.40, com=0.20, inertia=0.024),
        ),
        gravity=9.81,
        inertia_scale=inertia_scale,
    )


@pytest.fixture
def biped_params():
    return default_params()


def random_biped_state(rng, spread=0.6, vel=2.0):
    q = rng.uniform(-spread, spread, size=5)
    qd = rng.uniform(-vel, vel, size=5)
    return BipedState(q=q, qd=qd)


def random_guard_state(rng, p, tries=200):
    """Random state on the impact guard: p_v = 0 with descending foot."""
    from scipy.optimize import brentq

    from safestep.dynamics import guard_value, swing_foot

    for _ in range(tries):
        q = rng.uniform(-0.5, 0.5, size=5)

        def pv_of_nsh(a):
            qq = q.copy()
            qq[3] = a
            return swing_foot(p, qq)[1]

        grid = np.linspace(-1.2, 1.2, 49)
        vals = [pv_of_nsh(a) for a in grid]
        bracket = None
        for i in range(len(grid) - 1):
            if vals[i] == 0.0:
                bracket = (grid[i], grid[i])
                break
            if vals[i] * vals[i + 1] < 0:
                bracket = (grid[i], grid[i + 1])
                break
        if bracket is None:
            continue
        q[3] = brentq(pv_of_nsh, bracket[0], bracket[1], xtol=1e-14) \
            if bracket[0] != bracket[1] else bracket[0]
        qd = rng.uniform(-2.0, 2.0, size=5)
        state = BipedState(q=q, qd=qd)
        _, pdot = guard_value(p, state)
        if abs(pdot) < 1e-3:
            continue
        if pdot > 0:
            state = BipedState(q=q, qd=-qd)
        return state
    raise RuntimeError("could not sample a guard state")


def upright_bent_state(lean=0.1, bend=0.3):
    """A mildly bent configuration clear of the guard, at rest."""
    q = np.array([lean, -bend, 0.05, -0.2, bend])
    return BipedState(q=q, qd=np.zeros(5))


def numeric_jacobian(f, x, eps=1e-7):
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(f(x), dtype=float))
    J = np.zeros((f0.size, x.size))
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = eps
        J[:, i] = (np.atleast_1d(f(x + dx)) - np.atleast_1d(f(x - dx))) \
            / (2 * eps)
    return J


def swing_foot_oracle(p, q):
    """Independent forward kinematics: accumulate joints link by link.

    Walks up the stance leg then down the swing leg summing l*(sin, cos)
    terms, without the vectorized coefficient machinery.
    """
    th = 0.0
    pos = np.zeros(2)
    th += q[0]
    pos += p.links[0].length * np.array([-math.sin(th), math.cos(th)])
    th += q[1]
    pos += p.links[1].length * np.array([-math.sin(th), math.cos(th)])
    th_hip = th + q[2]          # torso absolute angle (not part of the leg)
    th = th_hip + q[3]          # swing femur
    pos -= p.links[3].length * np.array([-math.sin(th), math.cos(th)])
    th += q[4]                  # swing tibia
    pos -= p.links[4].length * np.array([-math.sin(th), math.cos(th)])
    return pos[0], pos[1]


def com_heights_oracle(p, q):
    """Independent per-link center-of-mass heights for energy checks."""
    heights = []
    th1 = q[0]
    th2 = th1 + q[1]
    th3 = th2 + q[2]
    th4 = th3 + q[3]
    th5 = th4 + q[4]
    knee_y = p.links[0].length * math.cos(th1)
    hip_y = knee_y + p.links[1].length * math.cos(th2)
    heights.append(p.links[0].com * math.cos(th1))
    heights.append(knee_y + p.links[1].com * math.cos(th2))
    heights.append(hip_y + p.links[2].com * math.cos(th3))
    heights.append(hip_y - p.links[3].com * math.cos(th4))
    swing_knee_y = hip_y - p.links[3].length * math.cos(th4)
    heights.append(swing_knee_y - p.links[4].com * math.cos(th5))
    return np.array(heights)
