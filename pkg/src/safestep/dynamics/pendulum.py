"""Inverted pendulum toy model (oracle-scale testbed for the CBF stack)."""

import math

import numpy as np

from .model import ControlAffineModel


def inverted_pendulum_model(mass, length, damping=0.0, gravity=9.81):
    """Pendulum about the upright: x = (theta, thetadot), torque input.

    thetadd = (g0/l) sin(theta) - (c/(m l^2)) thetadot + u/(m l^2)
    """
    if mass <= 0 or length <= 0:
        raise ValueError("mass and length must be positive")
    ml2 = mass * length * length
    k_grav = gravity / length
    k_damp = damping / ml2
    gmat = np.array([[0.0], [1.0 / ml2]])

    def drift(x):
        return np.array([x[1], k_grav * math.sin(x[0]) - k_damp * x[1]])

    def actuation(x):
        return gmat

    def rhs(x, u):
        acc = k_grav * math.sin(x[0]) - k_damp * x[1] + u[0] / ml2
        return np.array([x[1], acc])

    return ControlAffineModel(n=2, m=1, drift=drift, actuation=actuation,
                              nq=1, rhs=rhs)
