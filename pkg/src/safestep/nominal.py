"""Nominal (task) controllers that the safety filters project.

The biped tracker is a PD on the four gait outputs with gravity
feedforward computed from the controller's model belief. In the fully
actuated test configuration the stance ankle additionally regulates the
linearized hip speed, which drives the phase forward at a steady rate;
with four actuators the ankle channel is absent and the gait must supply
its own zero-dynamics stability.
"""

import numpy as np

from .barriers import outputs_and_pd, phase_rate
from .dynamics.biped import gravity_vector


class PendulumPd:
    """Torque PD toward a (possibly far) target angle."""

    def __init__(self, kp, kd, target):
        self.kp = kp
        self.kd = kd
        self.target = target

    def __call__(self, x):
        return np.array([self.kp * (self.target - x[0]) - self.kd * x[1]])


class BipedGaitPd:
    """Gait-output PD with gravity feedforward, optional ankle channel.

    params is the controller's model belief (gravity feedforward source),
    not necessarily the true plant. hip_speed is the desired linearized
    hip velocity in m/s; ankle_kv its regulation gain.
    """

    def __init__(self, gait, phasing, params, fully_actuated=True,
                 ankle_kv=60.0, hip_speed=0.5, gravity_ff=True):
        self.gait = gait
        self.phasing = phasing
        self.params = params
        self.fully_actuated = fully_actuated
        self.ankle_kv = ankle_kv
        self.hip_speed = hip_speed
        self.gravity_ff = gravity_ff

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        q, qd = x[:5], x[5:]
        _, _, u_pd = outputs_and_pd(self.gait, self.phasing, x)
        grav = gravity_vector(self.params, q) if self.gravity_ff \
            else np.zeros(5)
        u_joints = u_pd + grav[1:]
        if not self.fully_actuated:
            return u_joints
        pp = self.phasing
        hip_rate = -(pp.tibia_length + pp.femur_length) * qd[0] \
            - pp.femur_length * qd[1]
        # Positive ankle torque decelerates the hip, hence the sign.
        u_ankle = grav[0] - self.ankle_kv * (self.hip_speed - hip_rate)
        return np.concatenate([[u_ankle], u_joints])
